"""Checkpoint directory: one ELF1 file per tensor plus a key=value manifest."""

import os

import numpy as np

from elvc.errors import ParseError
from elvc.io import read_feature_array, write_feature_file
from elvc.neural.model import ModelConfig, ModelParameters
from elvc.visual import NormStats

MANIFEST = "manifest.txt"
NORM_FILE = "visual_norm.elf1"
FORMAT = "elvc-checkpoint-1"


def _as3d(arr):
    if arr.ndim == 1:
        return arr[None, None, :]
    if arr.ndim == 2:
        return arr[None]
    return arr


def save_checkpoint(params, directory):
    os.makedirs(directory, exist_ok=True)
    lines = [
        f"format={FORMAT}",
        f"mode={params.mode}",
        f"seed={params.seed}",
        f"visual_dim={params.visual_dim}",
        f"visual_layers={params.visual_layers}",
    ]
    for name in ("conv_channels", "kernel", "hidden", "acoustic_dim", "out_dim"):
        lines.append(f"config.{name}={getattr(params.config, name)}")
    for i, spec in enumerate(params.layer_specs()):
        lines.append(f"layer.{i}={spec.describe()}")
    for group, tensors in (("tensor", params.tensors), ("stat", params.stats)):
        for name, arr in tensors.items():
            fname = f"{group}.{name}.elf1"
            write_feature_file(_as3d(arr), os.path.join(directory, fname))
            shape = ",".join(str(s) for s in arr.shape)
            lines.append(f"{group}.{name}={fname} shape={shape}")
    if params.visual_norm is not None:
        params.visual_norm.save(os.path.join(directory, NORM_FILE))
        lines.append(f"visual_norm={NORM_FILE}")
    with open(os.path.join(directory, MANIFEST), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(directory):
    entries = {}
    with open(os.path.join(directory, MANIFEST)) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{MANIFEST}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            entries[key] = value
    if entries.get("format") != FORMAT:
        raise ParseError(f"unsupported checkpoint format {entries.get('format')!r}")
    cfg = ModelConfig(**{k.split(".", 1)[1]: int(v) for k, v in entries.items() if k.startswith("config.")})
    groups = {"tensor": {}, "stat": {}}
    for key, value in entries.items():
        group, _, name = key.partition(".")
        if group not in groups:
            continue
        fname, shape_field = value.split(" shape=")
        shape = tuple(int(s) for s in shape_field.split(",") if s)
        groups[group][name] = read_feature_array(os.path.join(directory, fname)).reshape(shape)
    norm = None
    if "visual_norm" in entries:
        norm = NormStats.load(os.path.join(directory, entries["visual_norm"]))
    seed = entries.get("seed")
    return ModelParameters(
        mode=entries["mode"],
        config=cfg,
        visual_dim=int(entries["visual_dim"]),
        visual_layers=int(entries["visual_layers"]),
        tensors=groups["tensor"],
        stats=groups["stat"],
        visual_norm=norm,
        seed=None if seed in (None, "None") else int(seed),
    )


def tensors_equal(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
