"""Flat ``section.key=value`` pipeline configuration.

Example::

    seed=3
    stft.hop=160
    mel.n_mels=80
    wsola.tolerance=128
    train.epochs=50
    paths.list=data/utts.csv

Lines starting with ``#`` are comments. Unknown sections or keys are errors.
"""

import dataclasses
import os
from dataclasses import dataclass, field

from elvc.errors import ConfigError
from elvc.features import MccConfig, MelConfig, StftConfig
from elvc.neural.model import ModelConfig
from elvc.neural.train import TrainConfig
from elvc.wsola import WsolaConfig

SECTIONS = {
    "stft": StftConfig,
    "mel": MelConfig,
    "mcc": MccConfig,
    "wsola": WsolaConfig,
    "train": TrainConfig,
    "model": ModelConfig,
}
# paths.* entries naming inputs that must exist before any stage runs
INPUT_PATH_KEYS = ("list", "data", "checkpoint", "converted", "target", "external")


@dataclass
class PipelineConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    mel: MelConfig = field(default_factory=MelConfig)
    mcc: MccConfig = field(default_factory=MccConfig)
    wsola: WsolaConfig = field(default_factory=WsolaConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    paths: dict = field(default_factory=dict)
    seed: int = 0

    def with_overrides(self, section, **values):
        """Copy with some fields of one section replaced; ``None`` values are ignored."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **values)})


def _coerce(key, raw, target_type):
    try:
        if target_type is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r} as {target_type.__name__}") from exc


def parse_config(text, source="<config>"):
    sections = {name: {} for name in SECTIONS}
    paths = {}
    seed = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", "expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "seed":
            seed = _coerce(key, raw, int)
            continue
        section, _, name = key.partition(".")
        if section == "paths" and name:
            paths[name] = raw
            continue
        if section not in SECTIONS or not name:
            raise ConfigError(key, "unknown key")
        types = {f.name: f.type for f in dataclasses.fields(SECTIONS[section])}
        if name not in types:
            raise ConfigError(key, "unknown key")
        ftype = types[name]
        if isinstance(ftype, str):
            ftype = {"int": int, "float": float, "str": str, "bool": bool}[ftype]
        sections[section][name] = _coerce(key, raw, ftype)
    built = {}
    for name, cls in SECTIONS.items():
        try:
            built[name] = cls(**sections[name])
        except ValueError as exc:
            raise ConfigError(name, str(exc)) from exc
    return PipelineConfig(paths=paths, seed=seed, **built)


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError("--config", f"file not found: {path}")
    with open(path) as fh:
        cfg = parse_config(fh.read(), source=path)
    validate_paths(cfg)
    return cfg


def validate_paths(cfg):
    for key in INPUT_PATH_KEYS:
        value = cfg.paths.get(key)
        if value is not None and not os.path.exists(value):
            raise ConfigError(f"paths.{key}", f"does not exist: {value}")
