"""Mini-batch Adam training on masked frame-wise MSE."""

import logging
from dataclasses import dataclass

import numpy as np

from elvc.errors import EmptyDataset, ModeMismatch, ShapeError
from elvc.io import FeatureMatrix, LayeredFeatureSet
from elvc.neural.model import ModelConfig, backward, build_model, forward, prepare_visual
from elvc.visual import fit_norm_stats

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.batch_size <= 0 or self.learning_rate <= 0 or self.epochs < 0 or self.eps <= 0:
            raise ValueError("batch_size, learning_rate and eps must be positive, epochs non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


def masked_mse(pred, target, mask):
    """Mean squared error over unmasked frames and all dims, and its gradient."""
    m = mask[..., None].astype(np.float64)
    n = mask.sum() * pred.shape[-1]
    diff = (pred - target) * m
    return float(np.sum(diff * diff) / n), 2.0 * diff / n


class Adam:
    def __init__(self, tensors, cfg):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.t = 0

    def step(self, tensors, grads):
        c = self.cfg
        self.t += 1
        corr1 = 1.0 - c.beta1**self.t
        corr2 = 1.0 - c.beta2**self.t
        for k in tensors:
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g
            tensors[k] -= c.learning_rate * (self.m[k] / corr1) / (np.sqrt(self.v[k] / corr2) + c.eps)


def _unpack(item):
    acoustic, visual, target = item
    if isinstance(acoustic, FeatureMatrix):
        acoustic = acoustic.data
    if isinstance(target, FeatureMatrix):
        target = target.data
    if visual is not None and not isinstance(visual, LayeredFeatureSet):
        visual = LayeredFeatureSet(visual)
    return np.asarray(acoustic, dtype=np.float64), visual, np.asarray(target, dtype=np.float64)


def make_batches(lengths, batch_size):
    """Group utterance indices into length-sorted buckets of at most ``batch_size``."""
    order = np.argsort(np.asarray(lengths), kind="stable")
    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def pad_batch(arrays, time_axis=0):
    """Zero-pad arrays along ``time_axis`` to a common length; returns (stacked, mask)."""
    T = max(a.shape[time_axis] for a in arrays)
    out = []
    mask = np.zeros((len(arrays), T), dtype=bool)
    for b, a in enumerate(arrays):
        widths = [(0, 0)] * a.ndim
        widths[time_axis] = (0, T - a.shape[time_axis])
        out.append(np.pad(a, widths))
        mask[b, : a.shape[time_axis]] = True
    return np.stack(out), mask


def fit_feature_stats(params, acoustics, targets):
    """Set the fixed input and output standardization from training data."""
    a = np.concatenate(acoustics, axis=0)
    t = np.concatenate(targets, axis=0)
    params.stats["in_mean"] = a.mean(axis=0)
    params.stats["in_std"] = np.maximum(a.std(axis=0), 1e-6)
    params.stats["out_mean"] = t.mean(axis=0)
    params.stats["out_std"] = np.maximum(t.std(axis=0), 1e-6)


def batch_loss_and_grads(params, acoustics, visuals, targets):
    x, mask = pad_batch(acoustics)
    y, _ = pad_batch(targets)
    vis = None
    if visuals is not None:
        vis, _ = pad_batch(visuals, time_axis=1)
    pred, cache = forward(params, x, vis, mask)
    loss, g = masked_mse(pred, y, mask)
    return loss, backward(params, cache, g)


def train(dataset, cfg=TrainConfig(), mode="audio_only", model_config=ModelConfig(), params=None):
    """Train a conversion model; returns ``(params, per-epoch mean loss list)``.

    ``dataset`` holds ``(acoustic, visual_or_None, target)`` triples with target
    frames already aligned to the acoustic frames. Feature standardization and
    visual layer normalization are fitted here on the training data.
    """
    items = [_unpack(item) for item in dataset]
    if not items:
        raise EmptyDataset("training set is empty")
    for a, v, t in items:
        if a.shape[0] != t.shape[0]:
            raise ShapeError(f"acoustic has {a.shape[0]} frames but target has {t.shape[0]}")
        if (v is None) != (mode == "audio_only"):
            raise ModeMismatch(f"mode {mode} and visual presence disagree")
        if v is not None and v.n_frames != a.shape[0]:
            raise ShapeError(f"visual has {v.n_frames} frames but acoustic has {a.shape[0]}")

    if params is None:
        vdim = 0 if mode == "audio_only" else items[0][1].dim
        vlayers = 0 if mode == "audio_only" else items[0][1].n_layers
        params = build_model(mode, vdim, vlayers, model_config, seed=cfg.seed)
        fit_feature_stats(params, [a for a, _, _ in items], [t for _, _, t in items])
        if mode != "audio_only":
            params.visual_norm = fit_norm_stats([v for _, v, _ in items])
    elif params.mode != mode:
        raise ModeMismatch(f"params are {params.mode}, asked to train {mode}")

    acoustics = [a for a, _, _ in items]
    targets = [t for _, _, t in items]
    visuals = None if mode == "audio_only" else [prepare_visual(params, v) for _, v, _ in items]

    rng = np.random.default_rng(cfg.seed)
    batches = make_batches([a.shape[0] for a in acoustics], cfg.batch_size)
    opt = Adam(params.tensors, cfg)
    history = []
    for epoch in range(cfg.epochs):
        total, frames = 0.0, 0
        for bi in rng.permutation(len(batches)):
            idx = batches[bi]
            loss, grads = batch_loss_and_grads(
                params,
                [acoustics[i] for i in idx],
                None if visuals is None else [visuals[i] for i in idx],
                [targets[i] for i in idx],
            )
            opt.step(params.tensors, grads)
            n = sum(acoustics[i].shape[0] for i in idx)
            total += loss * n
            frames += n
        history.append(total / frames)
        log.debug("epoch %d loss %.6f", epoch + 1, history[-1])
    return params, history


def evaluate_mse(params, dataset):
    """Frame-weighted MSE of the model over ``dataset`` (raw visual features)."""
    total, frames = 0.0, 0
    for item in dataset:
        a, v, t = _unpack(item)
        pred, _ = forward(params, a, prepare_visual(params, v))
        total += float(np.sum((pred - t) ** 2)) / t.shape[1]
        frames += t.shape[0]
    return total / frames
