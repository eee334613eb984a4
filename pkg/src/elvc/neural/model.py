"""CLDNN-shaped conversion network: Conv1D -> ReLU -> GRU -> Linear.

In the multimodal modes the visual branch (softmax-weighted layer fusion,
optionally followed by a fine-tuning GRU of the same width) is concatenated
frame-wise with the acoustic input ahead of the convolution.
"""

from dataclasses import dataclass, field

import numpy as np

from elvc.errors import BadDim, ModeMismatch, ShapeError
from elvc.io import FeatureMatrix, LayeredFeatureSet
from elvc.neural import layers as L
from elvc.visual import NormStats, apply_norm_stats, softmax, weighted_sum, weighted_sum_backward

MODES = ("audio_only", "multimodal", "multimodal_ft")


@dataclass(frozen=True)
class ModelConfig:
    conv_channels: int = 64
    kernel: int = 5
    hidden: int = 64
    acoustic_dim: int = 80
    out_dim: int = 80

    def __post_init__(self):
        if min(self.conv_channels, self.kernel, self.hidden, self.acoustic_dim, self.out_dim) <= 0:
            raise BadDim("model dimensions must be positive")
        if self.kernel % 2 == 0:
            raise BadDim(f"kernel must be odd, got {self.kernel}")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    kernel: int = 0
    activation: str = ""

    def describe(self):
        parts = [self.kind, f"in={self.in_dim}", f"out={self.out_dim}"]
        if self.kernel:
            parts.append(f"kernel={self.kernel}")
        if self.activation:
            parts.append(f"activation={self.activation}")
        return " ".join(parts)


@dataclass
class ModelParameters:
    mode: str
    config: ModelConfig
    visual_dim: int
    visual_layers: int
    tensors: dict
    stats: dict = field(default_factory=dict)
    visual_norm: NormStats = None
    seed: int = None

    @property
    def multimodal(self):
        return self.mode != "audio_only"

    @property
    def trunk_in(self):
        return self.config.acoustic_dim + (self.visual_dim if self.multimodal else 0)

    def layer_specs(self):
        cfg = self.config
        specs = []
        if self.mode == "multimodal_ft":
            specs.append(LayerSpec("GRU", self.visual_dim, self.visual_dim, activation="tanh/sigmoid"))
        specs += [
            LayerSpec("Conv1D", self.trunk_in, cfg.conv_channels, kernel=cfg.kernel),
            LayerSpec("Activation", cfg.conv_channels, cfg.conv_channels, activation="relu"),
            LayerSpec("GRU", cfg.conv_channels, cfg.hidden, activation="tanh/sigmoid"),
            LayerSpec("Linear", cfg.hidden, cfg.out_dim),
        ]
        return specs

    def copy(self):
        return ModelParameters(
            self.mode,
            self.config,
            self.visual_dim,
            self.visual_layers,
            {k: v.copy() for k, v in self.tensors.items()},
            {k: v.copy() for k, v in self.stats.items()},
            self.visual_norm,
            self.seed,
        )


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _gru_params(rng, prefix, n_in, n_hid):
    bound = 1.0 / np.sqrt(n_hid)
    return {
        f"{prefix}.Wx": rng.uniform(-bound, bound, size=(n_in, 3 * n_hid)),
        f"{prefix}.Wh": rng.uniform(-bound, bound, size=(n_hid, 3 * n_hid)),
        f"{prefix}.bx": np.zeros(3 * n_hid),
        f"{prefix}.bh": np.zeros(3 * n_hid),
    }


def build_model(mode="audio_only", visual_dim=0, visual_layers=1, config=ModelConfig(), seed=0):
    """Randomly initialised parameters for one of the three modes.

    Weights are Glorot/GRU-uniform from ``seed``; biases and fusion logits start at zero.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    if mode != "audio_only" and visual_dim <= 0:
        raise BadDim(f"mode {mode} needs visual_dim > 0, got {visual_dim}")
    if mode != "audio_only" and visual_layers < 1:
        raise BadDim("multimodal modes need at least one visual layer")
    if mode == "audio_only":
        visual_dim, visual_layers = 0, 0
    rng = np.random.default_rng(seed)
    cfg = config
    trunk_in = cfg.acoustic_dim + visual_dim
    tensors = {}
    if mode != "audio_only":
        tensors["fusion.logits"] = np.zeros(visual_layers)
    if mode == "multimodal_ft":
        tensors.update(_gru_params(rng, "ft", visual_dim, visual_dim))
    tensors["conv.W"] = _glorot(rng, (cfg.kernel, trunk_in, cfg.conv_channels), cfg.kernel * trunk_in, cfg.conv_channels)
    tensors["conv.b"] = np.zeros(cfg.conv_channels)
    tensors.update(_gru_params(rng, "gru", cfg.conv_channels, cfg.hidden))
    tensors["out.W"] = _glorot(rng, (cfg.hidden, cfg.out_dim), cfg.hidden, cfg.out_dim)
    tensors["out.b"] = np.zeros(cfg.out_dim)
    stats = {
        "in_mean": np.zeros(cfg.acoustic_dim),
        "in_std": np.ones(cfg.acoustic_dim),
        "out_mean": np.zeros(cfg.out_dim),
        "out_std": np.ones(cfg.out_dim),
    }
    return ModelParameters(mode, cfg, visual_dim, visual_layers, tensors, stats, None, seed)


def _as_batch(acoustic, visual):
    if isinstance(acoustic, FeatureMatrix):
        acoustic = acoustic.data
    if isinstance(visual, LayeredFeatureSet):
        visual = visual.layers
    acoustic = np.asarray(acoustic, dtype=np.float64)
    single = acoustic.ndim == 2
    if single:
        acoustic = acoustic[None]
        if visual is not None:
            visual = np.asarray(visual, dtype=np.float64)[None]
    return acoustic, visual, single


def _gru(params, prefix):
    t = params.tensors
    return t[f"{prefix}.Wx"], t[f"{prefix}.Wh"], t[f"{prefix}.bx"], t[f"{prefix}.bh"]


def forward(params, acoustic, visual=None, mask=None):
    """Predict target frames; returns ``(prediction, cache)``.

    ``acoustic`` is (T, 80) or (B, T, 80). ``visual`` is the normalized layer
    stack at the acoustic frame rate, (L, T, D) or (B, L, T, D). ``mask``
    (B, T) marks real frames of a zero-padded batch; the trunk input is zeroed
    at padded frames so the convolution sees the same padding as an unpadded
    sequence.
    """
    x, vis, single = _as_batch(acoustic, visual)
    cfg = params.config
    if x.ndim != 3 or x.shape[2] != cfg.acoustic_dim:
        raise ShapeError(f"acoustic input must have {cfg.acoustic_dim} dims, got shape {x.shape}")
    if params.multimodal and vis is None:
        raise ModeMismatch(f"mode {params.mode} requires visual features")
    if not params.multimodal and vis is not None:
        raise ModeMismatch("audio_only model given visual features")
    t = params.tensors
    st = params.stats
    cache = {"single": single}

    xa = (x - st["in_mean"]) / st["in_std"]
    if params.multimodal:
        vis = np.asarray(vis, dtype=np.float64)
        if vis.ndim != 4 or vis.shape[1] != params.visual_layers or vis.shape[3] != params.visual_dim:
            raise ShapeError(
                f"visual input must be (B, {params.visual_layers}, T, {params.visual_dim}), got {vis.shape}"
            )
        if vis.shape[0] != x.shape[0] or vis.shape[2] != x.shape[1]:
            raise ShapeError(f"visual frames {vis.shape[2]} do not match acoustic frames {x.shape[1]}")
        fused = weighted_sum(vis, t["fusion.logits"])
        cache["vis"] = vis
        if params.mode == "multimodal_ft":
            fused, cache["ft"] = L.gru_forward(fused, *_gru(params, "ft"))
        xa = np.concatenate([xa, fused], axis=2)
    if mask is not None:
        cache["mask"] = np.asarray(mask, dtype=np.float64).reshape(x.shape[:2])[..., None]
        xa = xa * cache["mask"]

    h, cache["conv"] = L.conv1d_forward(xa, t["conv.W"], t["conv.b"])
    h, cache["relu"] = L.relu_forward(h)
    h, cache["gru"] = L.gru_forward(h, *_gru(params, "gru"))
    y, cache["out"] = L.linear_forward(h, t["out.W"], t["out.b"])
    y = y * st["out_std"] + st["out_mean"]
    return (y[0] if single else y), cache


def backward(params, cache, grad_out):
    """Gradients of a scalar loss for every trainable tensor, given dLoss/dPrediction."""
    g = np.asarray(grad_out, dtype=np.float64)
    if cache["single"]:
        g = g[None]
    t = params.tensors
    grads = {}
    g = g * params.stats["out_std"]
    g, pg = L.linear_backward(cache["out"], t["out.W"], g)
    grads["out.W"], grads["out.b"] = pg["W"], pg["b"]
    g, pg = L.gru_backward(cache["gru"], g)
    for k, v in pg.items():
        grads[f"gru.{k}"] = v
    g = L.relu_backward(cache["relu"], g)
    g, pg = L.conv1d_backward(cache["conv"], g)
    grads["conv.W"], grads["conv.b"] = pg["W"], pg["b"]
    if "mask" in cache:
        g = g * cache["mask"]
    if params.multimodal:
        g_vis = g[:, :, params.config.acoustic_dim :]
        if params.mode == "multimodal_ft":
            g_vis, pg = L.gru_backward(cache["ft"], g_vis)
            for k, v in pg.items():
                grads[f"ft.{k}"] = v
        grads["fusion.logits"] = weighted_sum_backward(cache["vis"], t["fusion.logits"], g_vis)
    return {k: grads[k] for k in t}


def fusion_weights(params):
    return softmax(params.tensors["fusion.logits"]) if params.multimodal else None


def prepare_visual(params, visual):
    """Apply the model's persisted per-layer normalization to raw visual features."""
    if visual is None:
        return None
    if not isinstance(visual, LayeredFeatureSet):
        visual = LayeredFeatureSet(visual)
    if params.visual_norm is not None:
        visual = apply_norm_stats(visual, params.visual_norm)
    return visual.layers


def convert(params, acoustic, visual=None):
    """Convert one utterance of source LMS (plus raw visual features) to predicted LMS."""
    if params.multimodal and visual is None:
        raise ModeMismatch(f"mode {params.mode} requires visual features")
    if not params.multimodal and visual is not None:
        raise ModeMismatch("audio_only model given visual features")
    data = acoustic.data if isinstance(acoustic, FeatureMatrix) else np.asarray(acoustic, dtype=np.float64)
    shift = acoustic.frame_shift_s if isinstance(acoustic, FeatureMatrix) else 0.01
    pred, _ = forward(params, data, prepare_visual(params, visual))
    return FeatureMatrix(pred, frame_shift_s=shift, kind="LMS")
