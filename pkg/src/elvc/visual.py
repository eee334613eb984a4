"""Lip-feature preparation and learnable weighted-sum fusion of extractor layers."""

from dataclasses import dataclass

import numpy as np

from elvc.errors import ShapeError
from elvc.io import FeatureMatrix, LayeredFeatureSet, read_feature_array, write_feature_file

VIDEO_TO_AUDIO = 4
STD_FLOOR = 1e-6


def center_landmarks(points):
    """Translate each frame of lip points so their centroid sits at the origin.

    Accepts a single (P, 2) frame or a (T, P, 2) sequence.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim not in (2, 3) or pts.shape[-1] != 2:
        raise ShapeError(f"expected (..., P, 2) landmark array, got {pts.shape}")
    return pts - pts.mean(axis=-2, keepdims=True)


def landmark_features(seq):
    """Built-in visual extractor: flattened centred landmarks, one layer of T_v x 40."""
    flat = center_landmarks(seq.points).reshape(len(seq), -1)
    return LayeredFeatureSet(flat[None], extractor_name="landmarks")


def upsample_to_audio(vis, audio_frames, ratio=VIDEO_TO_AUDIO):
    """Repeat each video-rate row ``ratio`` times, then pad or truncate to ``audio_frames``.

    Works on a FeatureMatrix, a LayeredFeatureSet (time is axis 1) or an array
    whose second-to-last axis is time.
    """
    if isinstance(vis, LayeredFeatureSet):
        return LayeredFeatureSet(_repeat_rows(vis.layers, audio_frames, ratio), vis.extractor_name)
    if isinstance(vis, FeatureMatrix):
        return FeatureMatrix(_repeat_rows(vis.data, audio_frames, ratio), vis.frame_shift_s / ratio, vis.kind)
    return _repeat_rows(np.asarray(vis, dtype=np.float64), audio_frames, ratio)


def _repeat_rows(arr, audio_frames, ratio):
    if audio_frames < 1:
        raise ValueError("audio_frames must be positive")
    up = np.repeat(arr, ratio, axis=-2)
    n = up.shape[-2]
    if n >= audio_frames:
        return up[..., :audio_frames, :]
    fill = np.repeat(up[..., -1:, :], audio_frames - n, axis=-2)
    return np.concatenate([up, fill], axis=-2)


@dataclass
class NormStats:
    """Per-layer, per-dimension mean and standard deviation, each (L, D)."""

    mean: np.ndarray
    std: np.ndarray

    def save(self, path):
        write_feature_file(np.stack([self.mean, self.std], axis=1), path)

    @classmethod
    def load(cls, path):
        arr = read_feature_array(path)
        if arr.shape[1] != 2:
            raise ShapeError(f"{path}: normalization stats need 2 rows per layer, found {arr.shape[1]}")
        return cls(arr[:, 0, :].copy(), arr[:, 1, :].copy())


def fit_norm_stats(sets):
    """Two-pass mean and std over every frame of every set in the training corpus."""
    sets = list(sets)
    if not sets:
        raise ValueError("cannot fit normalization stats on an empty corpus")
    shape = sets[0].layers.shape[0::2]
    for s in sets:
        if s.layers.shape[0::2] != shape:
            raise ShapeError(f"layer/dim mismatch: {s.layers.shape[0::2]} vs {shape}")
    allframes = np.concatenate([s.layers for s in sets], axis=1)
    mean = allframes.mean(axis=1)
    var = ((allframes - mean[:, None, :]) ** 2).mean(axis=1)
    return NormStats(mean, np.maximum(np.sqrt(var), STD_FLOOR))


def apply_norm_stats(features, stats):
    if features.layers.shape[0::2] != stats.mean.shape:
        raise ShapeError(f"stats shape {stats.mean.shape} does not match features {features.layers.shape[0::2]}")
    normed = (features.layers - stats.mean[:, None, :]) / stats.std[:, None, :]
    return LayeredFeatureSet(normed, features.extractor_name)


def normalize_layers(features, stats=None):
    """Z-score each layer per dimension; fits stats on ``features`` when none are given.

    ``features`` may be a single LayeredFeatureSet or a list forming the corpus.
    Returns ``(normalized, stats)``.
    """
    if isinstance(features, LayeredFeatureSet):
        if stats is None:
            stats = fit_norm_stats([features])
        return apply_norm_stats(features, stats), stats
    features = list(features)
    if stats is None:
        stats = fit_norm_stats(features)
    return [apply_norm_stats(f, stats) for f in features], stats


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass
class FusionWeights:
    logits: np.ndarray

    @classmethod
    def uniform(cls, n_layers):
        return cls(np.zeros(n_layers))

    @property
    def weights(self):
        return softmax(self.logits)


def weighted_sum(layers, logits):
    """Convex combination of layers with softmax(logits) weights.

    ``layers`` has layer axis -3 (``(L, T, D)`` or batched ``(B, L, T, D)``).
    """
    arr = layers.layers if isinstance(layers, LayeredFeatureSet) else np.asarray(layers, dtype=np.float64)
    logits = logits.logits if isinstance(logits, FusionWeights) else np.asarray(logits, dtype=np.float64)
    if arr.shape[-3] != len(logits):
        raise ShapeError(f"{arr.shape[-3]} layers but {len(logits)} fusion logits")
    w = softmax(logits)
    return np.tensordot(w, arr, axes=([0], [arr.ndim - 3])) if arr.ndim == 3 else np.einsum("l,bltd->btd", w, arr)


def weighted_sum_backward(layers, logits, grad_out):
    """Gradient of a scalar loss with respect to the fusion logits."""
    arr = layers.layers if isinstance(layers, LayeredFeatureSet) else np.asarray(layers, dtype=np.float64)
    w = softmax(logits)
    if arr.ndim == 3:
        gw = np.einsum("ltd,td->l", arr, grad_out)
    else:
        gw = np.einsum("bltd,btd->l", arr, grad_out)
    return w * (gw - np.dot(w, gw))
