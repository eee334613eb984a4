"""Framing, log-mel spectrogram, DCT-based mel cepstrum and frame-level MCD."""

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, idct, rfft
from scipy.signal import get_window

from elvc.errors import ShapeError
from elvc.io import FeatureMatrix

MCD_SCALE = 10.0 / np.log(10.0) * np.sqrt(2.0)


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 512
    hop: int = 160
    fft_size: int = 512
    window: str = "hann"

    def __post_init__(self):
        if min(self.window_len, self.hop, self.fft_size) <= 0:
            raise ValueError("STFT sizes must be positive")
        if not self.hop <= self.window_len <= self.fft_size:
            raise ValueError("require hop <= window_len <= fft_size")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 80
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if not 0 <= self.f_min < self.f_max:
            raise ValueError("require 0 <= f_min < f_max")
        if self.n_mels < 2:
            raise ValueError("n_mels must be at least 2")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")


@dataclass(frozen=True)
class MccConfig:
    order: int = 25

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("MCC order must be at least 2")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(mcfg):
    """The n_mels + 2 band edge frequencies; entries 1..n_mels are filter centres."""
    return mel_to_hz(np.linspace(hz_to_mel(mcfg.f_min), hz_to_mel(mcfg.f_max), mcfg.n_mels + 2))


def mel_filterbank(sample_rate, fft_size, mcfg):
    """Triangular filters with unit peak, shape (n_mels, fft_size // 2 + 1)."""
    if mcfg.f_max > sample_rate / 2:
        raise ValueError(f"f_max {mcfg.f_max} exceeds Nyquist {sample_rate / 2}")
    edges = mel_band_edges(mcfg)
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_signal(w, cfg=StftConfig()):
    """Split a waveform into overlapping frames of ``cfg.window_len`` samples.

    Signals shorter than one window yield a single right-zero-padded frame.
    Trailing samples that do not fill a whole frame are dropped.
    """
    x = w.samples
    if len(x) < 1:
        raise ValueError("cannot frame an empty waveform")
    if len(x) < cfg.window_len:
        frame = np.zeros(cfg.window_len)
        frame[: len(x)] = x
        return frame[None, :]
    n_frames = 1 + (len(x) - cfg.window_len) // cfg.hop
    idx = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.window_len)[None, :]
    return x[idx]


def magnitude_spectrogram(w, cfg=StftConfig()):
    frames = frame_signal(w, cfg) * get_window(cfg.window, cfg.window_len)
    return np.abs(rfft(frames, n=cfg.fft_size, axis=1))


def log_mel_spectrogram(w, scfg=StftConfig(), mcfg=MelConfig()):
    mag = magnitude_spectrogram(w, scfg)
    fb = mel_filterbank(w.sample_rate, scfg.fft_size, mcfg)
    energy = mag @ fb.T
    lms = np.log(np.maximum(energy, mcfg.log_floor))
    return FeatureMatrix(lms, frame_shift_s=scfg.hop / w.sample_rate, kind="LMS")


def mcc_from_logmel(lms, cfg=MccConfig()):
    """Mel cepstrum as the orthonormal DCT-II of each log-mel frame, truncated."""
    if lms.kind != "LMS":
        raise ShapeError(f"expected LMS features, got {lms.kind}")
    if lms.dim != 80:
        raise ShapeError(f"expected 80 mel bins, got {lms.dim}")
    if cfg.order > lms.dim:
        raise ValueError(f"MCC order {cfg.order} exceeds {lms.dim} mel bins")
    cep = dct(lms.data, type=2, norm="ortho", axis=1)[:, : cfg.order]
    return FeatureMatrix(cep, frame_shift_s=lms.frame_shift_s, kind="MCC")


def logmel_from_mcc(cep, n_mels=80):
    """Inverse of :func:`mcc_from_logmel` with missing high coefficients set to zero."""
    full = np.zeros((cep.shape[0], n_mels))
    full[:, : cep.shape[1]] = cep
    return idct(full, type=2, norm="ortho", axis=1)


def frame_mcd(a, b):
    """Mel-cepstral distortion in dB between two frames, ignoring c0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"frames must be 1-D with equal length, got {a.shape} and {b.shape}")
    diff = a[1:] - b[1:]
    return float(MCD_SCALE * np.sqrt(np.dot(diff, diff)))
