"""Waveform-similarity overlap-add (WSOLA) time-scale modification."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from elvc.errors import InputTooShort
from elvc.io import Waveform

WINDOW_SUM_FLOOR = 1e-8


@dataclass(frozen=True)
class WsolaConfig:
    frame_len: int = 512
    synthesis_hop: int = 256
    tolerance: int = 256
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.synthesis_hop <= self.frame_len:
            raise ValueError("require 0 < synthesis_hop <= frame_len")
        if self.frame_len % 2:
            raise ValueError("frame_len must be even")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")


def _best_offset(x, template, nominal, tolerance, frame_len):
    """Analysis start in [nominal - tolerance, nominal + tolerance] most similar to ``template``.

    Similarity is normalized cross-correlation over the whole frame. Candidates
    are clamped to valid starts; ties go to the smallest |offset|, then to the
    negative offset.
    """
    last = len(x) - frame_len
    lo = max(0, nominal - tolerance)
    hi = min(last, nominal + tolerance)
    if hi <= lo:
        return min(max(nominal, 0), last)
    segment = x[lo : hi + frame_len]
    cands = sliding_window_view(segment, frame_len)
    dots = cands @ template
    sq = np.concatenate(([0.0], np.cumsum(segment * segment)))
    energies = sq[frame_len:] - sq[:-frame_len]
    t_norm = np.sqrt(np.dot(template, template))
    denom = np.sqrt(np.maximum(energies, 0.0)) * t_norm
    ncc = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    starts = np.arange(lo, hi + 1)
    offsets = starts - nominal
    best = ncc.max()
    tied = np.flatnonzero(ncc == best)
    # smallest |offset| first, then negative before positive
    key = np.abs(offsets[tied]) * 2 + (offsets[tied] > 0)
    return int(starts[tied[np.argmin(key)]])


def stretch(w, alpha, cfg=WsolaConfig()):
    """Change the duration of ``w`` by factor ``alpha`` without changing pitch.

    The output holds ``round(alpha * len(w))`` samples.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = w.samples
    n = cfg.frame_len
    hop = cfg.synthesis_hop
    if len(x) < n:
        raise InputTooShort(f"input has {len(x)} samples, need at least {n}")
    out_len = max(1, int(round(alpha * len(x))))
    n_frames = max(1, int(np.ceil(max(out_len - n, 0) / hop)) + 1)
    buf_len = (n_frames - 1) * hop + n
    win = get_window(cfg.window, n)
    out = np.zeros(buf_len)
    wsum = np.zeros(buf_len)
    last = len(x) - n

    pos = 0
    for k in range(n_frames):
        if k > 0:
            nominal = min(max(int(round(k * hop / alpha)), 0), last)
            if cfg.tolerance == 0:
                pos = nominal
            else:
                cont = min(pos + hop, last)
                pos = _best_offset(x, x[cont : cont + n], nominal, cfg.tolerance, n)
        s = k * hop
        out[s : s + n] += win * x[pos : pos + n]
        wsum[s : s + n] += win
    out /= np.maximum(wsum, WINDOW_SUM_FLOOR)
    return Waveform(out[:out_len], w.sample_rate)


def stretch_to_length(w, target_samples, cfg=WsolaConfig()):
    """Stretch ``w`` so that it holds exactly ``target_samples`` samples."""
    if target_samples < cfg.frame_len:
        raise InputTooShort(f"target length {target_samples} is below frame_len {cfg.frame_len}")
    if len(w) < cfg.frame_len:
        raise InputTooShort(f"input has {len(w)} samples, need at least {cfg.frame_len}")
    y = stretch(w, target_samples / len(w), cfg).samples
    if len(y) >= target_samples:
        y = y[:target_samples]
    else:
        y = np.concatenate([y, np.zeros(target_samples - len(y))])
    return Waveform(y, w.sample_rate)
