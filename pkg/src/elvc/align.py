"""Dynamic time warping and the three EL/NL alignment pipelines.

* DTW-MCC: DTW on mel-cepstra with MCD as the frame cost.
* DTW-lip: DTW on centroid-relative lip landmarks, expanded from video to
  acoustic frame rate.
* DTW-WSOLA: the NL waveform is first time-scaled to the EL length, then DTW-MCC.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from elvc.errors import EmptyInput, IndexOutOfBounds, ShapeError
from elvc.features import MCD_SCALE, MccConfig, MelConfig, StftConfig, log_mel_spectrogram, mcc_from_logmel
from elvc.io import FeatureMatrix
from elvc.visual import VIDEO_TO_AUDIO, center_landmarks
from elvc.wsola import WsolaConfig, stretch_to_length

log = logging.getLogger(__name__)

METHODS = ("dtw-mcc", "dtw-lip", "dtw-wsola")


@dataclass
class AlignmentPath:
    pairs: np.ndarray
    total_cost: float

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)

    def __len__(self):
        return len(self.pairs)

    @property
    def mean_cost(self):
        return self.total_cost / len(self.pairs)

    @property
    def source_len(self):
        return int(self.pairs[-1, 0]) + 1

    @property
    def target_len(self):
        return int(self.pairs[-1, 1]) + 1


def validate_path(pairs, n=None, m=None):
    """Return None if ``pairs`` is a valid monotonic path, else a reason string."""
    pairs = np.asarray(pairs).reshape(-1, 2)
    if len(pairs) == 0:
        return "empty path"
    if tuple(pairs[0]) != (0, 0):
        return f"starts at {tuple(pairs[0])}"
    if n is not None and tuple(pairs[-1]) != (n - 1, m - 1):
        return f"ends at {tuple(pairs[-1])}, expected {(n - 1, m - 1)}"
    steps = np.diff(pairs, axis=0)
    ok = {(1, 0), (0, 1), (1, 1)}
    for k, step in enumerate(map(tuple, steps)):
        if step not in ok:
            return f"illegal step {step} at index {k}"
    return None


def dtw(cost, band=None):
    """Minimum-cost monotonic path through ``cost`` with steps (1,0), (0,1), (1,1).

    ``band`` optionally restricts cells to a Sakoe-Chiba band of that half-width
    around the (slope-corrected) diagonal. Backtracking prefers the diagonal
    predecessor, then (1,0), then (0,1) on ties.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.size == 0:
        raise EmptyInput(f"cost matrix must be non-empty 2-D, got shape {c.shape}")
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise ValueError("cost entries must be finite and non-negative")
    n, m = c.shape
    if band is not None:
        slope = (m - 1) / (n - 1) if n > 1 else 0.0
        jj = np.arange(m)[None, :]
        ii = np.arange(n)[:, None]
        c = np.where(np.abs(jj - ii * slope) <= max(band, slope + 1), c, np.inf)

    acc = np.full((n, m), np.inf)
    acc[0] = np.cumsum(c[0])
    for i in range(1, n):
        prev = acc[i - 1]
        row = c[i]
        diag = np.concatenate(([np.inf], prev[:-1]))
        best = np.minimum(diag, prev) + row
        out = acc[i]
        run = best[0]
        out[0] = run
        for j in range(1, m):
            left = run + row[j]
            run = best[j] if best[j] <= left else left
            out[j] = run
    if not np.isfinite(acc[-1, -1]):
        raise ValueError("no admissible path within the band")

    i, j = n - 1, m - 1
    pairs = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            d, u, l = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if d <= u and d <= l:
                i, j = i - 1, j - 1
            elif u <= l:
                i -= 1
            else:
                j -= 1
        pairs.append((i, j))
    pairs = np.array(pairs[::-1], dtype=np.int64)
    total = float(np.sum(c[pairs[:, 0], pairs[:, 1]]))
    return AlignmentPath(pairs, total)


def cost_matrix_mcc(src, tgt):
    """Pairwise frame MCD (dB, c0 excluded) between two MCC sequences."""
    a = src.data if isinstance(src, FeatureMatrix) else np.asarray(src, dtype=np.float64)
    b = tgt.data if isinstance(tgt, FeatureMatrix) else np.asarray(tgt, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"MCC dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    return MCD_SCALE * cdist(a[:, 1:], b[:, 1:], metric="euclidean")


def cost_matrix_landmarks(src, tgt):
    """Euclidean distance between centroid-relative landmark sets."""
    if src.points.shape[1:] != tgt.points.shape[1:]:
        raise ShapeError("landmark sequences differ in points per frame")
    a = center_landmarks(src.points).reshape(len(src), -1)
    b = center_landmarks(tgt.points).reshape(len(tgt), -1)
    return cdist(a, b, metric="euclidean")


def expand_video_path(path, source_len=None, target_len=None, ratio=VIDEO_TO_AUDIO):
    """Map a video-rate path to acoustic frames, ``ratio`` acoustic frames per image.

    Diagonal video steps expand to the diagonal of the next ratio x ratio block.
    Vertical or horizontal video steps walk along the far edge of the new block
    so the result stays a valid monotonic path ending at the block corner.
    When acoustic lengths are given, pairs beyond them are dropped.
    """
    out = [(k, k) for k in range(ratio)]
    for (pi, pj), (i, j) in zip(path.pairs[:-1], path.pairs[1:]):
        di, dj = i - pi, j - pj
        for k in range(ratio):
            if di and dj:
                out.append((ratio * i + k, ratio * j + k))
            elif di:
                out.append((ratio * i + k, ratio * j + ratio - 1))
            else:
                out.append((ratio * i + ratio - 1, ratio * j + k))
    pairs = np.unique(np.array(out, dtype=np.int64), axis=0)
    n_full, m_full = pairs[-1] + 1
    if source_len is not None or target_len is not None:
        n = min(source_len or n_full, n_full)
        m = min(target_len or m_full, m_full)
        if (source_len, target_len) != (n_full, m_full):
            log.warning(
                "video implies %d x %d acoustic frames, audio has %s x %s; truncating to %d x %d",
                n_full, m_full, source_len, target_len, n, m,
            )
        pairs = pairs[(pairs[:, 0] < n) & (pairs[:, 1] < m)]
    return AlignmentPath(pairs, path.total_cost)


def apply_warp(path, tgt):
    """Target features resampled onto the source time axis.

    Row i of the result is the mean of every target row paired with source frame i.
    """
    data = tgt.data if isinstance(tgt, FeatureMatrix) else np.asarray(tgt, dtype=np.float64)
    pairs = path.pairs
    if pairs.min() < 0 or pairs[:, 1].max() >= data.shape[0]:
        raise IndexOutOfBounds(f"path references target frame {pairs[:, 1].max()} of {data.shape[0]}")
    n = int(pairs[:, 0].max()) + 1
    sums = np.zeros((n, data.shape[1]))
    np.add.at(sums, pairs[:, 0], data[pairs[:, 1]])
    counts = np.bincount(pairs[:, 0], minlength=n)
    if np.any(counts == 0):
        raise IndexOutOfBounds("path skips source frames")
    warped = sums / counts[:, None]
    if isinstance(tgt, FeatureMatrix):
        return FeatureMatrix(warped, frame_shift_s=tgt.frame_shift_s, kind=tgt.kind)
    return FeatureMatrix(warped)


def alignment_mcd(src, tgt, path):
    """Mean MCD (dB) between each source frame and its warped target frame.

    This scores the frame pairs an alignment hands to training, one term per
    source frame, unlike ``path.mean_cost`` which weights repeated frames.
    """
    warped = apply_warp(path, tgt).data
    a = src.data if isinstance(src, FeatureMatrix) else np.asarray(src, dtype=np.float64)
    diff = a[: len(warped), 1:] - warped[:, 1:]
    return float(MCD_SCALE * np.mean(np.sqrt(np.sum(diff * diff, axis=1))))


def _mcc(w, scfg, mcfg, ccfg):
    return mcc_from_logmel(log_mel_spectrogram(w, scfg, mcfg), ccfg)


def align_dtw_mcc(el, nl, scfg=StftConfig(), mcfg=MelConfig(), ccfg=MccConfig(), band=None):
    return dtw(cost_matrix_mcc(_mcc(el, scfg, mcfg, ccfg), _mcc(nl, scfg, mcfg, ccfg)), band=band)


def align_dtw_lip(el_lm, nl_lm, el_audio_frames=None, nl_audio_frames=None, band=None):
    video_path = dtw(cost_matrix_landmarks(el_lm, nl_lm), band=band)
    return expand_video_path(video_path, el_audio_frames, nl_audio_frames)


def align_dtw_wsola(el, nl, scfg=StftConfig(), mcfg=MelConfig(), ccfg=MccConfig(), wcfg=WsolaConfig(), band=None):
    """Stretch ``nl`` to the length of ``el``, then align with DTW-MCC."""
    stretched = stretch_to_length(nl, len(el), wcfg)
    return stretched, align_dtw_mcc(el, stretched, scfg, mcfg, ccfg, band=band)
