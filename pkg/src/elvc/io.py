"""Readers and writers for WAV audio, lip landmark CSVs and ELF1 feature files.

ELF1 layout (little-endian)::

    b"ELF1" | u32 L | u32 T | u32 D | L*T*D float64, layer-major, row-major
"""

import os
import struct
import wave
from dataclasses import dataclass, field

import numpy as np

from elvc.errors import (
    BadMagic,
    BadSampleRate,
    ParseError,
    ShapeError,
    TruncatedFile,
    UnsupportedFormat,
)

SAMPLE_RATE = 16000
N_LIP_POINTS = 20
FEATURE_KINDS = ("LMS", "MCC", "VISUAL", "OTHER")

_MAGIC = b"ELF1"
_HEADER = struct.Struct("<4sIII")


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if self.sample_rate <= 0:
            raise BadSampleRate(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return len(self.samples)


@dataclass
class FeatureMatrix:
    """A T x D feature sequence with its frame shift and kind tag."""

    data: np.ndarray
    frame_shift_s: float = 0.01
    kind: str = "OTHER"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ShapeError(f"feature matrix must be T x D with T, D >= 1, got {self.data.shape}")
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == "LMS" and self.data.shape[1] != 80:
            raise ShapeError(f"LMS features must have 80 bins, got {self.data.shape[1]}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature matrix contains non-finite entries")

    @property
    def n_frames(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]


@dataclass
class LayeredFeatureSet:
    """Per-layer outputs of one feature extractor, stored as an (L, T, D) array."""

    layers: np.ndarray
    extractor_name: str = field(default="external")

    def __post_init__(self):
        layers = self.layers
        if isinstance(layers, (list, tuple)):
            shapes = {np.shape(x) for x in layers}
            if len(shapes) > 1:
                raise ShapeError(f"layers disagree in shape: {sorted(shapes)}")
            layers = np.stack([np.asarray(x, dtype=np.float64) for x in layers]) if layers else np.empty((0, 0, 0))
        layers = np.asarray(layers, dtype=np.float64)
        if layers.ndim == 2:
            layers = layers[None]
        if layers.ndim != 3 or min(layers.shape) < 1:
            raise ShapeError(f"layered features must be L x T x D with all sizes >= 1, got {layers.shape}")
        self.layers = layers

    @property
    def n_layers(self):
        return self.layers.shape[0]

    @property
    def n_frames(self):
        return self.layers.shape[1]

    @property
    def dim(self):
        return self.layers.shape[2]

    def layer(self, index, kind="VISUAL", frame_shift_s=0.04):
        return FeatureMatrix(self.layers[index], frame_shift_s=frame_shift_s, kind=kind)


@dataclass
class LandmarkSequence:
    """Lip landmarks, an array of shape (T_v, 20, 2) in pixel units."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 3 or self.points.shape[1:] != (N_LIP_POINTS, 2):
            raise ShapeError(f"landmarks must have shape (T, {N_LIP_POINTS}, 2), got {self.points.shape}")

    def __len__(self):
        return self.points.shape[0]


def read_wav(path):
    """Load a 16 kHz mono PCM16 WAV file as a float waveform in [-1, 1)."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with wave.open(path, "rb") as wav:
            n_channels = wav.getnchannels()
            sample_width = wav.getsampwidth()
            sample_rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    if n_channels != 1:
        raise UnsupportedFormat(f"{path}: expected mono audio, found {n_channels} channels")
    if sample_width != 2:
        raise UnsupportedFormat(f"{path}: expected 16-bit PCM, found {8 * sample_width}-bit")
    if sample_rate != SAMPLE_RATE:
        raise BadSampleRate(f"{path}: expected {SAMPLE_RATE} Hz, found {sample_rate} Hz")
    ints = np.frombuffer(raw, dtype="<i2")
    return Waveform(ints.astype(np.float64) / 32768.0, sample_rate)


def quantize(samples):
    """Map float samples to PCM16 integers: clip to [-1, 1 - 2**-15], scale, round."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0 - 2.0**-15)
    return np.round(clipped * 32768.0).astype("<i2")


def write_wav(w, path):
    if not np.all(np.isfinite(w.samples)):
        raise ValueError("cannot write non-finite samples")
    with wave.open(os.fspath(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(w.sample_rate)
        wav.writeframes(quantize(w.samples).tobytes())


def read_landmarks(path):
    """Read a landmark CSV: one row per video frame, x1,y1,...,x20,y20."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != 2 * N_LIP_POINTS:
                raise ParseError(f"{path}:{lineno}: expected {2 * N_LIP_POINTS} columns, found {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no landmark rows")
    data = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise ParseError(f"{path}: non-finite landmark coordinates")
    return LandmarkSequence(data.reshape(len(rows), N_LIP_POINTS, 2))


def write_landmarks(seq, path):
    flat = seq.points.reshape(len(seq), -1)
    with open(path, "w") as fh:
        for row in flat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_feature_file(features, path):
    """Write a LayeredFeatureSet, FeatureMatrix or raw 2-D/3-D array as ELF1."""
    if isinstance(features, LayeredFeatureSet):
        arr = features.layers
    elif isinstance(features, FeatureMatrix):
        arr = features.data[None]
    else:
        arr = np.asarray(features, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"ELF1 payload must be 3-D, got shape {arr.shape}")
    n_layers, n_frames, dim = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n_layers, n_frames, dim))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_feature_array(path):
    """Read an ELF1 file as a float64 array of shape (L, T, D)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != _MAGIC:
        raise BadMagic(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < _HEADER.size:
        raise TruncatedFile(f"{path}: header truncated")
    _, n_layers, n_frames, dim = _HEADER.unpack_from(blob)
    expected = _HEADER.size + 8 * n_layers * n_frames * dim
    if len(blob) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, found {len(blob)}")
    if len(blob) > expected:
        raise ParseError(f"{path}: {len(blob) - expected} trailing bytes")
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size, count=n_layers * n_frames * dim)
    return values.astype(np.float64).reshape(n_layers, n_frames, dim)


def read_feature_file(path, extractor_name=None):
    arr = read_feature_array(path)
    name = extractor_name or os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return LayeredFeatureSet(arr, extractor_name=name)


def read_feature_matrix(path, kind="OTHER", frame_shift_s=0.01):
    """Read a single-layer ELF1 file as a FeatureMatrix."""
    arr = read_feature_array(path)
    if arr.shape[0] != 1:
        raise ShapeError(f"{path}: expected one layer, found {arr.shape[0]}")
    return FeatureMatrix(arr[0], frame_shift_s=frame_shift_s, kind=kind)
