import struct
import wave

import numpy as np
import pytest

from elvc.errors import BadMagic, BadSampleRate, ParseError, ShapeError, TruncatedFile, UnsupportedFormat
from elvc.io import (
    FeatureMatrix,
    LayeredFeatureSet,
    Waveform,
    quantize,
    read_feature_file,
    read_landmarks,
    read_wav,
    write_feature_file,
    write_wav,
)


def _write_raw_wav(path, ints, sr=16000, channels=1, width=2):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(sr)
        w.writeframes(np.asarray(ints, dtype="<i2" if width == 2 else "u1").tobytes())


def test_read_zero_signal(tmp_path):
    _write_raw_wav(tmp_path / "z.wav", np.zeros(16000))
    w = read_wav(tmp_path / "z.wav")
    assert len(w) == 16000 and w.sample_rate == 16000
    assert np.all(w.samples == 0.0)


def test_read_scaling(tmp_path):
    _write_raw_wav(tmp_path / "h.wav", [16384, -32768, 0])
    assert read_wav(tmp_path / "h.wav").samples.tolist() == [0.5, -1.0, 0.0]


def test_read_rejects_other_rates(tmp_path):
    _write_raw_wav(tmp_path / "cd.wav", np.zeros(100), sr=44100)
    with pytest.raises(BadSampleRate):
        read_wav(tmp_path / "cd.wav")


def test_read_rejects_stereo_and_8bit(tmp_path):
    _write_raw_wav(tmp_path / "st.wav", np.zeros(200), channels=2)
    with pytest.raises(UnsupportedFormat):
        read_wav(tmp_path / "st.wav")
    _write_raw_wav(tmp_path / "b8.wav", np.zeros(100, dtype=np.uint8), width=1)
    with pytest.raises(UnsupportedFormat):
        read_wav(tmp_path / "b8.wav")


def test_read_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "nope.wav")


def test_quantize_rules():
    assert quantize([0.5, 2.0, -2.0, 1.0]).tolist() == [16384, 32767, -32768, 32767]


def test_wav_round_trip(tmp_path, rng):
    w = Waveform(rng.uniform(-1, 1, 5000))
    write_wav(w, tmp_path / "r.wav")
    back = read_wav(tmp_path / "r.wav")
    assert np.max(np.abs(back.samples - w.samples)) <= 2.0**-15


def test_landmarks_shape_and_order(tmp_path):
    row = ",".join(str(v) for v in range(1, 41))
    (tmp_path / "lm.csv").write_text("\n".join([row] * 3) + "\n")
    seq = read_landmarks(tmp_path / "lm.csv")
    assert seq.points.shape == (3, 20, 2)
    assert seq.points[0, 0].tolist() == [1.0, 2.0]
    assert seq.points[0, 19].tolist() == [39.0, 40.0]


@pytest.mark.parametrize("row", [",".join(["1"] * 38), ",".join(["1"] * 39 + ["x"])])
def test_landmarks_parse_errors(tmp_path, row):
    (tmp_path / "bad.csv").write_text(row + "\n")
    with pytest.raises(ParseError):
        read_landmarks(tmp_path / "bad.csv")


def test_feature_file_size(tmp_path):
    write_feature_file(np.arange(6.0).reshape(1, 2, 3), tmp_path / "f.elf1")
    blob = (tmp_path / "f.elf1").read_bytes()
    assert len(blob) == 4 + 12 + 48
    assert blob[:4] == b"ELF1"
    assert struct.unpack("<III", blob[4:16]) == (1, 2, 3)
    assert np.frombuffer(blob[16:], "<f8").tolist() == [0, 1, 2, 3, 4, 5]


def test_feature_file_round_trip_bit_exact(tmp_path, rng):
    fs = LayeredFeatureSet(rng.standard_normal((3, 7, 5)) * 1e3)
    write_feature_file(fs, tmp_path / "f.elf1")
    back = read_feature_file(tmp_path / "f.elf1")
    assert back.layers.tobytes() == fs.layers.tobytes()


def test_feature_file_errors(tmp_path):
    (tmp_path / "m.elf1").write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(BadMagic):
        read_feature_file(tmp_path / "m.elf1")
    write_feature_file(np.zeros((1, 2, 3)), tmp_path / "t.elf1")
    blob = (tmp_path / "t.elf1").read_bytes()
    (tmp_path / "t.elf1").write_bytes(blob[:-8])
    with pytest.raises(TruncatedFile):
        read_feature_file(tmp_path / "t.elf1")
    (tmp_path / "h.elf1").write_bytes(b"ELF1\x01")
    with pytest.raises(TruncatedFile):
        read_feature_file(tmp_path / "h.elf1")


def test_layered_set_rejects_mismatched_layers():
    with pytest.raises(ShapeError):
        LayeredFeatureSet([np.zeros((3, 2)), np.zeros((4, 2))])


def test_feature_matrix_invariants():
    with pytest.raises(ShapeError):
        FeatureMatrix(np.zeros((3, 40)), kind="LMS")
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[np.nan]]))
