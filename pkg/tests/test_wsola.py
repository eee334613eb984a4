import numpy as np
import pytest

from conftest import dominant_bin, sine
from elvc.errors import InputTooShort
from elvc.io import Waveform
from elvc.wsola import WsolaConfig, stretch, stretch_to_length

EXACT = WsolaConfig(tolerance=0)


def test_unit_rate_reproduces_interior(rng):
    w = Waveform(rng.uniform(-1, 1, 16000))
    out = stretch(w, 1.0, EXACT).samples
    assert len(out) == len(w)
    assert np.max(np.abs(out[512:-512] - w.samples[512:-512])) <= 1e-6


@pytest.mark.parametrize("alpha", [0.5, 0.75, 1.0, 1.3, 1.5, 2.0])
def test_length_contract(alpha, rng):
    w = Waveform(rng.uniform(-1, 1, 16000))
    out = stretch(w, alpha)
    assert abs(len(out) - alpha * len(w)) <= 256


@pytest.mark.parametrize("alpha", [0.5, 1.5, 2.0])
@pytest.mark.parametrize("freq", [110.0, 440.0, 1000.0])
def test_pitch_preserved(alpha, freq):
    out = stretch(sine(freq), alpha).samples
    expected = freq / 16000 * 4096
    assert abs(dominant_bin(out[512:]) - expected) <= 1.0


def test_amplitude_bounded(rng):
    w = Waveform(rng.uniform(-0.7, 0.7, 12000))
    for alpha in (0.5, 1.3, 2.0):
        assert np.max(np.abs(stretch(w, alpha).samples)) <= 0.7 * 1.1


def test_zero_tolerance_is_plain_ola(rng):
    w = Waveform(rng.uniform(-1, 1, 6000))
    a = stretch(w, 1.7, EXACT).samples
    b = stretch(w, 1.7, EXACT).samples
    assert a.tobytes() == b.tobytes()
    # reference OLA built independently: nominal positions only
    hop, n = 256, 512
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    out_len = round(1.7 * 6000)
    frames = int(np.ceil((out_len - n) / hop)) + 1
    acc = np.zeros((frames - 1) * hop + n)
    ws = np.zeros_like(acc)
    for k in range(frames):
        p = min(int(round(k * hop / 1.7)), 6000 - n)
        acc[k * hop : k * hop + n] += win * w.samples[p : p + n]
        ws[k * hop : k * hop + n] += win
    ref = (acc / np.maximum(ws, 1e-8))[:out_len]
    assert np.allclose(a, ref, atol=1e-12)


def test_stretch_to_length_exact():
    w = sine(300.0)
    out = stretch_to_length(w, 20800)
    assert len(out) == 20800
    same = stretch_to_length(w, 16000, EXACT)
    assert len(same) == 16000
    assert np.max(np.abs(same.samples[512:-512] - w.samples[512:-512])) <= 1e-6


@pytest.mark.parametrize("ratio", [0.5, 0.8, 1.3, 2.0])
def test_stretch_to_length_keeps_frequency(ratio):
    out = stretch_to_length(sine(440.0), int(16000 * ratio)).samples
    assert abs(dominant_bin(out[512:]) - 440 / 16000 * 4096) <= 1.0


def test_short_input_rejected():
    with pytest.raises(InputTooShort):
        stretch(Waveform(np.zeros(100)), 1.2)
    with pytest.raises(InputTooShort):
        stretch_to_length(sine(200.0), 100)
    with pytest.raises(ValueError):
        stretch(sine(200.0), 0.0)
