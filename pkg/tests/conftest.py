import sys

import numpy as np
import pytest

from elvc.io import SAMPLE_RATE, Waveform


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sine(freq, n=16000, amp=0.8, sr=SAMPLE_RATE):
    t = np.arange(n) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t), sr)


def dominant_bin(x, n_fft=4096):
    seg = x[:n_fft]
    return int(np.argmax(np.abs(np.fft.rfft(seg * np.hanning(len(seg)), n_fft))))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
