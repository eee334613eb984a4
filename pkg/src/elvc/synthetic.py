"""Synthetic stand-ins for paired EL/NL recordings and lip landmarks.

Pseudo-NL speech is a chain of band-limited harmonic "syllables" with gliding
pitch. Pseudo-EL speech is the same utterance slowed down by WSOLA, overlaid
with a constant-pitch buzz, and mixed with white noise at a fixed SNR.
"""

import os

import numpy as np

from elvc.io import SAMPLE_RATE, N_LIP_POINTS, LandmarkSequence, Waveform
from elvc.wsola import WsolaConfig, stretch

MAX_FREQ = 4000.0


def multitone_utterance(rng, n_syllables=8, sample_rate=SAMPLE_RATE):
    """Return (waveform, per-sample amplitude envelope)."""
    pieces, envs = [], []
    for _ in range(n_syllables):
        dur = int(rng.uniform(0.08, 0.22) * sample_rate)
        gap = int(rng.uniform(0.01, 0.06) * sample_rate)
        t = np.arange(dur) / sample_rate
        f0 = rng.uniform(100.0, 220.0) * (1.0 + rng.uniform(-0.2, 0.2) * t / t[-1])
        phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate
        # syllable "formant": emphasise harmonics near a random centre
        centre = rng.uniform(300.0, 2500.0)
        sig = np.zeros(dur)
        for h in range(1, 40):
            if h * f0.max() >= MAX_FREQ:
                break
            gain = np.exp(-0.5 * ((h * f0.mean() - centre) / 400.0) ** 2) + 0.05 / h
            sig += gain * np.sin(h * phase)
        env = np.hanning(dur)
        pieces += [sig * env, np.zeros(gap)]
        envs += [env, np.zeros(gap)]
    x = np.concatenate(pieces)
    x *= 0.5 / np.abs(x).max()
    return Waveform(x, sample_rate), np.concatenate(envs)


def add_noise(x, rng, snr_db):
    power = np.mean(x * x)
    noise = rng.standard_normal(len(x)) * np.sqrt(power / 10.0 ** (snr_db / 10.0))
    return x + noise


def constant_buzz(n, sample_rate=SAMPLE_RATE, f0=100.0):
    """Flat-pitch sawtooth, the kind of excitation an electrolarynx produces."""
    t = np.arange(n) / sample_rate
    return 2.0 * ((t * f0) % 1.0) - 1.0


def pseudo_el(nl, rng, alpha=1.3, snr_db=10.0, buzz_level=0.3, buzz_f0=100.0, wsola_cfg=WsolaConfig()):
    """Slow ``nl`` down by ``alpha`` and add constant-excitation buzz plus noise."""
    slow = stretch(nl, alpha, wsola_cfg).samples
    rms = np.sqrt(np.mean(slow * slow))
    distorted = slow + buzz_level * rms * constant_buzz(len(slow), nl.sample_rate, buzz_f0)
    noisy = add_noise(distorted, rng, snr_db)
    noisy *= 0.9 / max(np.abs(noisy).max(), 1e-12)
    return Waveform(noisy, nl.sample_rate)


def synthetic_pair(seed, alpha=1.3, snr_db=10.0, n_syllables=8, nl_floor_db=40.0):
    """Return (pseudo-EL, pseudo-NL, NL envelope) for one seed.

    The NL utterance carries a recording-noise floor ``nl_floor_db`` below its
    power; digital silence would pin its log-mel frames to the log floor.
    """
    rng = np.random.default_rng(seed)
    nl, env = multitone_utterance(rng, n_syllables)
    if nl_floor_db is not None:
        nl = Waveform(add_noise(nl.samples, rng, nl_floor_db), nl.sample_rate)
    return pseudo_el(nl, rng, alpha, snr_db), nl, env


def envelope_landmarks(envelope, rng, sample_rate=SAMPLE_RATE, fps=25, jitter=0.2, offset=(0.0, 0.0)):
    """Lip landmarks whose mouth opening follows an amplitude envelope.

    Points sit on an ellipse of width 40 px whose height grows with the
    envelope, sampled at ``fps`` frames per second.
    """
    hop = sample_rate // fps
    n_frames = max(1, len(envelope) // hop)
    angles = np.linspace(0.0, 2.0 * np.pi, N_LIP_POINTS, endpoint=False)
    frames = np.empty((n_frames, N_LIP_POINTS, 2))
    for i in range(n_frames):
        opening = 4.0 + 20.0 * float(envelope[i * hop : (i + 1) * hop].mean())
        frames[i, :, 0] = 20.0 * np.cos(angles)
        frames[i, :, 1] = opening * np.sin(angles)
    frames += rng.standard_normal(frames.shape) * jitter
    frames += np.asarray(offset)
    return LandmarkSequence(frames)


def write_synthetic_corpus(out_dir, n_utts=3, seed=0, n_syllables=3, alpha=1.3, snr_db=10.0):
    """Write pseudo EL/NL WAVs, lip landmark CSVs and a ``list.csv`` under ``out_dir``.

    Returns the path of the list file, in the format ``elvc prepare`` reads.
    """
    from elvc.io import write_landmarks, write_wav

    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    rows = ["utt_id,el_wav,nl_wav,el_landmarks,nl_landmarks"]
    for k in range(n_utts):
        el, nl, env = synthetic_pair(seed + k, alpha, snr_db, n_syllables)
        rng = np.random.default_rng(10_000 + seed + k)
        # the EL mouth follows the slowed-down envelope
        env_el = np.interp(np.linspace(0, len(env) - 1, len(el)), np.arange(len(env)), env)
        utt = f"utt{k:03d}"
        paths = [os.path.join(out_dir, f"{utt}_{part}") for part in ("el.wav", "nl.wav", "el.csv", "nl.csv")]
        write_wav(el, paths[0])
        write_wav(nl, paths[1])
        write_landmarks(envelope_landmarks(env_el, rng), paths[2])
        write_landmarks(envelope_landmarks(env, rng), paths[3])
        rows.append(",".join([utt] + paths))
    list_path = os.path.join(out_dir, "list.csv")
    with open(list_path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    return list_path
