"""Deterministic speech-like sources and stationary noises for desk-scale corpora."""

from __future__ import annotations

import numpy as np

from .audio import SAMPLE_RATE, AudioBuffer


def speech_like(duration_s: float, f0: float, seed: int, *, tail_s: float = 0.0, lead_s: float = 0.0,
                sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    """Harmonic tone with slow pitch drift and a syllable-rate envelope, framed by silence.

    The envelope never drops below ~0.35 of its peak, so an energy VAD sees one
    continuous active region of ``duration_s`` seconds.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    drift = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(0.3, 0.8) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * f0 * np.cumsum(drift) / sample_rate
    x = np.zeros(n)
    for k in range(1, int(3800 // f0) + 1):
        x += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    rate = rng.uniform(3.0, 5.0)
    env = 0.675 + 0.325 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
    ramp = min(n // 2, int(0.01 * sample_rate))
    if ramp:
        fade = np.linspace(0.0, 1.0, ramp, endpoint=False)
        env[:ramp] *= fade
        env[n - ramp:] *= fade[::-1]
    x *= env
    x *= 0.3 / np.max(np.abs(x))
    lead = np.zeros(int(round(lead_s * sample_rate)))
    tail = np.zeros(int(round(tail_s * sample_rate)))
    return AudioBuffer(np.concatenate([lead, x, tail]), sample_rate)


def white_noise(duration_s: float, seed: int, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    rng = np.random.default_rng(seed)
    return AudioBuffer(0.1 * rng.standard_normal(int(round(duration_s * sample_rate))), sample_rate)


def colored_noise(duration_s: float, seed: int, exponent: float = 1.0, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    """Stationary Gaussian noise with a ``1 / f**exponent`` power spectrum (1.0 = pink)."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    f[0] = f[1] if n > 1 else 1.0
    x = np.fft.irfft(spec / f ** (exponent / 2.0), n)
    return AudioBuffer(0.1 * x / np.std(x), sample_rate)
