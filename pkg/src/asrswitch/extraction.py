"""Speaker-clue driven extraction ``SE(Y, C)``.

Two back-ends are provided:

* ``ORACLE`` returns the known clean stem plus seeded white noise at a fixed
  artifact-to-signal ratio, so artifact severity is an experimental knob.
* ``SPECTRAL_GATE`` is a non-oracle heuristic: per STFT band and frame, the
  mixture's log-magnitude profile is correlated with the enrollment's long-term
  signature and with a "non-clue" signature (mixture average with the clue's
  spectral shape divided out); bands that look more like the latter are
  attenuated by ``gate_threshold_db``.

Other extractors (e.g. a model with a noise-prediction head that needs no
interferer clue) plug in through :data:`EXTRACTORS`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Mapping

import numpy as np
from scipy import signal

from .audio import POWER_FLOOR, AudioBuffer, fit_length, power, require_rate
from .errors import DomainError


class ExtractorKind(str, Enum):
    ORACLE = "oracle"
    SPECTRAL_GATE = "spectral_gate"


class ClueRole(str, Enum):
    TARGET = "target"
    INTERFERER = "interferer"


@dataclass(frozen=True)
class ExtractorSpec:
    """``artifact_db=math.inf`` disables artifact injection in oracle mode."""

    kind: ExtractorKind = ExtractorKind.ORACLE
    artifact_db: float = 20.0
    gate_threshold_db: float = 15.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ExtractorKind(self.kind))
        if math.isnan(self.artifact_db) or self.artifact_db == -math.inf:
            raise DomainError("invalid extractor", f"artifact_db must be finite or +inf, got {self.artifact_db}")
        if not math.isfinite(self.gate_threshold_db):
            raise DomainError("invalid extractor", "gate_threshold_db must be finite")
        if self.seed < 0:
            raise DomainError("invalid extractor", "seed must be non-negative")

    @classmethod
    def from_fields(cls, fields: Mapping[str, Any]) -> ExtractorSpec:
        """Build from flat ``extractor.*`` keys as found in manifests."""
        kw = {}
        for key in ("kind", "artifact_db", "gate_threshold_db", "seed"):
            full = f"extractor.{key}"
            if full in fields:
                kw[key] = fields[full]
        for key in ("artifact_db", "gate_threshold_db"):
            if key in kw:
                kw[key] = float(kw[key])
        if "seed" in kw:
            kw["seed"] = int(kw["seed"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class SpeakerClue:
    role: ClueRole
    enrollment: AudioBuffer | None = None
    oracle_stem: AudioBuffer | None = None


def extract(mixture: AudioBuffer, clue: SpeakerClue, spec: ExtractorSpec = ExtractorSpec()) -> AudioBuffer:
    """Estimate the clue speaker's signal in ``mixture``; output length equals the mixture's."""
    require_rate(mixture)
    return EXTRACTORS[spec.kind](mixture, clue, spec)


def artifact_noise(reference: AudioBuffer, artifact_db: float, seed: int) -> np.ndarray:
    """Seeded white noise scaled so that ``10 log10(P_reference / P_noise) == artifact_db``."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(len(reference))
    p_a = float(np.dot(a, a) / a.size)
    return a * math.sqrt(power(reference) / (p_a * 10.0 ** (artifact_db / 10.0)))


def _oracle(mixture: AudioBuffer, clue: SpeakerClue, spec: ExtractorSpec) -> AudioBuffer:
    stem = clue.oracle_stem
    if stem is None:
        raise DomainError("clue mismatch", "oracle extraction needs oracle_stem")
    require_rate(stem)
    if len(stem) != len(mixture):
        raise DomainError("clue mismatch", f"oracle stem has {len(stem)} samples, mixture {len(mixture)}")
    if power(stem) < POWER_FLOOR:
        raise DomainError("silent source", "oracle stem is silent")
    if spec.artifact_db == math.inf:
        return stem
    return AudioBuffer(stem.samples + artifact_noise(stem, spec.artifact_db, spec.seed))


# STFT layout for the gate: 32 ms frames, 50 % overlap, sqrt-Hann so that the
# analysis/synthesis pair is a tight frame and masks <= 1 cannot add energy.
GATE_NFFT = 512
GATE_HOP = 256
GATE_BANDS = 64
_LOG_EPS = 1e-10


def _window() -> np.ndarray:
    return np.sqrt(signal.get_window("hann", GATE_NFFT, fftbins=True))


def _stft(x: np.ndarray) -> np.ndarray:
    if len(x) < GATE_NFFT:
        x = fit_length(x, GATE_NFFT)
    _, _, z = signal.stft(x, window=_window(), nperseg=GATE_NFFT, noverlap=GATE_NFFT - GATE_HOP,
                          boundary="zeros", padded=True)
    return z


def _istft(z: np.ndarray, n: int) -> np.ndarray:
    _, x = signal.istft(z, window=_window(), nperseg=GATE_NFFT, noverlap=GATE_NFFT - GATE_HOP, boundary=True)
    return fit_length(x, n)


def log_spectrum_signature(x: np.ndarray) -> np.ndarray:
    """Long-term average log-magnitude spectrum, one value per STFT bin."""
    return np.log(np.abs(_stft(x)) + _LOG_EPS).mean(axis=1)


def _band_correlation(profile: np.ndarray, signature: np.ndarray, bands: list[np.ndarray]) -> np.ndarray:
    """Pearson correlation of each frame's in-band profile with ``signature``; shape (bands, frames)."""
    out = np.zeros((len(bands), profile.shape[1]))
    for b, idx in enumerate(bands):
        p = profile[idx] - profile[idx].mean(axis=0, keepdims=True)
        s = signature[idx] - signature[idx].mean()
        denom = np.sqrt((p * p).sum(axis=0) * (s @ s))
        num = s @ p
        out[b] = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    return out


def gate_mask(mixture: np.ndarray, enrollment: np.ndarray, gate_threshold_db: float) -> np.ndarray:
    """Per-bin, per-frame gain in (0, 1] for the mixture STFT."""
    z = _stft(mixture)
    profile = np.log(np.abs(z) + _LOG_EPS)
    clue_sig = log_spectrum_signature(enrollment)
    clue_shape = clue_sig - clue_sig.mean()
    other_sig = profile.mean(axis=1) - clue_shape
    bands = np.array_split(np.arange(1, z.shape[0]), GATE_BANDS)
    gated = _band_correlation(profile, other_sig, bands) > _band_correlation(profile, clue_sig, bands)
    floor = 10.0 ** (-abs(gate_threshold_db) / 20.0)
    mask = np.ones(z.shape)
    for b, idx in enumerate(bands):
        mask[idx] = np.where(gated[b], floor, 1.0)
    return mask


def _spectral_gate(mixture: AudioBuffer, clue: SpeakerClue, spec: ExtractorSpec) -> AudioBuffer:
    if clue.enrollment is None:
        raise DomainError("clue mismatch", "spectral gate needs an enrollment utterance")
    require_rate(clue.enrollment)
    if power(clue.enrollment) < POWER_FLOOR:
        raise DomainError("silent source", "enrollment is silent")
    x = mixture.samples
    z = _stft(x) * gate_mask(x, clue.enrollment.samples, spec.gate_threshold_db)
    return AudioBuffer(_istft(z, len(x)), mixture.sample_rate)


EXTRACTORS: dict[ExtractorKind, Callable[[AudioBuffer, SpeakerClue, ExtractorSpec], AudioBuffer]] = {
    ExtractorKind.ORACLE: _oracle,
    ExtractorKind.SPECTRAL_GATE: _spectral_gate,
}
