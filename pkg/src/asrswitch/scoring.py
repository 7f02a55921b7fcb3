"""Switching score ``f = SIR - SNR = 10 log10(P_noise / P_interference)``.

Ground truth comes from the stored stems. The estimate follows the
extraction-based procedure: the interferer is extracted with its own clue and
its power averaged over interferer-active frames, the noise power is the raw
mixture averaged over frames where neither speaker is active, and each power
is normalized by the duration of its own region.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

from .activity import ActivityTimeline, Label, frame_length
from .audio import POWER_FLOOR, AudioBuffer, MixtureBundle, masked_power, power, ratio_db
from .errors import DomainError
from .extraction import ExtractorSpec, SpeakerClue, extract

# Ground-truth dB values are reported at this resolution so that nominal grid
# points (e.g. SIR 10 / SNR 0) do not land a few ulps below a threshold.
TRUE_RATIO_DECIMALS = 10
MIN_NOISE_FRAMES = 5
CLAMPED_F_DB = -120.0


class Provenance(str, Enum):
    GROUND_TRUTH = "ground_truth"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class SwitchScore:
    f_db: float
    interferer_power: float
    noise_power: float
    noise_region_frames: int
    provenance: Provenance

    def to_record(self, utt_id: str) -> dict:
        return {
            "utt_id": utt_id,
            "f_db": self.f_db,
            "provenance": self.provenance.value,
            "p_i": self.interferer_power,
            "p_n": self.noise_power,
            "t_prime_frames": self.noise_region_frames,
        }

    @classmethod
    def from_record(cls, record: dict) -> SwitchScore:
        return cls(
            f_db=float(record["f_db"]),
            interferer_power=float(record["p_i"]),
            noise_power=float(record["p_n"]),
            noise_region_frames=int(record["t_prime_frames"]),
            provenance=Provenance(record["provenance"]),
        )

    def to_json(self, utt_id: str) -> str:
        return json.dumps(self.to_record(utt_id))


def true_ratios(bundle: MixtureBundle) -> tuple[float, float, float]:
    """``(sir_db, snr_db, f_db)`` from the ground-truth stems."""
    p_s = power(bundle.target)
    p_i = power(bundle.interferer)
    p_n = power(bundle.noise)
    sir = ratio_db(p_s, p_i)
    snr = ratio_db(p_s, p_n)
    f = ratio_db(p_n, p_i)
    return (round(sir, TRUE_RATIO_DECIMALS), round(snr, TRUE_RATIO_DECIMALS), round(f, TRUE_RATIO_DECIMALS))


def true_score(bundle: MixtureBundle, frame_ms: int = 20) -> SwitchScore:
    _, _, f = true_ratios(bundle)
    n_frames = len(bundle) // frame_length(frame_ms, bundle.sample_rate)
    return SwitchScore(f, power(bundle.interferer), power(bundle.noise), n_frames, Provenance.GROUND_TRUTH)


def estimate_score(
    mixture: AudioBuffer,
    interferer_clue: SpeakerClue,
    extractor: ExtractorSpec,
    timeline: ActivityTimeline,
    *,
    min_noise_frames: int = MIN_NOISE_FRAMES,
    clamp_silent_noise: bool = False,
) -> SwitchScore:
    """Estimate ``f`` from the mixture, an interferer clue and a joint activity timeline.

    With ``clamp_silent_noise`` a noise region whose power is below the floor
    yields ``f_db = -120`` instead of raising, so batch sweeps keep going.
    """
    n = len(mixture)
    noise_frames = timeline.mask(Label.NEITHER)
    n_noise = int(noise_frames.sum())
    noise_mask = timeline.sample_mask(noise_frames, n, mixture.sample_rate)
    if n_noise < min_noise_frames:
        raise DomainError("insufficient noise region", f"{n_noise} noise-only frames, need {min_noise_frames}")

    estimate = extract(mixture, interferer_clue, extractor)
    interferer_mask = timeline.sample_mask(timeline.interferer_active, n, mixture.sample_rate)
    if not interferer_mask.any():
        raise DomainError("silent interference estimate", "no interferer-active frames")
    p_i = masked_power(estimate, interferer_mask)
    if p_i < POWER_FLOOR:
        raise DomainError("silent interference estimate")

    p_n = masked_power(mixture, noise_mask)
    if p_n < POWER_FLOOR:
        if not clamp_silent_noise:
            raise DomainError("insufficient noise region", "noise-only region is silent")
        f = CLAMPED_F_DB
    else:
        f = 10.0 * math.log10(p_n / p_i)
    return SwitchScore(f, p_i, p_n, n_noise, Provenance.ESTIMATED)
