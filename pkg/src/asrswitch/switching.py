"""Threshold rule choosing between the enhanced signal and the raw mixture.

The enhanced branch is used only while ``f < lambda``; at or above the
threshold the mixture goes to the recognizer.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .audio import AudioBuffer
from .errors import DomainError
from .scoring import Provenance, SwitchScore

DEFAULT_LAMBDA_DB = 10.0
DEFAULT_LAMBDA_GRID = tuple(float(v) for v in range(-20, 21))


class Choice(str, Enum):
    ENHANCED = "enhanced"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class SwitchDecision:
    utt_id: str
    f_db: float
    lambda_db: float
    choice: Choice
    score_provenance: Provenance

    def to_record(self) -> dict:
        return {
            "utt_id": self.utt_id,
            "f_db": self.f_db,
            "lambda_db": self.lambda_db,
            "choice": self.choice.value,
            "score_provenance": self.score_provenance.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def decide(f_db: float, lambda_db: float = DEFAULT_LAMBDA_DB) -> Choice:
    if not (math.isfinite(f_db) and math.isfinite(lambda_db)):
        raise DomainError("invalid score", f"f={f_db}, lambda={lambda_db}")
    return Choice.ENHANCED if f_db < lambda_db else Choice.MIXTURE


def make_decision(utt_id: str, score: SwitchScore, lambda_db: float = DEFAULT_LAMBDA_DB) -> SwitchDecision:
    return SwitchDecision(utt_id, score.f_db, lambda_db, decide(score.f_db, lambda_db), score.provenance)


def select_input(mixture: AudioBuffer, enhanced: AudioBuffer, decision: SwitchDecision | Choice) -> AudioBuffer:
    """Return the branch named by the decision, as the same object."""
    if len(mixture) != len(enhanced) or mixture.sample_rate != enhanced.sample_rate:
        raise DomainError("branch length mismatch", f"mixture {len(mixture)} vs enhanced {len(enhanced)} samples")
    choice = decision.choice if isinstance(decision, SwitchDecision) else Choice(decision)
    return enhanced if choice is Choice.ENHANCED else mixture


@dataclass(frozen=True)
class CalibrationRecord:
    utt_id: str
    f_db: float
    cer_enhanced: float
    cer_mixture: float

    def __post_init__(self):
        if self.cer_enhanced < 0 or self.cer_mixture < 0:
            raise DomainError("invalid calibration record", f"{self.utt_id}: negative CER")


def switched_cer(records: Sequence[CalibrationRecord], lambda_db: float) -> float:
    """Mean CER obtained when every record is routed by ``decide(f, lambda_db)``."""
    total = 0.0
    for r in records:
        total += r.cer_enhanced if r.f_db < lambda_db else r.cer_mixture
    return total / len(records)


def calibrate_lambda(
    records: Iterable[CalibrationRecord], grid: Iterable[float] = DEFAULT_LAMBDA_GRID
) -> tuple[float, float]:
    """Grid value of lambda with the lowest mean switched CER; ties go to the smaller lambda."""
    records = list(records)
    grid = sorted(float(v) for v in grid)
    if not records or not grid:
        raise DomainError("empty calibration set")
    f = np.array([r.f_db for r in records])
    enh = np.array([r.cer_enhanced for r in records])
    mix = np.array([r.cer_mixture for r in records])
    best_lambda, best_cer = grid[0], math.inf
    for lam in grid:
        cer = float(np.where(f < lam, enh, mix).sum() / len(records))
        if cer < best_cer:
            best_lambda, best_cer = lam, cer
    return best_lambda, best_cer


def read_calibration_csv(path: str | os.PathLike) -> list[CalibrationRecord]:
    """Rows with header ``utt_id,f_db,cer_enhanced,cer_mixture``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"utt_id", "f_db", "cer_enhanced", "cer_mixture"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise DomainError("calibration format", f"{path}: header must contain {sorted(expected)}")
        return [
            CalibrationRecord(row["utt_id"], float(row["f_db"]), float(row["cer_enhanced"]), float(row["cer_mixture"]))
            for row in reader
        ]


def write_calibration_csv(records: Iterable[CalibrationRecord], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["utt_id", "f_db", "cer_enhanced", "cer_mixture"])
        for r in records:
            w.writerow([r.utt_id, repr(r.f_db), repr(r.cer_enhanced), repr(r.cer_mixture)])
