"""Energy VAD on clean stems and the joint target/interferer activity timeline."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .audio import AudioBuffer, SAMPLE_RATE
from .errors import DomainError


class Label(IntEnum):
    # bit 0: target active, bit 1: interferer active
    NEITHER = 0
    TARGET_ONLY = 1
    INTERFERER_ONLY = 2
    BOTH = 3

    @property
    def char(self) -> str:
        return "NTIB"[self.value]


_CHAR_TO_CODE = {c: k for k, c in enumerate("NTIB")}


@dataclass(frozen=True)
class VadConfig:
    frame_ms: int = 20
    threshold_db: float = 40.0
    hangover_frames: int = 2

    def __post_init__(self):
        if int(self.frame_ms) != self.frame_ms or self.frame_ms <= 0:
            raise DomainError("invalid vad config", f"frame_ms must be a positive integer, got {self.frame_ms}")
        if self.hangover_frames < 0:
            raise DomainError("invalid vad config", "hangover_frames must be non-negative")
        frame_length(self.frame_ms)

    def frame_length(self, sample_rate: int = SAMPLE_RATE) -> int:
        return frame_length(self.frame_ms, sample_rate)


def frame_length(frame_ms: int, sample_rate: int = SAMPLE_RATE) -> int:
    n, rem = divmod(frame_ms * sample_rate, 1000)
    if rem:
        raise DomainError("invalid vad config", f"{frame_ms} ms is not a whole number of samples at {sample_rate} Hz")
    return n


def frame_powers(samples: np.ndarray, frame_len: int) -> np.ndarray:
    """Mean-square power of each complete frame; the trailing partial frame is dropped."""
    n_frames = len(samples) // frame_len
    frames = samples[: n_frames * frame_len].reshape(n_frames, frame_len)
    return np.einsum("ij,ij->i", frames, frames) / frame_len


def fill_short_gaps(mask: np.ndarray, max_gap: int) -> np.ndarray:
    """Mark active every inactive run shorter than ``max_gap`` that touches an active frame."""
    mask = np.asarray(mask, dtype=bool).copy()
    if max_gap <= 1 or not mask.any():
        return mask
    n = len(mask)
    k = 0
    while k < n:
        if mask[k]:
            k += 1
            continue
        start = k
        while k < n and not mask[k]:
            k += 1
        # mask.any() holds, so every inactive run borders an active frame
        if k - start < max_gap:
            mask[start:k] = True
    return mask


def detect_activity(stem: AudioBuffer, config: VadConfig = VadConfig()) -> np.ndarray:
    """Per-frame activity of a clean stem, relative to its own loudest frame."""
    if len(stem) == 0:
        raise DomainError("empty signal")
    p = frame_powers(stem.samples, config.frame_length(stem.sample_rate))
    if p.size == 0:
        raise DomainError("empty signal", "stem shorter than one frame")
    threshold = p.max() * 10.0 ** (-config.threshold_db / 10.0)
    return fill_short_gaps(p > threshold, config.hangover_frames)


@dataclass(frozen=True, eq=False)
class ActivityTimeline:
    """Per-frame joint labels; ``codes`` holds :class:`Label` values as uint8."""

    frame_ms: int
    codes: np.ndarray

    def __post_init__(self):
        c = np.array(self.codes, dtype=np.uint8, copy=True)
        if c.ndim != 1 or (c.size and c.max() > 3):
            raise DomainError("invalid timeline", "codes must be a 1-D sequence of values in 0..3")
        c.flags.writeable = False
        object.__setattr__(self, "codes", c)

    def __len__(self) -> int:
        return self.codes.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ActivityTimeline):
            return NotImplemented
        return self.frame_ms == other.frame_ms and np.array_equal(self.codes, other.codes)

    @property
    def labels(self) -> list[Label]:
        return [Label(int(c)) for c in self.codes]

    @property
    def target_active(self) -> np.ndarray:
        return (self.codes & 1).astype(bool)

    @property
    def interferer_active(self) -> np.ndarray:
        return (self.codes & 2).astype(bool)

    def mask(self, *labels: Label) -> np.ndarray:
        return np.isin(self.codes, [int(lb) for lb in labels])

    def counts(self) -> dict[Label, int]:
        n = np.bincount(self.codes, minlength=4)
        return {lb: int(n[lb]) for lb in Label}

    def sample_mask(self, frame_mask: np.ndarray, n_samples: int, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
        """Expand a per-frame mask to samples; samples past the last whole frame are excluded."""
        flen = frame_length(self.frame_ms, sample_rate)
        if n_samples // flen != len(self):
            raise DomainError(
                "timeline mismatch",
                f"{len(self)} frames of {self.frame_ms} ms do not cover {n_samples} samples",
            )
        out = np.zeros(n_samples, dtype=bool)
        out[: len(self) * flen] = np.repeat(np.asarray(frame_mask, dtype=bool), flen)
        return out

    def to_string(self) -> str:
        return "".join("NTIB"[c] for c in self.codes)

    @classmethod
    def from_labels(cls, frame_ms: int, labels) -> ActivityTimeline:
        if isinstance(labels, str):
            try:
                codes = [_CHAR_TO_CODE[ch] for ch in labels]
            except KeyError as exc:
                raise DomainError("invalid timeline", f"unknown label character {exc.args[0]!r}") from None
        else:
            codes = [int(Label(lb)) for lb in labels]
        return cls(frame_ms, np.array(codes, dtype=np.uint8))

    def to_json(self) -> str:
        return json.dumps({"frame_ms": self.frame_ms, "labels": self.to_string()})

    @classmethod
    def from_json(cls, text: str) -> ActivityTimeline:
        obj = json.loads(text)
        return cls.from_labels(int(obj["frame_ms"]), obj["labels"])


def join_timeline(target_mask, interferer_mask, frame_ms: int) -> ActivityTimeline:
    t = np.asarray(target_mask, dtype=bool)
    i = np.asarray(interferer_mask, dtype=bool)
    if t.shape != i.shape:
        raise DomainError("mask length mismatch", f"{t.shape} vs {i.shape}")
    return ActivityTimeline(frame_ms, t.astype(np.uint8) | (i.astype(np.uint8) << 1))


def timeline_from_stems(target: AudioBuffer, interferer: AudioBuffer, config: VadConfig = VadConfig()) -> ActivityTimeline:
    """Run the VAD on both clean stems and join the masks."""
    return join_timeline(detect_activity(target, config), detect_activity(interferer, config), config.frame_ms)


def overlap_ratio(timeline: ActivityTimeline) -> float:
    """Fraction of target-active frames in which the interferer is also active."""
    n_target = int(timeline.target_active.sum())
    if n_target == 0:
        raise DomainError("no target speech")
    return int(np.count_nonzero(timeline.codes == Label.BOTH)) / n_target
