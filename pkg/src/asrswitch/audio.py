"""Audio buffers, power arithmetic, WAV I/O and exact mixture synthesis.

Everything is carried as float64 internally, whatever the on-disk format, so
that ``mixture == target + interferer + noise`` holds bit-for-bit and measured
ratios can be checked to 1e-9 dB.
"""

from __future__ import annotations

import json
import math
import os
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Union

import numpy as np
from scipy.io import wavfile

from .errors import DomainError

SAMPLE_RATE = 16000
# Powers below this are treated as silence instead of producing -inf dB.
POWER_FLOOR = 1e-30


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono float64 samples plus their sample rate. Read-only once built."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True)
        if x.ndim != 1:
            raise DomainError("channel error", f"expected 1-D samples, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite samples")
        if int(self.sample_rate) <= 0:
            raise DomainError("rate mismatch", f"sample rate must be positive, got {self.sample_rate}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def scaled(self, gain: float) -> AudioBuffer:
        return AudioBuffer(self.samples * gain, self.sample_rate)

    def __repr__(self) -> str:
        return f"AudioBuffer(n={len(self)}, sample_rate={self.sample_rate})"


def require_rate(*buffers: AudioBuffer, rate: int = SAMPLE_RATE) -> None:
    for b in buffers:
        if b.sample_rate != rate:
            raise DomainError("rate mismatch", f"expected {rate} Hz, got {b.sample_rate} Hz")


def power(buffer: AudioBuffer, region: slice | tuple[int, int] | None = None) -> float:
    """Time-averaged power (mean of squared samples) over ``region``.

    ``region`` is a half-open sample range ``(start, stop)`` or a slice with
    unit step; ``None`` means the whole buffer.
    """
    x = buffer.samples
    if region is not None:
        if isinstance(region, slice):
            start, stop, step = region.indices(len(x))
            if step != 1:
                raise DomainError("empty power region", "region must be contiguous")
        else:
            start, stop = region
        if start < 0 or stop > len(x):
            raise DomainError("empty power region", f"region {start}:{stop} outside buffer of {len(x)}")
        x = x[start:stop]
    if x.size == 0:
        raise DomainError("empty power region")
    return float(np.dot(x, x) / x.size)


def masked_power(buffer: AudioBuffer, mask: np.ndarray) -> float:
    """Power over the samples selected by a boolean ``mask``; T' is ``mask.sum()``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != buffer.samples.shape:
        raise DomainError("empty power region", "mask does not match buffer length")
    x = buffer.samples[mask]
    if x.size == 0:
        raise DomainError("empty power region")
    return float(np.dot(x, x) / x.size)


def ratio_db(numerator_power: float, denominator_power: float) -> float:
    if numerator_power < POWER_FLOOR or denominator_power < POWER_FLOOR:
        raise DomainError("silent source")
    return 10.0 * math.log10(numerator_power / denominator_power)


def gain_for_ratio(reference: AudioBuffer, other: AudioBuffer, target_ratio_db: float) -> float:
    """Linear gain for ``other`` so that ``10 log10(P_ref / P_scaled_other)`` is ``target_ratio_db``."""
    p_ref = power(reference)
    p_other = power(other)
    if p_ref < POWER_FLOOR or p_other < POWER_FLOOR:
        raise DomainError("silent source")
    if not math.isfinite(target_ratio_db):
        raise DomainError("invalid ratio", f"target ratio must be finite, got {target_ratio_db}")
    return math.sqrt(p_ref / (p_other * 10.0 ** (target_ratio_db / 10.0)))


# --- WAV I/O -----------------------------------------------------------------

WAV_FORMATS = ("pcm16", "float32")


def load_wav(path: str | os.PathLike) -> AudioBuffer:
    """Read a 16 kHz mono WAV (16-bit PCM or 32-bit float) into float64."""
    try:
        rate, data = wavfile.read(os.fspath(path))
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, wave.Error, OSError) as exc:
        raise DomainError("decode error", f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise DomainError("channel error", f"{path}: {data.shape[1]} channels, mono required")
    if rate != SAMPLE_RATE:
        raise DomainError("rate mismatch", f"{path}: {rate} Hz, {SAMPLE_RATE} Hz required")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    else:
        raise DomainError("decode error", f"{path}: unsupported sample type {data.dtype}")
    return AudioBuffer(samples, rate)


def save_wav(buffer: AudioBuffer, path: str | os.PathLike, fmt: str = "float32") -> None:
    """Write ``buffer`` as 16-bit PCM (clipped to [-1, 1)) or 32-bit float."""
    require_rate(buffer)
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"directory does not exist: {path.parent}")
    if fmt == "pcm16":
        data = np.clip(np.round(buffer.samples * 32768.0), -32768, 32767).astype(np.int16)
    elif fmt == "float32":
        data = buffer.samples.astype(np.float32)
    else:
        raise ValueError(f"unknown wav format {fmt!r}, expected one of {WAV_FORMATS}")
    wavfile.write(os.fspath(path), buffer.sample_rate, data)


# --- mixing ------------------------------------------------------------------

SourceRef = Union[str, os.PathLike, AudioBuffer]


def resolve_source(ref: SourceRef) -> AudioBuffer:
    if isinstance(ref, AudioBuffer):
        return ref
    return load_wav(ref)


@dataclass(frozen=True)
class MixtureSpec:
    """Recipe for one mixture. ``noise_offset=None`` draws the noise start from ``seed``."""

    target: SourceRef
    interferer: SourceRef
    noise: SourceRef
    sir_db: float
    snr_db: float
    seed: int = 0
    noise_offset: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.sir_db) and math.isfinite(self.snr_db)):
            raise DomainError("invalid ratio", "sir_db and snr_db must be finite")
        if self.seed < 0:
            raise DomainError("invalid seed", "seed must be non-negative")


@dataclass(frozen=True, eq=False)
class MixtureBundle:
    mixture: AudioBuffer
    target: AudioBuffer
    interferer: AudioBuffer
    noise: AudioBuffer
    true_sir_db: float
    true_snr_db: float
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def sample_rate(self) -> int:
        return self.mixture.sample_rate

    def __len__(self) -> int:
        return len(self.mixture)


def fit_length(x: np.ndarray, n: int) -> np.ndarray:
    """Zero-pad at the end or truncate to ``n`` samples."""
    if len(x) >= n:
        return x[:n].copy()
    return np.concatenate([x, np.zeros(n - len(x))])


def noise_segment(noise: np.ndarray, n: int, offset: int) -> np.ndarray:
    """``n`` samples of ``noise`` starting at ``offset``, wrapping around to its start."""
    idx = (offset + np.arange(n)) % len(noise)
    return noise[idx]


def pick_noise_offset(noise_len: int, n: int, seed: int) -> int:
    if noise_len <= n:
        return 0
    rng = np.random.default_rng(seed)
    return int(rng.integers(0, noise_len - n + 1))


def mix(spec: MixtureSpec) -> MixtureBundle:
    """Scale interferer and noise against the (unscaled) target and sum the stems."""
    s = resolve_source(spec.target)
    i = resolve_source(spec.interferer)
    nz = resolve_source(spec.noise)
    require_rate(s, i, nz)
    if power(s) < POWER_FLOOR:
        raise DomainError("silent source", "target is silent")
    n = len(s)

    interferer = AudioBuffer(fit_length(i.samples, n))
    if spec.noise_offset is None:
        offset = pick_noise_offset(len(nz), n, spec.seed)
    else:
        offset = int(spec.noise_offset) % len(nz)
    noise = AudioBuffer(noise_segment(nz.samples, n, offset))

    g_i = gain_for_ratio(s, interferer, spec.sir_db)
    g_n = gain_for_ratio(s, noise, spec.snr_db)
    interferer = interferer.scaled(g_i)
    noise = noise.scaled(g_n)

    y = s.samples + interferer.samples + noise.samples
    p_s = power(s)
    true_sir = ratio_db(p_s, power(interferer))
    true_snr = ratio_db(p_s, power(noise))
    meta = {
        "sir_db": spec.sir_db,
        "snr_db": spec.snr_db,
        "seed": spec.seed,
        "noise_offset": offset,
        "interferer_gain": g_i,
        "noise_gain": g_n,
        "power_region": "full",
    }
    return MixtureBundle(AudioBuffer(y), s, interferer, noise, true_sir, true_snr, meta)


# --- manifests ---------------------------------------------------------------


def read_jsonl(path: str | os.PathLike) -> list[dict[str, Any]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DomainError("manifest error", f"{path}:{lineno}: {exc}") from exc
    return rows


def _resolve_path(value: str, base: Path) -> str:
    p = Path(value)
    return os.fspath(p if p.is_absolute() else base / p)


def read_mixture_manifest(path: str | os.PathLike) -> list[tuple[str, MixtureSpec]]:
    """Parse a JSON-lines manifest into ``(utt_id, MixtureSpec)`` pairs.

    Required keys: target, interferer, noise, sir_db, snr_db, seed. Optional:
    utt_id (defaults to the line index), noise_offset. Relative paths resolve
    against the manifest's directory.
    """
    base = Path(path).parent
    out = []
    for k, row in enumerate(read_jsonl(path)):
        missing = [key for key in ("target", "interferer", "noise", "sir_db", "snr_db", "seed") if key not in row]
        if missing:
            raise DomainError("manifest error", f"row {k}: missing keys {missing}")
        spec = MixtureSpec(
            target=_resolve_path(row["target"], base),
            interferer=_resolve_path(row["interferer"], base),
            noise=_resolve_path(row["noise"], base),
            sir_db=float(row["sir_db"]),
            snr_db=float(row["snr_db"]),
            seed=int(row["seed"]),
            noise_offset=row.get("noise_offset"),
        )
        out.append((str(row.get("utt_id", f"utt{k:05d}")), spec))
    return out


def concat(buffers: Iterable[AudioBuffer]) -> AudioBuffer:
    buffers = list(buffers)
    require_rate(*buffers, rate=buffers[0].sample_rate)
    return AudioBuffer(np.concatenate([b.samples for b in buffers]), buffers[0].sample_rate)
