"""SIR x SNR x noise-type sweep over a fixed utterance set.

Every cell reuses the same utterances and seeds, so cells differ only in the
mixing ratios and the noise recording. Per utterance the pipeline is
mix -> extract target -> VAD on clean stems -> estimate score -> decide, plus
optional recognition of both branches through an :class:`AsrHook`.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..activity import VadConfig, overlap_ratio, timeline_from_stems
from ..audio import AudioBuffer, MixtureSpec, SourceRef, mix, read_jsonl, resolve_source
from ..errors import DomainError, SwitchError
from ..extraction import ClueRole, ExtractorKind, ExtractorSpec, SpeakerClue, extract
from ..scoring import MIN_NOISE_FRAMES, estimate_score, true_ratios, true_score
from ..switching import DEFAULT_LAMBDA_DB, Choice, make_decision
from .asr import AsrHook, run_asr
from .cer import edit_distance

SCORE_MODES = ("estimated", "ground_truth")


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    target: SourceRef
    interferer: SourceRef
    seed: int = 0
    target_enrollment: SourceRef | None = None
    interferer_enrollment: SourceRef | None = None
    text: str | None = None


def read_grid_manifest(path: str | os.PathLike) -> list[Utterance]:
    """JSON-lines rows with utt_id, target, interferer and optional seed,
    target_enrollment, interferer_enrollment, text. Paths are relative to the manifest."""
    base = Path(path).parent

    def resolve(value):
        if value is None:
            return None
        p = Path(value)
        return os.fspath(p if p.is_absolute() else base / p)

    out = []
    for k, row in enumerate(read_jsonl(path)):
        if "target" not in row or "interferer" not in row:
            raise DomainError("manifest error", f"row {k}: target and interferer are required")
        out.append(Utterance(
            utt_id=str(row.get("utt_id", f"utt{k:05d}")),
            target=resolve(row["target"]),
            interferer=resolve(row["interferer"]),
            seed=int(row.get("seed", k)),
            target_enrollment=resolve(row.get("target_enrollment")),
            interferer_enrollment=resolve(row.get("interferer_enrollment")),
            text=row.get("text"),
        ))
    return out


@dataclass(frozen=True)
class GridCell:
    noise_type: str
    sir_db: float
    snr_db: float
    n_utts: int
    n_failed: int
    mixture_chosen_fraction: float | None
    mean_f_error_db: float | None
    mean_overlap_ratio: float | None
    cer_enhanced: float | None = None
    cer_mixture: float | None = None
    cer_switched: float | None = None
    # (cer_mixture - cer_enhanced) / cer_mixture: positive when extraction helps
    extraction_relative_reduction: float | None = None
    # (cer_enhanced - cer_switched) / cer_enhanced: positive when switching helps
    switching_relative_improvement: float | None = None


@dataclass
class GridReport:
    cells: list[GridCell]
    rows: list[dict[str, Any]]
    lambda_db: float
    score_mode: str
    sir_list: list[float] = field(default_factory=list)
    snr_list: list[float] = field(default_factory=list)
    noise_types: list[str] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(c.n_failed for c in self.cells)

    def cell(self, sir_db: float, snr_db: float, noise_type: str | None = None) -> GridCell:
        noise_type = noise_type if noise_type is not None else self.noise_types[0]
        for c in self.cells:
            if c.sir_db == sir_db and c.snr_db == snr_db and c.noise_type == noise_type:
                return c
        raise KeyError((sir_db, snr_db, noise_type))

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [f.name for f in fields(GridCell)]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for c in self.cells:
            w.writerow(["" if getattr(c, n) is None else _fmt(getattr(c, n)) for n in names])
        return buf.getvalue()

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.rows)

    def format_table(self, metric: str = "mixture_chosen_fraction") -> str:
        """One block per noise type: SIR rows, SNR columns (as listed)."""
        lines = []
        for noise in self.noise_types:
            lines.append(f"noise: {noise}    {metric}    (lambda = {self.lambda_db:g} dB, {self.score_mode} scores)")
            lines.append("SIR [dB] | " + " ".join(f"{'SNR ' + format(s, 'g'):>9}" for s in self.snr_list))
            lines.append("-" * (11 + 10 * len(self.snr_list)))
            for sir in self.sir_list:
                vals = []
                for snr in self.snr_list:
                    v = getattr(self.cell(sir, snr, noise), metric)
                    vals.append(f"{'-' if v is None else format(v, '.3f'):>9}")
                lines.append(f"{sir:>8g} | " + " ".join(vals))
            lines.append("")
        return "\n".join(lines)


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _clues(utt: Utterance, kind: ExtractorKind, target: AudioBuffer, interferer: AudioBuffer, cache) -> tuple[SpeakerClue, SpeakerClue]:
    if kind is ExtractorKind.ORACLE:
        return (SpeakerClue(ClueRole.TARGET, oracle_stem=target),
                SpeakerClue(ClueRole.INTERFERER, oracle_stem=interferer))
    if utt.target_enrollment is None or utt.interferer_enrollment is None:
        raise DomainError("clue mismatch", f"{utt.utt_id}: enrollment utterances required for {kind.value}")
    return (SpeakerClue(ClueRole.TARGET, enrollment=cache[utt.target_enrollment]),
            SpeakerClue(ClueRole.INTERFERER, enrollment=cache[utt.interferer_enrollment]))


def _run_row(job, *, sources, extractor, vad_config, lambda_db, hook, score_mode, min_noise_frames,
             clamp_silent_noise, workdir) -> dict[str, Any]:
    noise_type, sir, snr, utt = job
    row: dict[str, Any] = {"utt_id": utt.utt_id, "noise_type": noise_type, "sir_db": sir, "snr_db": snr, "error": None}
    try:
        bundle = mix(MixtureSpec(sources[utt.target], sources[utt.interferer], sources[noise_type], sir, snr, seed=utt.seed))
        true_sir, true_snr, f_true = true_ratios(bundle)
        row.update(true_sir_db=true_sir, true_snr_db=true_snr, f_true_db=f_true)
        timeline = timeline_from_stems(bundle.target, bundle.interferer, vad_config)
        try:
            row["overlap_ratio"] = overlap_ratio(timeline)
        except DomainError:
            row["overlap_ratio"] = None

        target_clue, interferer_clue = _clues(utt, extractor.kind, bundle.target, bundle.interferer, sources)
        enhanced = extract(bundle.mixture, target_clue, replace(extractor, seed=derive_seed(extractor.seed, utt.seed, 0)))
        try:
            est = estimate_score(bundle.mixture, interferer_clue, replace(extractor, seed=derive_seed(extractor.seed, utt.seed, 1)),
                                 timeline, min_noise_frames=min_noise_frames, clamp_silent_noise=clamp_silent_noise)
        except SwitchError as exc:
            if score_mode == "estimated":
                raise
            est = None
            row["estimate_error"] = exc.tag
        if est is not None:
            row.update(f_est_db=est.f_db, f_error_db=abs(est.f_db - f_true), p_i=est.interferer_power,
                       p_n=est.noise_power, t_prime_frames=est.noise_region_frames)

        score = est if score_mode == "estimated" else true_score(bundle, vad_config.frame_ms)
        decision = make_decision(utt.utt_id, score, lambda_db)
        row.update(f_db=decision.f_db, lambda_db=lambda_db, choice=decision.choice.value,
                   score_provenance=decision.score_provenance.value)

        if hook is not None:
            if not utt.text:
                raise DomainError("empty reference", f"{utt.utt_id}: no reference text for CER")
            hyp_enh = run_asr(hook, enhanced, workdir)
            hyp_mix = run_asr(hook, bundle.mixture, workdir)
            err_enh = edit_distance(utt.text, hyp_enh)
            err_mix = edit_distance(utt.text, hyp_mix)
            err_sw = err_enh if decision.choice is Choice.ENHANCED else err_mix
            n_ref = len(utt.text)
            row.update(ref_chars=n_ref, errors_enhanced=err_enh, errors_mixture=err_mix, errors_switched=err_sw,
                       cer_enhanced=err_enh / n_ref, cer_mixture=err_mix / n_ref, cer_switched=err_sw / n_ref,
                       hyp_enhanced=hyp_enh, hyp_mixture=hyp_mix)
    except SwitchError as exc:
        row["error"] = exc.tag
        row["error_detail"] = str(exc)
    return row


def _aggregate(noise_type: str, sir: float, snr: float, rows: Sequence[dict[str, Any]]) -> GridCell:
    ok = sorted((r for r in rows if r["error"] is None), key=lambda r: r["utt_id"])
    n = len(ok)
    failed = len(rows) - n
    if n == 0:
        return GridCell(noise_type, sir, snr, 0, failed, None, None, None)
    chosen = sum(1 for r in ok if r["choice"] == Choice.MIXTURE.value) / n
    errs = [r["f_error_db"] for r in ok if r.get("f_error_db") is not None]
    overlaps = [r["overlap_ratio"] for r in ok if r.get("overlap_ratio") is not None]
    cell = GridCell(
        noise_type, sir, snr, n, failed, chosen,
        math.fsum(errs) / len(errs) if errs else None,
        math.fsum(overlaps) / len(overlaps) if overlaps else None,
    )
    if all("ref_chars" in r for r in ok):
        n_ref = sum(r["ref_chars"] for r in ok)
        c_enh = sum(r["errors_enhanced"] for r in ok) / n_ref
        c_mix = sum(r["errors_mixture"] for r in ok) / n_ref
        c_sw = sum(r["errors_switched"] for r in ok) / n_ref
        cell = replace(
            cell, cer_enhanced=c_enh, cer_mixture=c_mix, cer_switched=c_sw,
            extraction_relative_reduction=(c_mix - c_enh) / c_mix if c_mix > 0 else None,
            switching_relative_improvement=(c_enh - c_sw) / c_enh if c_enh > 0 else None,
        )
    return cell


def run_grid(
    utterances: Sequence[Utterance],
    sir_list: Iterable[float],
    snr_list: Iterable[float],
    noise_types: Mapping[str, SourceRef],
    extractor: ExtractorSpec = ExtractorSpec(),
    vad_config: VadConfig = VadConfig(),
    lambda_db: float = DEFAULT_LAMBDA_DB,
    hook: AsrHook | None = None,
    *,
    score_mode: str = "estimated",
    workers: int = 1,
    min_noise_frames: int = MIN_NOISE_FRAMES,
    clamp_silent_noise: bool = False,
    workdir: str | os.PathLike | None = None,
) -> GridReport:
    """Evaluate every (noise type, SIR, SNR) cell on the same utterance set."""
    sir_list = [float(v) for v in sir_list]
    snr_list = [float(v) for v in snr_list]
    if not utterances or not sir_list or not snr_list or not noise_types:
        raise DomainError("empty grid", "utterances, SIR list, SNR list and noise types must be non-empty")
    if score_mode not in SCORE_MODES:
        raise ValueError(f"score_mode must be one of {SCORE_MODES}, got {score_mode!r}")
    ids = [u.utt_id for u in utterances]
    if len(set(ids)) != len(ids):
        raise DomainError("manifest error", "utt_id values must be unique")

    # load every referenced file once; noise recordings are keyed by noise-type name
    sources: dict[Any, AudioBuffer] = {name: resolve_source(ref) for name, ref in noise_types.items()}
    for u in utterances:
        for ref in (u.target, u.interferer, u.target_enrollment, u.interferer_enrollment):
            if ref is not None and not isinstance(ref, AudioBuffer) and ref not in sources:
                sources[ref] = resolve_source(ref)
    lookup = _SourceLookup(sources)

    jobs = [(noise, sir, snr, u) for noise in noise_types for sir in sir_list for snr in snr_list
            for u in sorted(utterances, key=lambda u: u.utt_id)]
    kwargs = dict(sources=lookup, extractor=extractor, vad_config=vad_config, lambda_db=lambda_db, hook=hook,
                  score_mode=score_mode, min_noise_frames=min_noise_frames,
                  clamp_silent_noise=clamp_silent_noise, workdir=workdir)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda job: _run_row(job, **kwargs), jobs))
    else:
        rows = [_run_row(job, **kwargs) for job in jobs]

    cells = []
    for noise in noise_types:
        for sir in sir_list:
            for snr in snr_list:
                cell_rows = [r for r in rows if r["noise_type"] == noise and r["sir_db"] == sir and r["snr_db"] == snr]
                cells.append(_aggregate(noise, sir, snr, cell_rows))
    return GridReport(cells, rows, lambda_db, score_mode, sir_list, snr_list, list(noise_types))


class _SourceLookup:
    """Maps a source reference (path, noise name or in-memory buffer) to its buffer."""

    def __init__(self, sources: dict[Any, AudioBuffer]):
        self._sources = sources

    def __getitem__(self, ref) -> AudioBuffer:
        if isinstance(ref, AudioBuffer):
            return ref
        return self._sources[ref]
