"""Command-line entry point: ``asrswitch <subcommand> ...``.

Exit codes: 0 success, 2 when some rows failed but the run completed, 1 on a
fatal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .activity import ActivityTimeline, VadConfig, overlap_ratio, timeline_from_stems
from .audio import WAV_FORMATS, load_wav, mix, read_mixture_manifest, save_wav
from .errors import DomainError, SwitchError
from .evaluation.asr import AsrHook
from .evaluation.cer import cer
from .evaluation.grid import read_grid_manifest, run_grid
from .extraction import ClueRole, ExtractorKind, ExtractorSpec, SpeakerClue
from .scoring import Provenance, SwitchScore, estimate_score, true_ratios
from .synth import colored_noise, speech_like, white_noise
from .switching import DEFAULT_LAMBDA_DB, SwitchDecision, calibrate_lambda, decide, read_calibration_csv, select_input

log = logging.getLogger("asrswitch")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _lambda_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma list."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(n)]
    return _float_list(text)


def _add_extractor_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("extractor")
    g.add_argument("--extractor", choices=[k.value for k in ExtractorKind], default="oracle")
    g.add_argument("--artifact-db", type=float, default=20.0, help="oracle artifact-to-signal ratio; 'inf' disables")
    g.add_argument("--gate-threshold-db", type=float, default=15.0)
    g.add_argument("--extractor-seed", type=int, default=0)


def _extractor(args) -> ExtractorSpec:
    return ExtractorSpec(args.extractor, args.artifact_db, args.gate_threshold_db, args.extractor_seed)


def _add_vad_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("vad")
    g.add_argument("--frame-ms", type=int, default=20)
    g.add_argument("--threshold-db", type=float, default=40.0)
    g.add_argument("--hangover", type=int, default=2)


def _vad(args) -> VadConfig:
    return VadConfig(args.frame_ms, args.threshold_db, args.hangover)


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_mix(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    with open(out / "bundles.jsonl", "w", encoding="utf-8") as meta_fh:
        for utt_id, spec in read_mixture_manifest(args.manifest):
            try:
                bundle = mix(spec)
            except SwitchError as exc:
                failures += 1
                meta_fh.write(json.dumps({"utt_id": utt_id, "error": exc.tag}) + "\n")
                log.warning("%s: %s", utt_id, exc)
                continue
            paths = {}
            for stem in ("mixture", "target", "interferer", "noise"):
                paths[stem] = str(out / f"{utt_id}_{stem}.wav")
                save_wav(getattr(bundle, stem), paths[stem], args.format)
            sir, snr, f = true_ratios(bundle)
            record = {"utt_id": utt_id, **paths, "true_sir_db": sir, "true_snr_db": snr, "f_db": f, **bundle.meta}
            meta_fh.write(json.dumps(record) + "\n")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_vad(args) -> int:
    timeline = timeline_from_stems(load_wav(args.target), load_wav(args.interferer), _vad(args))
    _write_or_print(timeline.to_json() + "\n", args.out)
    try:
        log.info("overlap ratio %.3f", overlap_ratio(timeline))
    except DomainError:
        log.info("no target speech detected")
    return EXIT_OK


def cmd_score(args) -> int:
    mixture = load_wav(args.mixture)
    timeline = ActivityTimeline.from_json(Path(args.timeline).read_text(encoding="utf-8"))
    if args.interferer_stem:
        clue = SpeakerClue(ClueRole.INTERFERER, oracle_stem=load_wav(args.interferer_stem))
    else:
        clue = SpeakerClue(ClueRole.INTERFERER, enrollment=load_wav(args.interferer_enrollment))
    score = estimate_score(mixture, clue, _extractor(args), timeline,
                           min_noise_frames=args.min_noise_frames, clamp_silent_noise=args.clamp)
    line = score.to_json(args.utt_id) + "\n"
    if args.results:
        with open(args.results, "a", encoding="utf-8") as fh:
            fh.write(line)
    sys.stdout.write(line)
    return EXIT_OK


def cmd_switch(args) -> int:
    if args.score:
        score = SwitchScore.from_record(json.loads(Path(args.score).read_text(encoding="utf-8").splitlines()[-1]))
        f_db, provenance = score.f_db, score.provenance
    else:
        f_db, provenance = args.f_db, Provenance(args.provenance)
    decision = SwitchDecision(args.utt_id, f_db, args.lambda_db, decide(f_db, args.lambda_db), provenance)
    chosen = select_input(load_wav(args.mixture), load_wav(args.enhanced), decision)
    save_wav(chosen, args.out, args.format)
    line = decision.to_json() + "\n"
    if args.results:
        with open(args.results, "a", encoding="utf-8") as fh:
            fh.write(line)
    sys.stdout.write(line)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    lam, total = calibrate_lambda(read_calibration_csv(args.csv), _lambda_grid(args.grid))
    print(json.dumps({"lambda_db": lam, "mean_cer": total}))
    return EXIT_OK


def cmd_grid(args) -> int:
    noises = {}
    for item in args.noise:
        name, sep, path = item.partition("=")
        if not sep:
            raise DomainError("manifest error", f"--noise expects NAME=PATH, got {item!r}")
        noises[name] = path
    hook = AsrHook(args.asr_cmd, args.asr_timeout) if args.asr_cmd else None
    report = run_grid(
        read_grid_manifest(args.manifest), args.sir, args.snr, noises, _extractor(args), _vad(args),
        args.lambda_db, hook, score_mode=args.scores, workers=args.workers,
        min_noise_frames=args.min_noise_frames, clamp_silent_noise=args.clamp,
    )
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    if args.jsonl:
        Path(args.jsonl).write_text(report.to_jsonl(), encoding="utf-8")
    for metric in args.metric:
        print(report.format_table(metric))
    if report.n_failed:
        log.warning("%d rows failed", report.n_failed)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_cer(args) -> int:
    print(repr(cer(args.reference, args.hypothesis)))
    return EXIT_OK


def cmd_synth_corpus(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k in range(args.n_utts):
        seed = args.seed * 1000 + k
        f_t, f_i = 110.0 + 7.0 * (k % 9), 190.0 + 11.0 * (k % 7)
        files = {
            "target": speech_like(4.0, f_t, seed, tail_s=0.6),
            "interferer": speech_like(3.8, f_i, seed + 500),
            "target_enrollment": speech_like(3.0, f_t * 1.02, seed + 700),
            "interferer_enrollment": speech_like(3.0, f_i * 0.98, seed + 900),
        }
        row = {"utt_id": f"utt{k:03d}", "seed": seed}
        for key, buf in files.items():
            path = f"utt{k:03d}_{key}.wav"
            save_wav(buf, out / path)
            row[key] = path
        rows.append(row)
    (out / "utterances.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    save_wav(white_noise(30.0, args.seed + 1), out / "noise_white.wav")
    save_wav(colored_noise(30.0, args.seed + 2, 1.0), out / "noise_pink.wav")
    print(out / "utterances.jsonl")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asrswitch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mix", help="render a JSON-lines mixture manifest to WAV stems")
    s.add_argument("manifest")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--format", choices=WAV_FORMATS, default="float32")
    s.set_defaults(func=cmd_mix)

    s = sub.add_parser("vad", help="joint activity timeline from clean target/interferer stems")
    s.add_argument("--target", required=True)
    s.add_argument("--interferer", required=True)
    s.add_argument("--out")
    _add_vad_args(s)
    s.set_defaults(func=cmd_vad)

    s = sub.add_parser("score", help="estimate the switching score of one mixture")
    s.add_argument("--mixture", required=True)
    s.add_argument("--timeline", required=True, help="timeline JSON from 'vad'")
    clue = s.add_mutually_exclusive_group(required=True)
    clue.add_argument("--interferer-stem", help="clean interferer (oracle extractor)")
    clue.add_argument("--interferer-enrollment", help="interferer enrollment (spectral_gate extractor)")
    s.add_argument("--utt-id", default="utt")
    s.add_argument("--min-noise-frames", type=int, default=5)
    s.add_argument("--clamp", action="store_true", help="clamp silent noise regions to -120 dB instead of failing")
    s.add_argument("--results", help="append the score line to this JSON-lines file")
    _add_extractor_args(s)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("switch", help="pick the ASR input branch for one utterance")
    s.add_argument("--mixture", required=True)
    s.add_argument("--enhanced", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--f-db", type=float)
    src.add_argument("--score", help="JSON-lines file from 'score'; the last line is used")
    s.add_argument("--provenance", choices=["estimated", "ground_truth"], default="estimated")
    s.add_argument("--lambda", dest="lambda_db", type=float, default=DEFAULT_LAMBDA_DB)
    s.add_argument("--utt-id", default="utt")
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=WAV_FORMATS, default="float32")
    s.add_argument("--results", help="append the decision line to this JSON-lines file")
    s.set_defaults(func=cmd_switch)

    s = sub.add_parser("calibrate", help="choose lambda from dev-set CER pairs")
    s.add_argument("csv", help="header: utt_id,f_db,cer_enhanced,cer_mixture")
    s.add_argument("--grid", default="-20:20:1", help="start:stop:step or comma list")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("grid", help="SIR x SNR x noise sweep")
    s.add_argument("manifest", help="JSON-lines utterance manifest")
    s.add_argument("--noise", action="append", required=True, metavar="NAME=WAV")
    s.add_argument("--sir", type=_float_list, default=[0, 5, 10, 15, 20])
    s.add_argument("--snr", type=_float_list, default=[20, 10, 0])
    s.add_argument("--lambda", dest="lambda_db", type=float, default=DEFAULT_LAMBDA_DB)
    s.add_argument("--scores", choices=["estimated", "ground_truth"], default="estimated")
    s.add_argument("--asr-cmd", help="recognizer command containing {audio}")
    s.add_argument("--asr-timeout", type=float, default=60.0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--min-noise-frames", type=int, default=5)
    s.add_argument("--clamp", action="store_true")
    s.add_argument("--csv")
    s.add_argument("--jsonl")
    s.add_argument("--metric", action="append", default=None,
                   help="GridCell field to tabulate (repeatable); default mixture_chosen_fraction")
    _add_extractor_args(s)
    _add_vad_args(s)
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("cer", help="character error rate of a hypothesis")
    s.add_argument("reference")
    s.add_argument("hypothesis")
    s.set_defaults(func=cmd_cer)

    s = sub.add_parser("synth-corpus", help="write a synthetic speech-like corpus and noises")
    s.add_argument("out_dir")
    s.add_argument("--n-utts", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth_corpus)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "metric", False) is None:
        args.metric = ["mixture_chosen_fraction"]
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SwitchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
