"""Command-line front end.

Subcommands: ``analyze`` a track into switch-point JSON/CSV, ``evaluate``
candidate corpora against annotations, ``synth`` test fixtures from track
scripts. Exit codes: 0 success, 2 input error, 3 analysis error.
"""

import argparse
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

from .audio import load_audio, write_wav
from .beats import estimate_beats, load_beats
from .errors import (
    BufferTooShort,
    CorruptStream,
    InvalidScript,
    NoOverlap,
    NoPulse,
    ParseError,
    SwitchpointError,
    TooFewBeats,
    TrackTooShort,
    UnsupportedCodec,
)
from .evaluation import HIT_WINDOW_S, evaluate_corpus, load_annotations
from .pipeline import PipelineConfig, analyze_with_intermediates
from .synth import load_script, render

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_ANALYSIS_ERROR = 3

_INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, UnsupportedCodec,
                 CorruptStream, ParseError, InvalidScript, NoOverlap)
_ANALYSIS_ERRORS = (BufferTooShort, NoPulse, TooFewBeats, TrackTooShort)

_CONFIG_FIELDS = {"peak_threshold", "salience_threshold", "kernel_bars",
                  "peak_window_bars", "period_strong_beats", "hit_window_s",
                  "enabled_rules"}


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(text: str, out: str) -> None:
    if out == "stdout":
        sys.stdout.write(text)
    else:
        _atomic_write(out, text)


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _track_id(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _load_config(path: str, rules: str = None) -> PipelineConfig:
    overrides = {}
    if path:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ParseError(f"{path}: config must be a JSON object")
        unknown = set(doc) - _CONFIG_FIELDS
        if unknown:
            raise ParseError(f"{path}: unknown config fields {sorted(unknown)}")
        overrides.update(doc)
    if rules:
        overrides["enabled_rules"] = tuple(rules.split(","))
    if "enabled_rules" in overrides:
        overrides["enabled_rules"] = tuple(overrides["enabled_rules"])
    try:
        return PipelineConfig(**overrides)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid configuration: {exc}") from exc


# --- analyze -------------------------------------------------------------------

def cmd_analyze(args) -> int:
    timings = {}
    t0 = time.perf_counter()
    buffer = load_audio(args.input)
    timings["decode"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if args.beats:
        grid = load_beats(args.beats, buffer)
    else:
        grid = estimate_beats(buffer)
    timings["beats"] = time.perf_counter() - t0

    config = _load_config(args.config, args.rules)
    t0 = time.perf_counter()
    result, series, curves = analyze_with_intermediates(buffer, grid, config)
    timings["analysis"] = time.perf_counter() - t0

    if args.dump_features:
        _dump_features(args.dump_features, result, series, curves)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "track": {
            "path": args.input,
            "track_id": _track_id(args.input),
            "duration_s": round(buffer.duration_s, 3),
            "sample_rate": buffer.sample_rate,
        },
        "result": {
            "tempo_bpm": round(result.grid["tempo_bpm"], 3),
            "downbeat_offset": result.grid["downbeat_offset"],
            "grid_source": result.grid["source"],
            "period_offset": result.period.offset,
            "period_scores": [round(float(s), 6) for s in result.period.score_per_offset],
            "stage_counts": result.stage_counts,
            "switch_points": [
                {
                    "strong_beat_index": p.strong_beat_index,
                    "time_s": round(p.time_s, 3),
                    "features": sorted(p.contributing_features),
                    "stage": p.stage,
                }
                for p in result.switch_points.points
            ],
            "per_feature_peaks": {
                name: [
                    {"index": int(i), "time_s": round(float(result.strong_beat_times[i]), 3)}
                    for i in indices
                ]
                for name, indices in sorted(result.per_feature_peaks.items())
            },
            "config": result.config.to_dict(),
        },
    }
    if args.timings:
        doc["timings_s"] = {k: round(v, 3) for k, v in timings.items()}

    if args.format == "json":
        _emit(_json_text(doc), args.out)
    else:
        lines = ["strong_beat_index,time_s,stage,features"]
        for p in result.switch_points.points:
            lines.append("%d,%.3f,%s,%s" % (
                p.strong_beat_index, p.time_s, p.stage,
                "|".join(sorted(p.contributing_features))))
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _dump_features(directory, result, series, curves):
    os.makedirs(directory, exist_ok=True)
    times = result.strong_beat_times
    for name, fs in series.items():
        lines = ["interval,time_s," + ",".join(f"v{d}" for d in range(fs.dim))]
        for i, row in enumerate(fs.values):
            lines.append("%d,%.3f," % (i, times[i]) + ",".join("%.6g" % x for x in row))
        _atomic_write(os.path.join(directory, f"feature_{name}.csv"), "\n".join(lines) + "\n")
    names = sorted(curves)
    lines = ["interval,time_s," + ",".join(names)]
    n = len(next(iter(curves.values())).values)
    for i in range(n):
        row = ",".join("%.6g" % curves[name].values[i] for name in names)
        lines.append("%d,%.3f,%s" % (i, times[i], row))
    _atomic_write(os.path.join(directory, "novelty.csv"), "\n".join(lines) + "\n")


# --- evaluate ------------------------------------------------------------------

def _load_candidate_file(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: candidate file must be a JSON object")
    if "schema_version" in doc and "result" in doc:  # analyze output document
        times = [p["time_s"] for p in doc["result"]["switch_points"]]
        return doc["track"]["track_id"], times
    if {"track_id", "candidates_s"} <= set(doc):
        unknown = set(doc) - {"track_id", "candidates_s"}
        if unknown:
            raise ParseError(f"{path}: unknown fields {sorted(unknown)}")
        return str(doc["track_id"]), [float(t) for t in doc["candidates_s"]]
    raise ParseError(f"{path}: neither an analyze document nor a candidate list")


def _load_candidates(path: str, jobs: int) -> dict:
    if os.path.isdir(path):
        files = [os.path.join(path, n) for n in sorted(os.listdir(path))
                 if n.endswith(".json")]
    else:
        files = [path]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_load_candidate_file, files))
    else:
        entries = [_load_candidate_file(f) for f in files]
    return dict(entries)


def cmd_evaluate(args) -> int:
    candidates = _load_candidates(args.candidates, args.jobs)
    annotations = load_annotations(args.annotations)
    report = evaluate_corpus(candidates, annotations, args.window)

    if args.report == "json":
        _emit(_json_text({"schema_version": SCHEMA_VERSION, **report}), args.out)
    elif args.report == "csv":
        lines = ["track_id,hits,false_positives,misses,precision,recall,evaluated_candidates"]
        for tid, row in sorted(report["per_track"].items()):
            lines.append("%s,%d,%d,%d,%s,%s,%d" % (
                tid, row["hits"], row["false_positives"], row["misses"],
                _num(row["precision"]), _num(row["recall"]),
                row["evaluated_candidates"]))
        agg = report["aggregate"]
        lines.append("TOTAL,%d,%d,%d,%s,%s,%d" % (
            agg["hits"], agg["false_positives"], agg["misses"],
            _num(agg["precision"]), _num(agg["recall"]),
            int(agg["candidate_count_mean"] * agg["tracks"])))
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(_format_table(report), args.out)
    return EXIT_OK


def _num(x):
    return "undefined" if x is None else "%.4f" % x


def _format_table(report) -> str:
    lines = []
    header = "%-24s %6s %6s %6s %10s %10s" % ("track", "hits", "fp", "miss", "precision", "recall")
    lines.append(header)
    lines.append("-" * len(header))
    for tid, row in sorted(report["per_track"].items()):
        lines.append("%-24s %6d %6d %6d %10s %10s" % (
            tid[:24], row["hits"], row["false_positives"], row["misses"],
            _num(row["precision"]), _num(row["recall"])))
    agg = report["aggregate"]
    lines.append("-" * len(header))
    lines.append("%-24s %6d %6d %6d %10s %10s" % (
        "micro-average", agg["hits"], agg["false_positives"], agg["misses"],
        _num(agg["precision"]), _num(agg["recall"])))
    lines.append("candidates/track: mean %.1f (std: %.1f, min: %d, max: %d)" % (
        agg["candidate_count_mean"], agg["candidate_count_std"],
        agg["candidate_count_min"], agg["candidate_count_max"]))
    return "\n".join(lines) + "\n"


# --- synth --------------------------------------------------------------------

def cmd_synth(args) -> int:
    script = load_script(args.script)
    rendered = render(script)
    write_wav(args.out, rendered.buffer.samples)
    if args.truth:
        beat_times = rendered.grid.beat_times
        doc = {
            "schema_version": SCHEMA_VERSION,
            "track_id": _track_id(args.out),
            "annotations_s": [round(float(b), 3) for b in rendered.boundaries_s],
            "region_end_s": round(rendered.buffer.duration_s, 3),
            "tempo_bpm": script.tempo_bpm,
            "beat_times_s": [round(float(t), 3) for t in beat_times],
            "beat_positions": [int(i % 4) + 1 for i in range(len(beat_times))],
        }
        _atomic_write(args.truth, _json_text(doc))
    if args.beats_out:
        lines = ["%.6f\t%d" % (t, i % 4 + 1) for i, t in enumerate(rendered.grid.beat_times)]
        _atomic_write(args.beats_out, "\n".join(lines) + "\n")
    return EXIT_OK


# --- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchpoint",
        description="Detect and evaluate DJ switch points in EDM tracks.")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="analyze one track")
    analyze.add_argument("input", help="audio file (PCM WAV)")
    analyze.add_argument("--beats", help="external beat grid TSV (time<TAB>position)")
    analyze.add_argument("--config", help="pipeline config JSON")
    analyze.add_argument("--rules", help="comma-separated subset of novelty,period,salience")
    analyze.add_argument("--dump-features", metavar="DIR",
                         help="write per-feature and novelty CSVs to DIR")
    analyze.add_argument("--out", default="stdout", help="output path or 'stdout'")
    analyze.add_argument("--format", choices=("json", "csv"), default="json")
    analyze.add_argument("--timings", action="store_true",
                         help="include per-stage wall time (non-reproducible)")
    analyze.set_defaults(func=cmd_analyze)

    evaluate = sub.add_parser("evaluate", help="score candidates against annotations")
    evaluate.add_argument("--candidates", required=True, help="file or directory")
    evaluate.add_argument("--annotations", required=True, help="file or directory")
    evaluate.add_argument("--window", type=float, default=HIT_WINDOW_S)
    evaluate.add_argument("--report", choices=("json", "table", "csv"), default="table")
    evaluate.add_argument("--out", default="stdout")
    evaluate.add_argument("--jobs", type=int, default=1, help="parallel candidate loading")
    evaluate.set_defaults(func=cmd_evaluate)

    synth = sub.add_parser("synth", help="render a synthetic test track")
    synth.add_argument("--script", required=True, help="track script JSON")
    synth.add_argument("--out", required=True, help="output WAV path")
    synth.add_argument("--truth", help="ground-truth JSON path")
    synth.add_argument("--beats-out", help="truth beat grid TSV path")
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except _ANALYSIS_ERRORS as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS_ERROR
    except SwitchpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS_ERROR


if __name__ == "__main__":
    sys.exit(main())
