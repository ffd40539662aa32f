"""Command-line front end.

Exit codes: 0 success, 1 I/O, config or data error (and failed scenario
expectations), 2 usage, 3 a requested test lacks the settings it needs.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import formats
from .analytic import MODELS
from .bellstats import TABLE_TESTS, subtract_accidentals
from .errors import BellAccError, ConfigError, MissingSettingError
from .harness import DEFAULT_SEED, SCENARIOS
from .simulator import (
    NS,
    build_time_spectrum,
    count_coincidences,
    count_true_coincidences,
    estimate_accidentals_delay,
    estimate_accidentals_singles,
    run_angle_scan,
    simulate_run,
)

EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_INCOMPLETE = 0, 1, 2, 3
DEFAULT_ANGLES = "0,22.5,45,67.5,90"


def _angles(text):
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle list: {text!r}") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f"bad angle list: {text!r}")
    return values


def _tests(text):
    names = [t.strip() for t in text.split(",") if t.strip()]
    unknown = [n for n in names if n not in TABLE_TESTS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(
            f"unknown test(s) {unknown}; choose from {','.join(TABLE_TESTS)}")
    return names


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


# ------------------------------------------------------------------ predict

def cmd_predict(args) -> int:
    model = MODELS[args.model]()
    print(formats.FORMAT_LINE)
    print("phi_deg,probability")
    for phi in args.angles:
        print(f"{formats.fmt_number(phi)},{model.coincidence(math.radians(phi)):.9f}")
    return EXIT_OK


# ----------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    try:
        source, det_a, det_b, run = formats.read_config(args.config)
    except ConfigError as exc:
        _err(f"config {exc}")
        return EXIT_DATA
    except OSError as exc:
        _err(str(exc))
        return EXIT_DATA
    if args.seed is not None:
        if args.seed < 0:
            _err("config run.master_seed: must be >= 0")
            return EXIT_DATA
        run = replace(run, master_seed=args.seed)

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        stream_a, stream_b = simulate_run(source, det_a, det_b, run)
        formats.write_stream(out / "streamA.tsv", stream_a)
        formats.write_stream(out / "streamB.tsv", stream_b)
        table = run_angle_scan(source, det_a, det_b, run, args.angles)
        formats.write_counts(out / "counts.csv", table)
    except OSError as exc:
        _err(str(exc))
        return EXIT_DATA
    print(f"wrote {out / 'streamA.tsv'} ({len(stream_a)} detections)")
    print(f"wrote {out / 'streamB.tsv'} ({len(stream_b)} detections)")
    print(f"wrote {out / 'counts.csv'}")
    return EXIT_OK


# ------------------------------------------------------------------ analyze

def _fmt_limit(v):
    return format(v, ".6g")


def _run_tests(table, names, precision):
    """Print one line per test; returns the names that lacked data."""
    missing = []
    for name in names:
        try:
            r = TABLE_TESTS[name](table)
        except BellAccError as exc:
            _err(f"{name}: {exc}")
            missing.append(name)
            continue
        print(f"{name},{r.value:.{precision}f},{_fmt_limit(r.limit)},{str(r.violated).lower()}")
    return missing


def _write_curve(path, table):
    lines = [formats.FORMAT_LINE, "phi_deg,rate"]
    lines += [f"{formats.fmt_number(k)},{formats.fmt_number(v)}" for k, v in sorted(table.entries.items())]
    Path(path).write_text("\n".join(lines) + "\n")


def _analyze_counts(args) -> int:
    try:
        table = formats.read_counts(args.counts)
    except formats.FormatError as exc:
        _err(f"{args.counts}: {exc}")
        return EXIT_DATA
    except (OSError, BellAccError) as exc:
        _err(f"{args.counts}: {exc}")
        return EXIT_DATA

    missing = []
    if args.subtract_accidentals:
        try:
            adjusted = subtract_accidentals(table)
        except MissingSettingError as exc:
            _err(f"cannot subtract accidentals: {exc}")
            return EXIT_INCOMPLETE
        except BellAccError as exc:
            _err(f"cannot subtract accidentals: {exc}")
            return EXIT_DATA
        print("# raw")
        missing += _run_tests(table, args.tests, args.precision)
        print("# adjusted")
        missing += _run_tests(adjusted, args.tests, args.precision)
        curve_table = adjusted
    else:
        missing += _run_tests(table, args.tests, args.precision)
        curve_table = table

    if args.emit_curve:
        try:
            _write_curve(args.emit_curve, curve_table)
        except OSError as exc:
            _err(str(exc))
            return EXIT_DATA
    return EXIT_INCOMPLETE if missing else EXIT_OK


def _analyze_streams(args) -> int:
    path_a, path_b = args.streams
    try:
        stream_a = formats.read_stream(path_a)
        stream_b = formats.read_stream(path_b)
    except formats.FormatError as exc:
        _err(str(exc))
        return EXIT_DATA
    except OSError as exc:
        _err(str(exc))
        return EXIT_DATA

    lo, hi, delay = args.window_lo * NS, args.window_hi * NS, args.delay * NS
    if not lo < hi:
        _err("window-lo must be below window-hi")
        return EXIT_USAGE
    if args.duration is not None:
        duration = args.duration * NS
    else:
        ts = [s.timestamps for s in (stream_a, stream_b) if len(s)]
        duration = (max(t[-1] for t in ts) - min(t[0] for t in ts)) if ts else 0.0

    try:
        accidentals = estimate_accidentals_delay(stream_a, stream_b, delay, lo, hi)
    except BellAccError as exc:
        _err(str(exc))
        return EXIT_USAGE
    print(f"coincidences,{count_coincidences(stream_a, stream_b, lo, hi)}")
    if stream_a.has_truth and stream_b.has_truth:
        print(f"true_coincidences,{count_true_coincidences(stream_a, stream_b, lo, hi)}")
    print(f"accidentals_delay,{accidentals}")
    if duration > 0:
        singles = estimate_accidentals_singles(len(stream_a) / duration, len(stream_b) / duration,
                                               lo, hi, duration)
        print(f"accidentals_singles,{singles:.{args.precision}f}")

    if args.spectrum:
        spec = build_time_spectrum(stream_a, stream_b, args.range_lo * NS, args.range_hi * NS,
                                   args.bin_width * NS)
        lines = [formats.FORMAT_LINE,
                 "bin_lo_ns,bin_hi_ns,count" + (",true" if spec.true_bins is not None else "")]
        edges = spec.edges / NS
        for i, c in enumerate(spec.bins.tolist()):
            row = f"{edges[i]:.6g},{edges[i + 1]:.6g},{c}"
            if spec.true_bins is not None:
                row += f",{int(spec.true_bins[i])}"
            lines.append(row)
        try:
            Path(args.spectrum).write_text("\n".join(lines) + "\n")
        except OSError as exc:
            _err(str(exc))
            return EXIT_DATA
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.streams:
        return _analyze_streams(args)
    if not args.counts:
        _err("give a counts file or --streams A B")
        return EXIT_USAGE
    return _analyze_counts(args)


# ---------------------------------------------------------------- reproduce

def cmd_reproduce(args) -> int:
    report = SCENARIOS[args.scenario](seed=args.seed)
    print(report.render())
    return EXIT_OK if report.passed else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bellacc", description=(
        "Simulate and analyze polarization Bell-test experiments, with and "
        "without accidental-coincidence subtraction."))
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("predict", help="ideal coincidence probability vs relative angle")
    pp.add_argument("--model", required=True, choices=sorted(MODELS))
    pp.add_argument("--angles", required=True, type=_angles, help="comma-separated degrees")
    pp.set_defaults(func=cmd_predict)

    ps = sub.add_parser("simulate", help="simulate detector streams and an angle scan")
    ps.add_argument("config", help="INI config document")
    ps.add_argument("--seed", type=int, default=None, help="overrides run.master_seed")
    ps.add_argument("--out", default=".", help="output directory")
    ps.add_argument("--angles", type=_angles, default=_angles(DEFAULT_ANGLES),
                    help=f"relative angles for counts.csv (default {DEFAULT_ANGLES})")
    ps.set_defaults(func=cmd_simulate)

    pa = sub.add_parser("analyze", help="Bell statistics from counts.csv, or counts from streams")
    pa.add_argument("counts", nargs="?", help="counts.csv")
    pa.add_argument("--subtract-accidentals", action="store_true")
    pa.add_argument("--tests", type=_tests, default=list(TABLE_TESTS),
                    help="comma-separated subset of " + ",".join(TABLE_TESTS))
    pa.add_argument("--precision", type=int, default=3, help="decimals in printed values")
    pa.add_argument("--emit-curve", metavar="PATH", help="write phi_deg,rate CSV")
    pa.add_argument("--streams", nargs=2, metavar=("A", "B"), help="stream .tsv files")
    pa.add_argument("--window-lo", type=float, default=-3.0, help="ns")
    pa.add_argument("--window-hi", type=float, default=17.0, help="ns")
    pa.add_argument("--delay", type=float, default=100.0, help="ns, for delayed-stream accidentals")
    pa.add_argument("--duration", type=float, default=None,
                    help="ns, for singles rates (default: span of the timestamps)")
    pa.add_argument("--spectrum", metavar="PATH", help="write the time spectrum CSV")
    pa.add_argument("--range-lo", type=float, default=-100.0, help="ns")
    pa.add_argument("--range-hi", type=float, default=100.0, help="ns")
    pa.add_argument("--bin-width", type=float, default=1.0, help="ns")
    pa.set_defaults(func=cmd_analyze)

    pr = sub.add_parser("reproduce", help="run a reproduction scenario")
    pr.add_argument("scenario", choices=sorted(SCENARIOS))
    pr.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pr.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
