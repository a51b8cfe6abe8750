"""Command-line front end.

    crowdcount analyze CAPTURE [--window 60] [--threshold 50] [--ie-filter 0,3]
    crowdcount simulate X Y [--trials 10000] [--seed S]
    crowdcount tables {table2,table3} [--trials 10000] [--seed S]
    crowdcount synth SCENARIO OUTPUT [--link-type 105|127] [--fcs]

Reports go to stdout as CSV (default) or JSON; diagnostics go to stderr.
Exit status: 0 on success, 1 on usage errors, 2 on input errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from typing import Iterable, Optional, Sequence

from .frames import DEFAULT_IE_FILTER
from .ingest import CaptureError, IngestStats, iter_frames, read_capture
from .simulator import (DEFAULT_SEED, MAX_INCREMENT, PUBLISHED_TRIALS, TrialConfig,
                        TrialHistogram, published_counts, run_monte_carlo, table_configs)
from .synth import InvalidScenario, load_scenario, synth_frames, write_capture
from .truesight import DEFAULT_THRESHOLD, ClusterConfig, truesight_estimate
from .vision import OutOfOrderFrames, iter_windows, vision_estimate

logger = logging.getLogger("crowdcount")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2

ANALYZE_COLUMNS = ["window_start", "ap_count", "connected", "vision_unconnected",
                   "truesight_unconnected", "vision_total", "truesight_total",
                   "randomized_share"]
HISTOGRAM_COLUMNS = ["X", "Y", "estimate", "count", "N", "seed"]
TABLE_COLUMNS = HISTOGRAM_COLUMNS + ["published_count", "abs_deviation"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ie_filter(text: str) -> frozenset[int]:
    try:
        tags = frozenset(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated tag list: {text!r}")
    if any(not 0 <= t <= 255 for t in tags):
        raise argparse.ArgumentTypeError("IE tags must be in 0..255")
    return tags


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _emit(rows: list[dict], columns: list[str], fmt: str, out, extra: Optional[dict] = None):
    if fmt == "json":
        doc = {"rows": rows}
        if extra:
            doc.update(extra)
        json.dump(doc, out, indent=2)
        out.write("\n")
    else:
        writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# analyze

def analyze_rows(frames, window: float, config: ClusterConfig,
                 ie_filter: Iterable[int], literal_sum: bool = False) -> Iterable[dict]:
    """One report row per tumbling window."""
    ie_filter = frozenset(ie_filter)
    for start_us, bucket in iter_windows(frames, window):
        vision = vision_estimate(bucket, ie_filter)
        sight = truesight_estimate(bucket, config, ie_filter)
        probing = vision.classification.probing_set
        share = (sum(m.is_locally_administered for m in probing) / len(probing)
                 if probing else 0.0)
        row = {
            "window_start": round(start_us / 1e6, 6),
            "ap_count": len(vision.classification.ap_set),
            "connected": vision.connected_devices,
            "vision_unconnected": vision.unconnected_devices,
            "truesight_unconnected": sight.unconnected_devices,
            "vision_total": vision.total,
            "truesight_total": sight.total,
            "randomized_share": round(share, 6),
        }
        if literal_sum:
            row["literal_total"] = vision.unconnected_devices + sight.unconnected_devices
        if vision.shared_fingerprints:
            logger.warning("window %s: %d fingerprint(s) seen from both connected and "
                           "probing-only addresses; possible double count",
                           row["window_start"], len(vision.shared_fingerprints))
        yield row


def cmd_analyze(args) -> int:
    stats = IngestStats()
    config = ClusterConfig(args.threshold)
    columns = ANALYZE_COLUMNS + (["literal_total"] if args.literal_sum else [])
    try:
        with read_capture(args.input) as reader:
            frames = iter_frames(reader, stats, assume_fcs=args.fcs)
            rows = analyze_rows(frames, args.window, config, args.ie_filter, args.literal_sum)
            if args.format == "csv":
                writer = csv.DictWriter(sys.stdout, fieldnames=columns, lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow(row)
            else:
                _emit(list(rows), columns, "json", sys.stdout)
    except (CaptureError, OutOfOrderFrames, OSError) as exc:
        sys.stdout.flush()
        print(f"crowdcount analyze: {type(exc).__name__}: {exc}", file=sys.stderr)
        print(f"ingest: {stats.summary()}", file=sys.stderr)
        return EXIT_INPUT
    print(f"ingest: {stats.summary()}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / tables

def histogram_rows(hist: TrialHistogram) -> list[dict]:
    c = hist.config
    return [{"X": c.X, "Y": c.Y, "estimate": x, "count": n, "N": c.N, "seed": c.seed}
            for x, n in hist.counts.items()]


def _summary(hist: TrialHistogram) -> dict:
    return {"X": hist.config.X, "Y": hist.config.Y, "N": hist.trials,
            "correct": hist.correct, "within_one": hist.within_one,
            "correct_rate": round(hist.correct_rate, 6),
            "within_one_rate": round(hist.within_one_rate, 6)}


def cmd_simulate(args) -> int:
    config = TrialConfig(args.X, args.Y, args.trials, args.threshold, args.seed,
                         args.max_increment)
    hist = run_monte_carlo(config)
    summary = _summary(hist)
    _emit(histogram_rows(hist), HISTOGRAM_COLUMNS, args.format, sys.stdout,
          {"summary": summary})
    print(f"correct_rate={summary['correct_rate']} "
          f"within_one_rate={summary['within_one_rate']}", file=sys.stderr)
    return EXIT_OK


def table_rows(which: str, N: int, seed: int, threshold: int):
    rows, summaries = [], []
    for config in table_configs(which, N, seed, threshold):
        hist = run_monte_carlo(config)
        published = published_counts(which, config)
        # scale the published counts if N differs from their 10,000 trials
        scale = N / PUBLISHED_TRIALS
        for x in sorted(set(hist.counts) | set(published)):
            observed = hist.counts.get(x, 0)
            expected = round(published.get(x, 0) * scale)
            rows.append({"X": config.X, "Y": config.Y, "estimate": x, "count": observed,
                         "N": N, "seed": seed, "published_count": expected,
                         "abs_deviation": abs(observed - expected)})
        summary = _summary(hist)
        summary["published_correct_rate"] = round(published.get(config.X, 0) / PUBLISHED_TRIALS, 6)
        summary["published_within_one_rate"] = round(
            sum(n for x, n in published.items() if abs(x - config.X) <= 1) / PUBLISHED_TRIALS, 6)
        summaries.append(summary)
    return rows, summaries


def cmd_tables(args) -> int:
    rows, summaries = table_rows(args.which, args.trials, args.seed, args.threshold)
    _emit(rows, TABLE_COLUMNS, args.format, sys.stdout, {"summary": summaries})
    for s in summaries:
        print(f"X={s['X']} Y={s['Y']} correct_rate={s['correct_rate']} "
              f"(published {s['published_correct_rate']}) within_one_rate={s['within_one_rate']} "
              f"(published {s['published_within_one_rate']})", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth

def cmd_synth(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except InvalidScenario as exc:
        print(f"crowdcount synth: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"crowdcount synth: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    frames = synth_frames(scenario)
    try:
        count = write_capture(frames, args.output, args.link_type, fcs=args.fcs)
    except OSError as exc:
        print(f"crowdcount synth: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(count)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crowdcount",
                     description="Count nearby Wi-Fi devices despite MAC randomization.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fmt = dict(choices=["csv", "json"], default="csv", help="report format (default csv)")

    p = sub.add_parser("analyze", help="count devices per time window in a pcap")
    p.add_argument("input")
    p.add_argument("--window", type=_positive_float, default=60.0,
                   help="window length in seconds (default 60)")
    p.add_argument("--threshold", type=_positive_int, default=DEFAULT_THRESHOLD)
    p.add_argument("--ie-filter", type=_ie_filter, default=DEFAULT_IE_FILTER,
                   help="IE tags left out of fingerprints (default 0,3)")
    p.add_argument("--fcs", action="store_true",
                   help="frames end in an FCS when the capture does not say")
    p.add_argument("--literal-sum", action="store_true",
                   help="also report vision_unconnected + truesight_unconnected")
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo histogram for one (X, Y)")
    p.add_argument("X", type=_positive_int, help="number of devices")
    p.add_argument("Y", type=_positive_int, help="probe requests per device")
    p.add_argument("-N", "--trials", type=_positive_int, default=PUBLISHED_TRIALS)
    p.add_argument("--threshold", type=_positive_int, default=DEFAULT_THRESHOLD)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--max-increment", type=_positive_int, default=MAX_INCREMENT)
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tables", help="reproduce one of the published result tables")
    p.add_argument("which", choices=["table2", "table3"])
    p.add_argument("-N", "--trials", type=_positive_int, default=PUBLISHED_TRIALS)
    p.add_argument("--threshold", type=_positive_int, default=DEFAULT_THRESHOLD)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--format", **fmt)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("synth", help="write a synthetic capture from a scenario file")
    p.add_argument("scenario", help="scenario file, or a bundled name such as paper-440")
    p.add_argument("output")
    p.add_argument("--link-type", type=int, choices=[105, 127], default=127)
    p.add_argument("--fcs", action="store_true", help="append a CRC-32 FCS to each frame")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"crowdcount {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
