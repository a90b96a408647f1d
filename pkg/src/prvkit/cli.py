"""prvkit command line: demo trace generation, validation, dumps, analyses.

Exit codes: 0 success, 1 validation/parse failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, svg
from .config import TracerConfig
from .errors import ParseError, PrvKitError
from .prv_format import parse_bundle, validate_bundle, write_bundle
from .prv_format import format_record
from .records import CommRecord, EventRecord, StateRecord
from .sampler import SamplerConfig
from .synth import SyntheticSpec, generate_synthetic_trace

ANALYSIS_KINDS = ("parallelism", "timeline", "connectivity", "fractions", "bandwidth")

DEFAULT_BIN_NS = 10_000_000  # 10 ms analysis granularity


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prvkit",
        description="Generate, validate, and analyze Paraver-style trace bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("demo", help="generate the calibrated synthetic trace")
    demo.add_argument("--out", default="demo", help="output basename (default: demo)")
    demo.add_argument("--tasks", type=int, default=16)
    demo.add_argument("--iterations", type=int, default=48)
    demo.add_argument("--messages", type=int, default=42,
                      help="messages per neighbor pair per iteration")
    demo.add_argument("--message-size", type=int, default=5898)
    demo.add_argument("--noise", type=float, default=0.05)
    demo.add_argument("--topology", choices=("ring", "nearest-neighbor-2d"), default="ring")
    demo.add_argument("--seed", type=int, default=42)
    demo.add_argument("--sample-period", type=int, default=None, metavar="NS",
                      help="attach a time-mode sampler with this period")
    demo.add_argument("--sample-jitter", type=float, default=0.0)
    demo.add_argument("--sample-counter-threshold", type=int, default=None,
                      help="attach a counter-mode sampler instead")
    demo.add_argument("--full-report", action="store_true",
                      help="run generate -> write -> parse -> validate -> all analyses")

    val = sub.add_parser("validate", help="structurally validate a trace bundle")
    val.add_argument("base", help="bundle basename (without extension)")

    dump = sub.add_parser("dump", help="print bundle contents")
    dump.add_argument("base")
    group = dump.add_mutually_exclusive_group()
    group.add_argument("--pcf", action="store_true", help="print the event dictionary")
    group.add_argument("--row", action="store_true", help="print the row labels")
    group.add_argument("--records", action="store_true", help="print every record")

    ana = sub.add_parser("analyze", help="run one analysis over a bundle")
    ana.add_argument("kind", choices=ANALYSIS_KINDS)
    ana.add_argument("base")
    ana.add_argument("--bin", type=int, default=DEFAULT_BIN_NS, help="bin width in ns")
    ana.add_argument("--window", default=None, metavar="T0:T1",
                     help="restrict to [T0, T1) ns")
    ana.add_argument("--event-type", type=int, default=None,
                     help="routine event type (default: configured MPI-call type)")
    ana.add_argument("--derive-states-from-routine-events", action="store_true",
                     help="parallelism only: treat time inside routine blocks as idle")
    ana.add_argument("--csv", default=None, metavar="PATH")
    ana.add_argument("--svg", default=None, metavar="PATH")
    return parser


def _parse_window(text: str | None) -> tuple[int, int] | None:
    if text is None:
        return None
    try:
        t0, t1 = text.split(":")
        return int(t0), int(t1)
    except ValueError:
        print(f"invalid --window {text!r}, expected T0:T1 in ns", file=sys.stderr)
        raise SystemExit(2) from None


def cmd_demo(args) -> int:
    spec = SyntheticSpec(
        n_tasks=args.tasks,
        n_iterations=args.iterations,
        messages_per_neighbor_pair=args.messages,
        message_size=args.message_size,
        noise_sigma=args.noise,
        topology=args.topology,
        seed=args.seed,
    )
    sampler_config = None
    if args.sample_counter_threshold is not None:
        sampler_config = SamplerConfig(
            mode="counter", counter_threshold=args.sample_counter_threshold
        )
    elif args.sample_period is not None:
        sampler_config = SamplerConfig(
            mode="time", period_ns=args.sample_period, jitter_fraction=args.sample_jitter
        )
    bundle = generate_synthetic_trace(spec, sampler_config)
    write_bundle(bundle, args.out)
    print(f"wrote {args.out}.prv/.pcf/.row "
          f"({len(bundle.records)} records, {bundle.total_time_ns / 1e9:.3f} s)")
    if args.full_report:
        return _full_report(args.out)
    return 0


def _full_report(base: str) -> int:
    bundle = parse_bundle(base)
    report = validate_bundle(bundle)
    if not report.ok:
        print(report)
        return 1
    print("validation: ok")
    routine = TracerConfig.load().routine_event_type
    outdir = Path(base).parent

    par = analysis.instantaneous_parallelism(bundle, DEFAULT_BIN_NS)
    timeline = analysis.call_timeline(bundle, routine)
    conn = analysis.connectivity_matrix(bundle)
    fracs = analysis.routine_time_fractions(bundle, routine)
    bw = analysis.node_bandwidth(bundle, DEFAULT_BIN_NS)

    for name, result in (
        ("parallelism", par),
        ("timeline", timeline),
        ("connectivity", conn),
        ("fractions", fracs),
        ("bandwidth", bw),
    ):
        analysis.export_csv(result, str(outdir / f"{Path(base).name}_{name}.csv"))
        svg.export_svg(result, str(outdir / f"{Path(base).name}_{name}.svg"))

    print(f"parallelism: max {max(par.values):.2f}, min {min(par.values):.2f}")
    _print_fractions(fracs)
    peak = max((max(s.values) for s in bw if s.values), default=0.0)
    print(f"bandwidth peak: {peak:.2f} MB/s")
    print(f"messages total: {conn.total}")
    print(f"reports written next to {base}.prv")
    return 0


def _print_fractions(stats) -> None:
    for code in sorted(stats.fractions):
        print(
            f"fraction {stats.labels[code]}: mean {stats.mean(code):.4f} "
            f"(min {stats.min(code):.4f}, max {stats.max(code):.4f})"
        )


def cmd_validate(args) -> int:
    try:
        bundle = parse_bundle(args.base)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    report = validate_bundle(bundle)
    if report.ok:
        print(f"{args.base}: valid ({len(bundle.records)} records)")
        return 0
    print(report, file=sys.stderr)
    return 1


def cmd_dump(args) -> int:
    try:
        bundle = parse_bundle(args.base)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    if args.pcf:
        for code in sorted(bundle.registry.entries):
            desc, labels = bundle.registry.entries[code]
            print(f"{code}\t{desc}")
            for value in sorted(labels):
                print(f"\t{value}\t{labels[value]}")
    elif args.row:
        for level, names in bundle.row_labels.items():
            print(f"{level} ({len(names)})")
            for name in names:
                print(f"\t{name}")
    elif args.records:
        for rec in bundle.records:
            print(format_record(rec))
    else:
        states = sum(1 for r in bundle.records if isinstance(r, StateRecord))
        events = sum(1 for r in bundle.records if isinstance(r, EventRecord))
        comms = sum(1 for r in bundle.records if isinstance(r, CommRecord))
        print(f"capture: {bundle.capture_time:%d/%m/%y %H:%M}")
        print(f"duration: {bundle.total_time_ns} ns")
        print(f"nodes: {len(bundle.resources.nodes)}, "
              f"applications: {len(bundle.process.applications)}, "
              f"tasks: {bundle.process.total_tasks}, "
              f"threads: {bundle.process.total_threads}")
        print(f"records: {states} states, {events} events, {comms} comms")
    return 0


def cmd_analyze(args) -> int:
    try:
        bundle = parse_bundle(args.base)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    report = validate_bundle(bundle)
    if not report.ok:
        print(report, file=sys.stderr)
        return 1
    window = _parse_window(args.window)
    routine = args.event_type
    if routine is None:
        routine = TracerConfig.load().routine_event_type

    try:
        if args.kind == "parallelism":
            result = analysis.instantaneous_parallelism(
                bundle,
                args.bin,
                window=window,
                derive_from_event_type=routine if args.derive_states_from_routine_events else None,
            )
            print(f"parallelism: max {max(result.values):.2f}, min {min(result.values):.2f} "
                  f"over {len(result.values)} bins")
        elif args.kind == "timeline":
            result = analysis.call_timeline(bundle, routine)
            blocks = sum(len(r) for r in result.rows.values())
            print(f"timeline: {blocks} blocks over {len(result.rows)} rows")
            if result.truncated:
                print(f"note: {len(result.truncated)} row(s) had an open block at trace end")
        elif args.kind == "connectivity":
            result = analysis.connectivity_matrix(bundle)
            print(f"connectivity: {result.total} messages, "
                  f"{int((result.counts > 0).sum())} populated cells")
        elif args.kind == "fractions":
            result = analysis.routine_time_fractions(bundle, routine, window=window)
            _print_fractions(result)
        else:
            result = analysis.node_bandwidth(bundle, args.bin)
            peak = max((max(s.values) for s in result if s.values), default=0.0)
            print(f"bandwidth: peak {peak:.2f} MB/s across {len(result)} node(s)")
    except PrvKitError as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return 1

    if args.csv:
        analysis.export_csv(result, args.csv)
        print(f"csv written to {args.csv}")
    if args.svg:
        svg.export_svg(result, args.svg)
        print(f"svg written to {args.svg}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "demo": cmd_demo,
        "validate": cmd_validate,
        "dump": cmd_dump,
        "analyze": cmd_analyze,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
