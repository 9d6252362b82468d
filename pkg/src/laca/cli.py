"""Command-line entry point.

Exit codes: 0 success, 1 infeasible allocation, 2 usage or input error,
3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import allocator, simulator
from .allocator import ALLOCATORS, InsufficientSlots
from .document import parse_instance, quality_line
from .linkquality import estimate_quality_map, parse_curve, parse_traces
from .model import InvalidInstance
from .oracle import SearchSpaceExceeded, exact_path_pdr, exhaustive_feasible

log = logging.getLogger("laca")

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class InvariantViolation(Exception):
    pass


def _write(path: str, text: str) -> None:
    # newline="" keeps output byte-identical across platforms
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def _load(path: str):
    return parse_instance(Path(path).read_text(encoding="utf-8"))


def _channel_range(spec: str) -> range:
    try:
        lo, hi = (int(x) for x in spec.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {spec!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"channel range {spec} must satisfy 1 <= A <= B")
    return range(lo, hi + 1)


def cmd_allocate(args) -> int:
    doc = _load(args.instance)
    try:
        sched = ALLOCATORS[args.algo](doc.instance, doc.quality, doc.params)
    except InsufficientSlots as e:
        _write(args.out, allocator.report_to_csv(e.report))
        for f in e.report.failures:
            print(f"no available slot/channel for link {f.link} (path {f.path}, hop {f.hop}, {f.reason})",
                  file=sys.stderr)
        return EXIT_INFEASIBLE
    problems = allocator.verify_schedule(sched, doc.instance, doc.params, doc.quality)
    if problems:
        raise InvariantViolation("; ".join(problems))
    _write(args.out, allocator.schedule_to_csv(sched))
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = _load(args.instance)
    sched = allocator.schedule_from_csv(Path(args.schedule).read_text(encoding="utf-8"))
    sim = simulator.SimParams(trials=args.trials, master_seed=args.seed,
                              drop_at_deadline=not args.no_drop)
    report = simulator.simulate(doc.instance, sched, doc.quality, sim, doc.params, workers=args.workers)
    _write(args.out, simulator.report_to_csv(report))
    return EXIT_OK


def cmd_oracle(args) -> int:
    doc = _load(args.instance)
    if args.which == "pdr":
        sched = allocator.schedule_from_csv(Path(args.schedule).read_text(encoding="utf-8"))
        if args.path not in doc.instance.path_map:
            raise ValueError(f"unknown path {args.path}")
        res = exact_path_pdr(doc.instance, sched, doc.quality, args.path)
        print(f"{res.path},{res.probability:.12f}")
        return EXIT_OK
    ok, _ = exhaustive_feasible(doc.instance, doc.quality, doc.params, bound=args.bound)
    print("feasible" if ok else "infeasible")
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    cfg = simulator.parse_generator(Path(args.generator).read_text(encoding="utf-8"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["channels", "insufficient_rate"])
    for c in args.channels:
        rate = simulator.insufficient_slot_rate(replace(cfg, channels=c), args.algo, args.runs, args.seed)
        log.info("channels=%d rate=%.4f", c, rate)
        w.writerow([c, f"{rate:.6f}"])
    _write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_estimate(args) -> int:
    doc = _load(args.instance)
    traces = parse_traces(Path(args.traces).read_text(encoding="utf-8"))
    curve = parse_curve(Path(args.curve).read_text(encoding="utf-8"))
    qmap = estimate_quality_map(traces, curve, doc.instance, doc.quality.default)
    observed = sorted({(t.link, t.channel, t.slot) for t in traces},
                      key=lambda x: (qmap.index[x[0]], x[1], x[2]))
    text = "".join(quality_line(l, c, s, qmap.q(l, c, s)) + "\n" for l, c, s in observed)
    _write(args.out, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="laca", description="Deadline-driven multichannel TDMA scheduling.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="compute a schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--algo", choices=sorted(ALLOCATORS), default="laca")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="Monte Carlo evaluation of a schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-drop", action="store_true", help="keep retrying overdue packets")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="exact PDR or exhaustive feasibility")
    osub = p.add_subparsers(dest="which", required=True)
    q = osub.add_parser("pdr")
    q.add_argument("--instance", required=True)
    q.add_argument("--schedule", required=True)
    q.add_argument("--path", required=True)
    q.set_defaults(func=cmd_oracle)
    q = osub.add_parser("feasible")
    q.add_argument("--instance", required=True)
    q.add_argument("--bound", type=int, default=10**7)
    q.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="insufficient-slot rate over generated instances")
    p.add_argument("--generator", required=True)
    p.add_argument("--channels", type=_channel_range, required=True, metavar="A..B")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algo", choices=sorted(ALLOCATORS), default="laca")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("estimate", help="link quality from RSSI traces")
    p.add_argument("--traces", required=True)
    p.add_argument("--curve", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as e:
        print(f"internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InvalidInstance, ValueError, KeyError, IndexError, OSError, SearchSpaceExceeded) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
