"""Insufficient-slot rate of both allocators as the channel count grows.

    python scripts/sweep_channels.py --rows 4 --cols 4 --duty-cycle 10 --out sweep.csv
"""
import argparse
import csv
import sys
from dataclasses import replace

from laca.simulator import GeneratorConfig, insufficient_slot_rate


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=4)
    ap.add_argument("--cols", type=int, default=4)
    ap.add_argument("--duty-cycle", type=int, default=10)
    ap.add_argument("--slack", type=int, nargs=2, default=(0, 4))
    ap.add_argument("--channels", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    cfg = GeneratorConfig(rows=args.rows, cols=args.cols, slack=tuple(args.slack), duty_cycle=args.duty_cycle)
    f = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["channels", "laca", "urgent"])
    for c in args.channels:
        row = [insufficient_slot_rate(replace(cfg, channels=c), a, args.runs, args.seed) for a in ("laca", "urgent")]
        w.writerow([c] + [f"{r:.4f}" for r in row])
    if f is not sys.stdout:
        f.close()


if __name__ == "__main__":
    main()
