"""Resource utilization and expected energy of both allocators.

Energy is the mean number of transmissions per packet cycle from a short simulation.
"""
import argparse
import csv
import sys
from dataclasses import replace

from laca.allocator import ALLOCATORS, InsufficientSlots
from laca.simulator import GeneratorConfig, SimParams, generate_instance, resource_utilization, run_seeds, simulate


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=4)
    ap.add_argument("--cols", type=int, default=3)
    ap.add_argument("--duty-cycle", type=int, default=8)
    ap.add_argument("--channels", type=int, default=4)
    ap.add_argument("--instances", type=int, default=30)
    ap.add_argument("--trials", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    cfg = GeneratorConfig(rows=args.rows, cols=args.cols, duty_cycle=args.duty_cycle, channels=args.channels)
    f = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["instance", "algo", "utilization", "backups", "mean_tx", "mean_retx"])
    for i, s in enumerate(run_seeds(args.seed, args.instances)):
        inst, q = generate_instance(replace(cfg, seed=s))
        for algo in ("laca", "urgent"):
            try:
                sched = ALLOCATORS[algo](inst, q)
            except InsufficientSlots:
                w.writerow([i, algo, "", "", "", ""])
                continue
            rep = simulate(inst, sched, q, SimParams(trials=args.trials, master_seed=i))
            w.writerow([i, algo, f"{resource_utilization(sched, inst):.6f}", sched.n_backups,
                        f"{rep.total_tx / rep.trials:.4f}", f"{rep.total_retx / rep.trials:.4f}"])
    if f is not sys.stdout:
        f.close()


if __name__ == "__main__":
    main()
