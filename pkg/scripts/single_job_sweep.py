#!/usr/bin/env python3
"""Sweep the duplication threshold for one 10000-task job on 100 machines
(unit mean task duration, tail exponent 2 by default) and write the mean
flowtime/resource per sigma, plus the no-backup baseline, as CSV.

The full 50-repetition sweep takes a few minutes; use --reps for a quick
look.
"""

import argparse
import sys
from pathlib import Path

from specsim.single_job import single_job_sweep


def grid_arg(text: str):
    lo, hi, step = (float(p) for p in text.split(":"))
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    out = []
    k = 0
    while True:
        value = round(lo + k * step, 10)
        if value > hi + 1e-9:
            return out
        out.append(value)
        k += 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", type=grid_arg, default=grid_arg("0.3:3.0:0.3"),
                        metavar="LO:HI:STEP")
    parser.add_argument("--reps", type=int, default=50)
    parser.add_argument("--tasks", type=int, default=10_000)
    parser.add_argument("--machines", type=int, default=100)
    parser.add_argument("--shape", type=float, default=2.0)
    parser.add_argument("--out", default="results/single_job_sweep.csv",
                        metavar="PATH")
    args = parser.parse_args(argv)
    sweep = single_job_sweep(args.grid, reps=args.reps, tasks=args.tasks,
                             machines=args.machines, shape=args.shape)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fp:
        sweep.write_csv(fp)
    print(f"wrote {out}")
    print(f"flowtime minimized at sigma {sweep.best_flowtime_sigma():g}, "
          f"resource at {sweep.best_resource_sigma():g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
