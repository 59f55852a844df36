"""Command-line front end.

Four subcommands:

``simulate``
    Run every (policy, arrival-rate, seed) cell of a JSON experiment
    config, write per-cell report files plus a summary CSV, and print the
    summary table.
``threshold``
    Print the load cutoff below which two-copy cloning beats running
    singles, as a JSON report, for the configured cluster and workload.
``sweep-sigma``
    Tabulate the straggler-threshold objective over a sigma grid as CSV on
    stdout, for either the per-task detection model or the heavy-traffic
    resource model.
``solve-p2``
    Solve one clone-count allocation batch with the dual method, print the
    assignment as JSON, and write the convergence trace CSV.

Exit codes: 0 success, 2 configuration/usage errors, 1 runtime failures
(diverging moments, saturation, non-convergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .cloning import (BatchJob, PendingBatch, primal_objective, solve_dual)
from .config import (_check_mapping, _get, _integer, _number, load_config)
from .detection import DEFAULT_PROGRESS, expected_task_cost, optimal_c
from .dist import ParetoDist
from .driver import run_experiment
from .errors import ConfigError, DivergingMomentError, SpecsimError
from .heavy_load import expected_resource
from .regime import cutoff

__all__ = ["main", "build_parser"]

SWEEP_CAP = 8


def _grid(text: str) -> tuple[float, float, float]:
    """Parse a LO:HI:STEP grid argument."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected LO:HI:STEP, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected numeric LO:HI:STEP, got {text!r}") from None
    if step <= 0:
        raise argparse.ArgumentTypeError(
            f"grid step must be positive, got {step:g}")
    if hi < lo:
        raise argparse.ArgumentTypeError(
            f"grid upper bound {hi:g} is below lower bound {lo:g}")
    return lo, hi, step


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsim",
        description="Cluster-scheduling simulator and straggler-mitigation "
                    "optimizer.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser(
        "simulate", help="run the configured experiment grid")
    sim.add_argument("--config", required=True, metavar="PATH",
                     help="experiment configuration JSON")
    sim.add_argument("--out", metavar="DIR",
                     help="output directory (overrides the config's "
                          "\"output\" key)")
    sim.add_argument("--workers", type=int, metavar="N",
                     help="parallel worker processes (default: CPU count)")
    sim.add_argument("--trace", action="store_true",
                     help="also write per-cell event traces (JSONL)")
    sim.set_defaults(func=_cmd_simulate)

    thr = sub.add_parser(
        "threshold", help="compute the cloning/no-speculation load cutoff")
    thr.add_argument("--config", required=True, metavar="PATH",
                     help="experiment configuration JSON")
    thr.set_defaults(func=_cmd_threshold)

    swp = sub.add_parser(
        "sweep-sigma", help="tabulate the threshold objective over a grid")
    swp.add_argument("--model", required=True, choices=("detect", "ese"),
                     help="objective: per-task detection cost or "
                          "heavy-traffic resource rate")
    swp.add_argument("--alpha", required=True, type=float,
                     help="task-duration tail exponent (must exceed 1)")
    swp.add_argument("--grid", required=True, type=_grid,
                     metavar="LO:HI:STEP", help="sigma grid")
    swp.set_defaults(func=_cmd_sweep_sigma)

    p2 = sub.add_parser(
        "solve-p2", help="solve one clone-count allocation batch")
    p2.add_argument("--config", required=True, metavar="PATH",
                    help="batch description JSON")
    p2.add_argument("--out", default=".", metavar="DIR",
                    help="directory for the convergence trace CSV "
                         "(default: current directory)")
    p2.set_defaults(func=_cmd_solve_p2)
    return parser


def _print_summary(summary_path: Path) -> None:
    with open(summary_path, newline="") as fp:
        rows = list(csv.reader(fp))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(cell.ljust(w)
                        for cell, w in zip(row, widths)).rstrip())


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    out = args.out if args.out is not None else cfg.output
    if out is None:
        raise ConfigError(
            "no output directory: pass --out or set the \"output\" key",
            field="output")
    if args.workers is not None and args.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {args.workers}")
    summary = run_experiment(cfg, out, workers=args.workers,
                             trace=args.trace)
    _print_summary(summary)
    return 0


def _cmd_threshold(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    profile = cfg.workload.profile(cfg.cluster.machines)
    try:
        report = cutoff(profile)
    except DivergingMomentError as exc:
        print("threshold error: the waiting-time cutoff needs a finite "
              "second moment of task durations, i.e. a tail exponent "
              f"above 2 ({exc})", file=sys.stderr)
        return 1
    print(json.dumps(asdict(report), sort_keys=True, indent=2))
    return 0


def _cmd_sweep_sigma(args: argparse.Namespace) -> int:
    if not args.alpha > 1.0:
        raise ConfigError(
            f"tail exponent must exceed 1 for a finite mean, "
            f"got {args.alpha:g}", field="alpha")
    law = ParetoDist(1.0, args.alpha)
    lo, hi, step = args.grid
    sigmas = [float(s) for s in np.arange(lo, hi + 0.5 * step, step)]
    writer = csv.writer(sys.stdout)
    if args.model == "detect":
        writer.writerow(["sigma", "objective", "optimal_c"])
        for sigma in sigmas:
            writer.writerow([
                sigma,
                expected_task_cost(sigma, DEFAULT_PROGRESS, law, SWEEP_CAP),
                optimal_c(sigma, DEFAULT_PROGRESS, law, SWEEP_CAP)])
    else:
        writer.writerow(["sigma", "objective"])
        for sigma in sigmas:
            writer.writerow([sigma, expected_resource(sigma, law)])
    return 0


def _load_batch(path: str) -> PendingBatch:
    file = Path(path)
    try:
        text = file.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {file}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{file}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}"
        ) from None
    top = _check_mapping(raw, "(top level)",
                         {"available", "cap", "gamma", "slot", "jobs"})
    available = _integer(_get(top, "available", ""), "available", minimum=1)
    cap = _integer(_get(top, "cap", ""), "cap", minimum=1)
    gamma = _number(_get(top, "gamma", ""), "gamma", minimum=0.0)
    slot = _number(top.get("slot", 0.0), "slot", minimum=0.0)
    raw_jobs = _get(top, "jobs", "")
    if not isinstance(raw_jobs, list) or not raw_jobs:
        raise ConfigError("expected a non-empty list of jobs", field="jobs")
    jobs = []
    for i, entry in enumerate(raw_jobs):
        p = f"jobs[{i}]"
        block = _check_mapping(entry, p, {"tasks", "scale", "shape",
                                          "arrival"})
        tasks = _integer(_get(block, "tasks", p), f"{p}.tasks", minimum=1)
        scale = _number(_get(block, "scale", p), f"{p}.scale", minimum=0.0,
                        exclusive=True)
        shape = _number(_get(block, "shape", p), f"{p}.shape", minimum=1.0,
                        exclusive=True)
        arrival = _number(block.get("arrival", 0.0), f"{p}.arrival",
                          minimum=0.0)
        if arrival > slot:
            raise ConfigError(
                f"job arrived at {arrival:g}, after the decision slot "
                f"{slot:g}", field=f"{p}.arrival")
        jobs.append(BatchJob(ident=i, tasks=tasks, arrival=arrival,
                             law=ParetoDist(scale, shape)))
    demand = sum(job.tasks for job in jobs)
    if demand >= available:
        raise ConfigError(
            f"batch is infeasible: single copies alone need {demand} "
            f"machines but only {available} are available; the allocation "
            "needs strictly more machines than tasks", field="available")
    try:
        return PendingBatch(slot=slot, available=available,
                            jobs=tuple(jobs), cap=cap, gamma=gamma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _cmd_solve_p2(args: argparse.Namespace) -> int:
    batch = _load_batch(args.config)
    assignment = solve_dual(batch)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "convergence_trace.csv", "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["iteration", "dual"])
        for i, value in enumerate(assignment.dual_trace, start=1):
            writer.writerow([i, value])
    payload = {
        "continuous": [float(x) for x in assignment.continuous],
        "rounded": [int(x) for x in assignment.rounded],
        "iterations": assignment.iterations,
        "nu": assignment.nu,
        "xi": None if assignment.xi is None
        else [float(x) for x in assignment.xi],
        "h": None if assignment.h is None
        else [float(x) for x in assignment.h],
        "capacity_used": assignment.capacity_used(batch),
        "primal": primal_objective(batch, assignment.rounded),
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SpecsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
