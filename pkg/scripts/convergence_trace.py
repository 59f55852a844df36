#!/usr/bin/env python3
"""Solve the shipped four-job clone-allocation batch and write its dual
convergence trace to results/convergence/convergence_trace.csv.

Extra arguments pass through to `specsim solve-p2`.
"""

import sys
from pathlib import Path

from specsim.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "fig1_batch.json"

if __name__ == "__main__":
    args = ["solve-p2", "--config", str(CONFIG)]
    if not any(a.startswith("--out") for a in sys.argv[1:]):
        args += ["--out", str(ROOT / "results" / "convergence")]
    sys.exit(main(args + sys.argv[1:]))
