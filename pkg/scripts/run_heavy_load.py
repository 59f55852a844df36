#!/usr/bin/env python3
"""Run the heavily-loaded cluster comparison (baseline duplication vs the
estimate-based policy at arrival rates 3 and 4, three seeds) and print the
summary table. Results land in results/heavy_load/.

Extra arguments pass through to `specsim simulate` (e.g. --workers 4).
"""

import sys
from pathlib import Path

from specsim.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "heavy_load.json"

if __name__ == "__main__":
    sys.exit(main(["simulate", "--config", str(CONFIG), *sys.argv[1:]]))
