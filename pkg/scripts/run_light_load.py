#!/usr/bin/env python3
"""Run the lightly-loaded cluster comparison (all five policies, three
seeds) and print the summary table. Results land in results/light_load/.

Extra arguments pass through to `specsim simulate` (e.g. --workers 4).
"""

import sys
from pathlib import Path

from specsim.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "light_load.json"

if __name__ == "__main__":
    sys.exit(main(["simulate", "--config", str(CONFIG), *sys.argv[1:]]))
