#!/usr/bin/env python3
"""Run the three reference experiments (attractive, confined repulsive,
free repulsive) at N=200 and write snapshots, norm diagnostics and the
energy-balance time series for each."""

import pathlib
import sys

from partmob.cli import main

HERE = pathlib.Path(__file__).resolve().parent.parent
CONFIGS = ["attractive", "repulsive_confined", "repulsive_free"]

if __name__ == "__main__":
    for name in CONFIGS:
        cfg = HERE / "configs" / f"{name}.cfg"
        print(f"== {name} ==")
        code = main(["--config", str(cfg), "run"])
        if code != 0:
            sys.exit(code)
        code = main(["--config", str(cfg), "edb-check"])
        if code != 0:
            sys.exit(code)
    print("all runs completed; see out/<name>/ for CSV output")
