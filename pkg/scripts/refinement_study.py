#!/usr/bin/env python3
"""Refinement and cross-validation study on the conservation-law
reduction: mesh-doubling Cauchy differences, comparison against the
finite-volume reference, and the entropy-residual report."""

import pathlib
import sys

from partmob.cli import main

HERE = pathlib.Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    cfg = HERE / "configs" / "reduction.cfg"
    for command, extra in [
        ("converge", ["--override", "discretization.N_list=50,100,200,400"]),
        ("oracle-compare", []),
        ("entropy-check", []),
    ]:
        print(f"== {command} ==")
        code = main(["--config", str(cfg), *extra, command])
        if code != 0:
            sys.exit(code)
    print("study completed; see out/reduction/ for CSV output")
