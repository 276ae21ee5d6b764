"""Documented CLI invocations and their committed outputs.

Each case runs with ``tests/golden`` as the working directory.  Run this file
directly to regenerate the outputs after an intended change.
"""

from __future__ import annotations

import contextlib
import io
import json
import os
import sys
from pathlib import Path

from heavytails.cli import main

GOLDEN = Path(__file__).parent / "golden"

CASES = {
    "dist_moment": ["dist", "moment", "--alpha", "2", "--b", "1", "--p", "1"],
    "dist_tail": ["dist", "tail", "--alpha", "2", "--b", "3", "--t", "6"],
    "dist_sample": ["dist", "sample", "--alpha", "2", "--b", "1", "--n", "10", "--seed", "7"],
    "construct_step": ["construct", "--preset", "inverse", "--alpha", "2.5", "--rho", "0.5"],
    "construct_smoothed": ["construct", "--preset", "inverse", "--alpha", "2.5", "--rho", "0.4", "--smoothed"],
    "construct_cap": ["construct", "--preset", "inverse", "--alpha", "2.5", "--rho", "0.9", "--smoothed"],
    "verify_pareto": ["verify", "--dist", "pareto:2,1"],
    "chaos_prop32": ["chaos", "--tensor", "inputs/A.json", "--alpha", "5", "--b", "1", "--formula", "prop32",
                     "--t-grid", "1:1000:7"],
    "compare_fn": ["compare", "--config", "inputs/exp.json"],
}


def run_case(argv):
    """``(exit code, stdout, stderr)`` of one invocation inside ``tests/golden``."""
    out, err = io.StringIO(), io.StringIO()
    cwd = os.getcwd()
    os.chdir(GOLDEN)
    try:
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main(argv)
    finally:
        os.chdir(cwd)
    return code, out.getvalue(), err.getvalue()


def expected(name):
    meta = json.loads((GOLDEN / "exit_codes.json").read_text())
    return meta[name], (GOLDEN / f"{name}.out").read_text(), (GOLDEN / f"{name}.err").read_text()


def regenerate():
    codes = {}
    for name, argv in CASES.items():
        code, out, err = run_case(argv)
        codes[name] = code
        (GOLDEN / f"{name}.out").write_text(out)
        (GOLDEN / f"{name}.err").write_text(err)
    (GOLDEN / "exit_codes.json").write_text(json.dumps(codes, indent=2, sort_keys=True) + "\n")
    return codes


if __name__ == "__main__":
    print(json.dumps(regenerate(), indent=2), file=sys.stderr)
