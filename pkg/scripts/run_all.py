"""Run every replication pipeline and write one JSON report per experiment.

    python3 scripts/run_all.py --out results/
"""
import argparse
import json
import sys
from pathlib import Path

from flatdimers import experiments as ex
from flatdimers.cli import dumps


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--steps", type=float, default=1e6, help="MCMC steps for the sector validation")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = {
        "oracle_suite": lambda: ex.run_oracle_suite(),
        "oracle_suite_corrupted": lambda: ex.run_oracle_suite(corrupt_edge=5),
        "sector_validation": lambda: ex.run_sector_validation(steps=int(args.steps)),
        "bosonization": lambda: ex.run_bosonization_suite(),
        "hex_control": lambda: ex.run_hex_control(),
        "ratio_study": lambda: ex.run_ratio_study(),
    }
    ok = True
    for name, fn in runs.items():
        rep = fn()
        (out / f"{name}.json").write_text(dumps(rep))
        expect = name != "oracle_suite_corrupted"
        good = rep["passed"] == expect
        ok &= good
        print(f"{name:24s} passed={rep['passed']!s:5s} {'ok' if good else 'UNEXPECTED'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
