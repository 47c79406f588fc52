#!/usr/bin/env python3
"""Full pipeline on the meanfield-sn10 preset: simulate, extract phases, LASSO fit, figures."""
import argparse
import json
from pathlib import Path

from hnf.cli import run_pipeline
from hnf.config import load_config
from hnf.report import build_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="out/meanfield")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    idx = run_pipeline(load_config(preset="meanfield-sn10", seed=args.seed), out)
    print(("PASS" if idx["passed"] else "FAIL"), json.dumps(idx["metrics"], indent=1, default=float))
    for k, v in sorted(build_report(out).items()):
        print(f"{k}: {out / v}")


if __name__ == "__main__":
    main()
