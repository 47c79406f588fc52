#!/usr/bin/env python3
"""Two-oscillator locking region in (detuning, coupling) and its sqrt fit.
Desk scale by default; --full-scale switches to the long per-cell protocol."""
import argparse
from pathlib import Path

from hnf.cli import run_pipeline
from hnf.config import load_config
from hnf.report import build_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--full-scale", action="store_true")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="out/tongue")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = load_config(preset="tongue-sn3", seed=args.seed, full_scale=args.full_scale)
    idx = run_pipeline(cfg, out)
    m = idx["metrics"]
    print(f"c = {m['c']:.4f}  R2 = {m['r2']:.4f}  points = {m['n_points']}")
    for k, v in sorted(build_report(out).items()):
        print(f"{k}: {out / v}")


if __name__ == "__main__":
    main()
