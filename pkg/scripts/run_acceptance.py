#!/usr/bin/env python3
"""Run every acceptance experiment and write out/acceptance/summary.json.

    python3 scripts/run_acceptance.py            # all eleven
    python3 scripts/run_acceptance.py 1 5 9      # a subset
"""
import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from test_acceptance import CRITERIA, run_criterion  # noqa: E402

from hnf.report import dump_json, strip_timing, write_result  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("which", nargs="*", type=int, help="criterion numbers (default: all)")
    ap.add_argument("--out", default=str(ROOT / "out" / "acceptance"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for num, label, fn, budget in CRITERIA:
        if args.which and num not in args.which:
            continue
        ok, text, res = run_criterion(num, label, fn, budget)
        line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {text}"
        print(line, flush=True)
        write_result(res, out / f"criterion{num:02d}")
        summary[num] = {"passed": ok, "line": line, "metrics": strip_timing(res.metrics)}
    dump_json(summary, out / "summary.json")
    return 0 if all(v["passed"] for v in summary.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
