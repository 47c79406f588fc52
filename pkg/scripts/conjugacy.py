#!/usr/bin/env python3
"""Distance between the transformed original flow and the normal-form flow on the
ring, for a ladder of coupling strengths. The log-log slope should be close to 2."""
import argparse
from pathlib import Path

import numpy as np

from hnf.experiments import exp_conjugacy
from hnf.report import _plt, dump_json, strip_timing


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.18, 0.09, 0.045])
    ap.add_argument("--T", type=float, default=500.0)
    ap.add_argument("--out", default="out/conjugacy")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = exp_conjugacy(alphas=args.alphas, T=args.T)
    a = np.asarray(res.metrics["alphas"])
    dev = np.asarray(res.metrics["deviation"])
    slope = float(np.polyfit(np.log(a), np.log(dev), 1)[0])
    print(res.line(), f"ratio(first pair) {res.metrics['ratio']:.3f}, log-log slope {slope:.3f}")
    dump_json({**strip_timing(res.metrics), "slope": slope}, out / "conjugacy.json")
    plt = _plt()
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(a, dev, "o-", label="measured")
    ax.loglog(a, dev[0] * (a / a[0]) ** 2, "k--", lw=0.8, label="slope 2")
    ax.set_xlabel("alpha")
    ax.set_ylabel("max deviation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "conjugacy.svg")


if __name__ == "__main__":
    main()
