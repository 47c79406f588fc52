"""Artifact writing and static SVG/CSV reports."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, List

import numpy as np

from .config import MissingInputError

SVG_META = {"Date": None, "Creator": "hnf"}


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not serializable: {type(x)}")


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def write_table(path: Path, header: List[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def read_table(path: Path):
    with open(path) as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [list(map(float, r)) for r in rd]
    return header, np.asarray(rows).reshape(-1, len(header))


def strip_timing(metrics: dict) -> dict:
    """Runtimes vary between runs; keep them out of the byte-stable artifacts."""
    return {k: (strip_timing(v) if isinstance(v, dict) else v) for k, v in metrics.items() if k != "runtime_s"}


def write_result(res, out: Path, prefix: str = "") -> Dict[str, str]:
    """Write an ExperimentResult's tables, objects and trajectories; return {label: relative path}."""
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, (head, rows) in res.tables.items():
        p = out / f"{prefix}{name}.csv"
        write_table(p, head, rows)
        paths[name] = p.name
    for name, obj in res.objects.items():
        p = out / f"{prefix}{name}.json"
        dump_json(obj, p)
        paths[name] = p.name
        if "coef" in obj and "features" in obj:
            cp = out / f"{prefix}{name}_coefficients.csv"
            write_coefficients(obj, cp)
            paths[f"{name}_coefficients"] = cp.name
    for name, tr in res.trajectories.items():
        p = out / f"{prefix}{name}.csv"
        tr.to_csv(p)
        paths[name] = p.name
    return paths


def write_coefficients(fit: dict, path: Path) -> None:
    """Flat table: one row per feature, one column per target node."""
    coef = np.asarray(fit["coef"], float)
    if coef.ndim == 1:
        coef = coef[:, None]
    names = [f["name"] for f in fit["features"]]
    write_table(path, ["feature"] + [f"node{k + 1}" for k in range(coef.shape[1])], [[nm, *map(float, row)] for nm, row in zip(names, coef)])


# ---------------------------------------------------------------------------
# plots


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "hnf"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def overlay_svg(table: Path, path: Path) -> None:
    """Slow phases: data (solid) against fitted and theory predictions (dashed, dotted)."""
    plt = _plt()
    head, X = read_table(table)
    d = sum(1 for h in head if h.endswith("_data"))
    fig, axes = plt.subplots(d, 1, figsize=(7, 2.4 * d), sharex=True, squeeze=False)
    for j in range(d):
        ax = axes[j, 0]
        ax.plot(X[:, 0], X[:, 1 + j], "k-", lw=1.2, label="data")
        ax.plot(X[:, 0], X[:, 1 + d + j], "C1--", lw=1.2, label="fitted field")
        if len(head) > 1 + 2 * d:
            ax.plot(X[:, 0], X[:, 1 + 2 * d + j], "C0:", lw=1.0, label="reduction")
        ax.set_ylabel(f"phi_{j + 1}")
    axes[0, 0].legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)


def tongue_svg(table: Path, path: Path) -> None:
    plt = _plt()
    _, X = read_table(table)
    d = np.unique(X[:, 0])
    a = np.unique(X[:, 1])
    E = X[:, 2].reshape(len(d), len(a))
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.pcolormesh(d, a, np.log10(E.T + 1e-12), shading="nearest", cmap="viridis")
    fig.colorbar(im, ax=ax, label="log10 E")
    ax.set_xlabel("delta")
    ax.set_ylabel("alpha")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)


def coefficient_svg(table: Path, path: Path) -> None:
    """Bar chart of non-constant recovered coefficients per node."""
    plt = _plt()
    with open(table) as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    names = [r[0] for r in body]
    C = np.array([[float(v) for v in r[1:]] for r in body])
    keep = [i for i, n in enumerate(names) if n != "1" and not n.startswith("t^") and np.any(C[i] != 0)]
    n = C.shape[1]
    fig, ax = plt.subplots(figsize=(max(5, 0.9 * len(keep) + 2), 3.5))
    w = 0.8 / max(n, 1)
    x = np.arange(len(keep))
    for k in range(n):
        ax.bar(x + k * w, C[keep, k], w, label=head[1 + k])
    ax.set_xticks(x + 0.4 - w / 2, [names[i] for i in keep], rotation=45, ha="right", fontsize=7)
    ax.axhline(0, color="k", lw=0.5)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)


def build_report(out: Path) -> Dict[str, str]:
    """Emit SVG/CSV figures for a pipeline directory; raises MissingInputError if empty."""
    out = Path(out)
    idx_path = out / "index.json"
    if not idx_path.exists():
        raise MissingInputError(f"no pipeline index in {out}")
    idx = json.loads(idx_path.read_text())
    arts = idx.get("artifacts", {})
    made = {}

    def have(label):
        return label in arts and (out / arts[label]).exists()

    if have("prediction"):
        overlay_svg(out / arts["prediction"], out / "overlay.svg")
        made["overlay"] = "overlay.svg"
    if have("tongue"):
        tongue_svg(out / arts["tongue"], out / "tongue.svg")
        _, X = read_table(out / arts["tongue"])
        write_table(out / "tongue_heatmap.csv", ["delta", "alpha", "E"], X.tolist())
        made["tongue_heatmap"] = "tongue_heatmap.csv"
        made["tongue_svg"] = "tongue.svg"
    for label in sorted(arts):
        if label.endswith("_coefficients") and have(label):
            p = out / f"{label}.svg"
            coefficient_svg(out / arts[label], p)
            made[f"{label}_svg"] = p.name
    if not made:
        raise MissingInputError(f"index in {out} lists no plottable artifacts")
    dump_json({"source": "index.json", "figures": made}, out / "report.json")
    return made
