"""Command line front end: derive | simulate | recover | pipeline | report.

Exit codes: 0 ok, 2 derivation/resonance failure, 3 missing inputs,
4 numerical divergence, 1 anything else.
"""
from __future__ import annotations

import functools
import json
import sys
import time
import traceback
from pathlib import Path

import click
import numpy as np

from . import experiments as ex
from .config import MissingInputError, PipelineConfig, load_config
from .normalform import NonResonanceFailure, algorithm1, homological_residuals, cancellation_report
from .phasered import oa_build, polar_reduce, rho, sigma
from .polyalg import ResonanceError
from .report import build_report, dump_json, strip_timing, write_result
from .simkit import DivergenceError, StepSizeError, Trajectory

EXIT_RESONANCE = 2
EXIT_MISSING = 3
EXIT_DIVERGENCE = 4


def _common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON pipeline config."),
        click.option("--preset", type=str, help="Shipped preset name."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory (default out/<name>)."),
        click.option("--seed", type=int, default=None, help="Seed for initial conditions and ensembles."),
        click.option("--full-scale", is_flag=True, help="Use the long protocol durations."),
        click.option("--eps-res", type=float, default=None, help="Resonance tolerance."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _guard(fn):
    """Map library errors onto exit codes and leave a status file behind."""

    @functools.wraps(fn)
    def wrapper(*a, **kw):
        out = None
        try:
            return fn(*a, **kw)
        except (NonResonanceFailure, ResonanceError) as e:
            code, msg = EXIT_RESONANCE, str(e)
        except (MissingInputError, FileNotFoundError) as e:
            code, msg = EXIT_MISSING, str(e)
        except (DivergenceError, StepSizeError, FloatingPointError) as e:
            code, msg = EXIT_DIVERGENCE, str(e)
        except click.exceptions.Exit:
            raise
        except click.ClickException:
            raise
        except Exception as e:  # noqa: BLE001
            code, msg = 1, f"{type(e).__name__}: {e}"
            traceback.print_exc()
        click.echo(f"error: {msg}", err=True)
        out = kw.get("out_dir")
        if out and Path(out).exists():
            dump_json({"status": "failed", "exit_code": code, "error": msg}, Path(out) / "status.json")
        sys.exit(code)

    return wrapper


def _load(config_path, preset, seed, full_scale, eps_res, stages=None) -> PipelineConfig:
    return load_config(config_path, preset, seed=seed, full_scale=full_scale, eps_res=eps_res, stages=stages)


def _outdir(cfg: PipelineConfig, out_dir) -> Path:
    p = Path(out_dir) if out_dir else Path("out") / cfg.name
    p.mkdir(parents=True, exist_ok=True)
    return p


@click.group()
def main():
    """Hypernetwork normal forms: derivation, simulation and recovery."""


# ---------------------------------------------------------------------------


def derive_report(cfg: PipelineConfig) -> tuple[dict, str]:
    """Hypernetwork JSON plus a text report with residuals and reduction tables."""
    if cfg.kind == "meanfield":
        m = cfg.section("meanfield")
        sys_ = oa_build(m["Omega"], m["sigma"], m["mu"], m["alpha"])
    elif cfg.kind == "network":
        sys_ = cfg.system()
    else:
        raise MissingInputError(f"preset kind {cfg.kind!r} has no polynomial system to derive")
    hn = algorithm1(sys_, cfg.eps_res)
    r1, r2 = homological_residuals(sys_, hn.transform)
    canc = cancellation_report(sys_, hn.transform, hn)
    pm = polar_reduce(hn)
    g = sys_.gamma
    lines = [f"# {cfg.name}", "", f"eps_res = {cfg.eps_res}", f"homological residuals: P {r1:.3e}, Q {r2:.3e}",
             f"alpha^1 re-expansion max: {canc['alpha1_max']:.3e}", "", "emergent alpha^2 terms (u' = ... + alpha^2 c m(u)):"]
    for e in hn.hyperedges:
        c = e.field_coeff
        tags = ", ".join(f"{t.kind}({t.l + 1},{t.p + 1})" for t in e.contributions)
        lines.append(f"  node {e.k + 1}: ({c.real:+.6f} {c.imag:+.6f}i) {e.exponent.pretty()}   [{tags}]")
    if hn.shift_terms:
        lines.append("amplitude-only (frequency shift) terms:")
        for e in hn.shift_terms:
            c = e.field_coeff
            lines.append(f"  node {e.k + 1}: ({c.real:+.6f} {c.imag:+.6f}i) {e.exponent.pretty()}")
    lines += ["", "transform P (alpha^1) per node:"]
    for k, p in enumerate(hn.transform.P):
        lines.append(f"  P_{k + 1}: {len(p)} monomials, max |coef| {p.max_abs():.4g}")
    lines += ["", "phase reduction (theta_k' = Omega_k + sum sin/cos of m.theta):"]
    for t in pm.terms:
        lines.append(f"  node {t.node + 1}: m={list(t.m)} sin {t.sin:+.4e} cos {t.cos:+.4e}")
    tables = {}
    if sys_.n >= 3 and np.allclose(sys_.lam, sys_.lam[0]):
        r0 = float(sys_.r0[0])
        om = sys_.omega
        tables["rho"] = {f"{p + 1}{q + 1}": list(rho(p, q, r0, om)) for p in range(sys_.n) for q in range(sys_.n) if sys_.A[p, q]}
        tables["sigma"] = {f"{p + 1}{q + 1}{r + 1}": list(sigma(p, q, r, r0, om)) for p in range(sys_.n) for q in range(sys_.n) for r in range(sys_.n)
                           if sys_.A[p, q] and sys_.A[p, r] and q < r}
    doc = {
        "system": sys_.to_dict(),
        "hypernetwork": hn.to_dict(),
        "residuals": {"P": r1, "Q": r2, "alpha1_max": canc["alpha1_max"]},
        "phase_model": pm.to_dict(),
        "reduction_tables": tables,
        "P": [p.to_dict() for p in hn.transform.P],
        "Q": [q.to_dict() for q in hn.transform.Q],
    }
    return doc, "\n".join(lines) + "\n"


@main.command()
@_common
@_guard
def derive(config_path, preset, out_dir, seed, full_scale, eps_res):
    """Derive the hypernetwork; write hypernetwork.json and derive_report.txt."""
    cfg = _load(config_path, preset, seed, full_scale, eps_res)
    out = _outdir(cfg, out_dir)
    doc, text = derive_report(cfg)
    dump_json(doc, out / "hypernetwork.json")
    (out / "derive_report.txt").write_text(text)
    click.echo(text)


@main.command()
@_common
@_guard
def simulate(config_path, preset, out_dir, seed, full_scale, eps_res):
    """Integrate the preset and write trajectory.csv (tongue: tongue.csv)."""
    cfg = _load(config_path, preset, seed, full_scale, eps_res)
    out = _outdir(cfg, out_dir)
    if cfg.kind == "tongue":
        res = ex.exp_tongue(cfg)
        paths = write_result(res, out)
        dump_json(strip_timing(res.metrics), out / "tongue_metrics.json")
        click.echo(f"tongue: c={res.metrics['c']:.4f} R2={res.metrics['r2']:.4f} -> {out / paths['tongue']}")
        return
    tr = ex.simulate(cfg)
    tr.to_csv(out / "trajectory.csv")
    click.echo(f"wrote {out / 'trajectory.csv'} ({len(tr.data)} samples)")


@main.command()
@_common
@_guard
def recover(config_path, preset, out_dir, seed, full_scale, eps_res):
    """Fit the phase model from an existing trajectory.csv in --out."""
    cfg = _load(config_path, preset, seed, full_scale, eps_res)
    out = _outdir(cfg, out_dir)
    tp = out / "trajectory.csv"
    if not tp.exists():
        raise MissingInputError(f"{tp} not found; run `hnf simulate` first")
    res = ex.recover(cfg, Trajectory.from_csv(tp))
    paths = write_result(res, out)
    dump_json(strip_timing(res.metrics), out / "recover_metrics.json")
    click.echo(f"{res.line()}  artifacts: {', '.join(sorted(paths.values()))}")


def run_pipeline(cfg: PipelineConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    dump_json({"status": "running"}, out / "status.json")
    index = {"name": cfg.name, "kind": cfg.kind, "config": cfg.to_dict(), "artifacts": {}, "metrics": {}}
    if cfg.kind in ("network", "meanfield"):
        doc, text = derive_report(cfg)
        dump_json(doc, out / "hypernetwork.json")
        (out / "derive_report.txt").write_text(text)
        index["artifacts"]["hypernetwork"] = "hypernetwork.json"
        index["artifacts"]["derive_report"] = "derive_report.txt"
    runner = {
        "tongue": ex.exp_tongue,
        "meanfield": ex.exp_meanfield,
        "if": ex.exp_if,
    }.get(cfg.kind)
    if runner is None:
        tr = ex.simulate(cfg)
        res = ex.recover(cfg, tr)
        res.trajectories["trajectory"] = tr
    else:
        res = runner(cfg)
    index["artifacts"].update(write_result(res, out))
    index["metrics"] = strip_timing(res.metrics)
    index["passed"] = res.passed
    dump_json(index, out / "index.json")
    dump_json({"status": "ok", "result": res.line()}, out / "status.json")
    click.echo(f"{res.line()}  ({time.perf_counter() - t0:.1f} s)", err=True)
    return index


@main.command()
@_common
@_guard
def pipeline(config_path, preset, out_dir, seed, full_scale, eps_res):
    """derive -> simulate -> recover -> predict; writes index.json with all metrics."""
    cfg = _load(config_path, preset, seed, full_scale, eps_res)
    out = _outdir(cfg, out_dir)
    idx = run_pipeline(cfg, out)
    click.echo(json.dumps(idx["metrics"], indent=2, sort_keys=True, default=float))


@main.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Pipeline output directory.")
@_guard
def report(out_dir):
    """Static SVG/CSV figures from a pipeline directory."""
    p = Path(out_dir)
    if not p.is_dir():
        raise MissingInputError(f"{p} is not a directory")
    made = build_report(p)
    for k, v in sorted(made.items()):
        click.echo(f"{k}: {p / v}")


if __name__ == "__main__":  # pragma: no cover
    main()
