"""Integrators: polynomial oscillator networks (fixed-step RK4), phase models
(adaptive RK45), Kuramoto ensembles, delayed integrate-and-fire rings, and the
Arnold-tongue sweep."""
from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numba
import numpy as np
from scipy.integrate import solve_ivp

from .normalform import NetworkSystem, original_field
from .phasered import PhaseModel, SlowPhaseSystem
from .polyalg import ConjPolynomial

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, t: float):
        self.t = t
        super().__init__(f"state became non-finite at t = {t:.6g}")


class StepSizeError(RuntimeError):
    pass


@dataclass
class Trajectory:
    dt: float
    data: np.ndarray  # samples x channels (complex or real)
    t0: float = 0.0
    transient_cut: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim == 1:
            self.data = self.data[:, None]
        if not (0 <= self.transient_cut < len(self.data)):
            raise ValueError("transient_cut must index into the samples")

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.data))

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def after_transient(self) -> "Trajectory":
        c = self.transient_cut
        return Trajectory(self.dt, self.data[c:], self.t0 + c * self.dt, 0, dict(self.meta))

    def channel(self, k: int) -> np.ndarray:
        return self.data[:, k]

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        cplx = np.iscomplexobj(self.data)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t"]
            for k in range(self.n):
                head += [f"re{k + 1}", f"im{k + 1}"] if cplx else [f"x{k + 1}"]
            w.writerow(head)
            for t, row in zip(self.t, self.data):
                vals = [repr(float(t))]
                for v in row:
                    vals += [repr(float(v.real)), repr(float(v.imag))] if cplx else [repr(float(v))]
                w.writerow(vals)
        side = {"dt": self.dt, "t0": self.t0, "transient_cut": self.transient_cut, "complex": bool(cplx), **self.meta}
        path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True, default=str))

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trajectory":
        path = Path(path)
        side = json.loads(path.with_suffix(".json").read_text())
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        vals = raw[:, 1:]
        data = vals[:, 0::2] + 1j * vals[:, 1::2] if side.get("complex") else vals
        meta = {k: v for k, v in side.items() if k not in ("dt", "t0", "transient_cut", "complex")}
        return cls(side["dt"], data, side["t0"], side["transient_cut"], meta)


# ---------------------------------------------------------------------------
# polynomial vector fields


@dataclass
class CompiledField:
    n: int
    target: np.ndarray
    coef: np.ndarray
    exps: np.ndarray


def compile_field(field_polys: Sequence[ConjPolynomial]) -> CompiledField:
    n = len(field_polys)
    tgt, coef, exps = [], [], []
    for k, p in enumerate(field_polys):
        for key, c in p.items():
            tgt.append(k)
            coef.append(c)
            exps.append(key)
    return CompiledField(
        n,
        np.asarray(tgt, dtype=np.int64),
        np.asarray(coef, dtype=np.complex128),
        np.asarray(exps, dtype=np.int64).reshape(-1, 2 * n),
    )


@numba.njit(cache=True, nogil=True)
def _eval_field(z, target, coef, exps, out):
    n = z.shape[0]
    zc = np.conj(z)
    for i in range(n):
        out[i] = 0.0
    for m in range(target.shape[0]):
        v = coef[m]
        for j in range(n):
            e = exps[m, j]
            for _ in range(e):
                v *= z[j]
            e = exps[m, n + j]
            for _ in range(e):
                v *= zc[j]
        out[target[m]] += v


@numba.njit(cache=True, nogil=True)
def _rk4_poly(z0, target, coef, exps, dt, nsteps, stride):
    n = z0.shape[0]
    nsamp = nsteps // stride + 1
    out = np.empty((nsamp, n), dtype=np.complex128)
    z = z0.copy()
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    out[0] = z
    s = 1
    for step in range(1, nsteps + 1):
        _eval_field(z, target, coef, exps, k1)
        for i in range(n):
            tmp[i] = z[i] + 0.5 * dt * k1[i]
        _eval_field(tmp, target, coef, exps, k2)
        for i in range(n):
            tmp[i] = z[i] + 0.5 * dt * k2[i]
        _eval_field(tmp, target, coef, exps, k3)
        for i in range(n):
            tmp[i] = z[i] + dt * k3[i]
        _eval_field(tmp, target, coef, exps, k4)
        for i in range(n):
            z[i] = z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not (np.isfinite(z.real).all() and np.isfinite(z.imag).all()):
            return out[:s], step
        if step % stride == 0:
            out[s] = z
            s += 1
    return out, -1


def integrate_field(field_polys: Sequence[ConjPolynomial] | CompiledField, z0, T: float, dt: float, sample_every: int = 1, transient: float = 0.0, meta: dict | None = None) -> Trajectory:
    """Classical RK4 with fixed step on a polynomial complex vector field."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cf = field_polys if isinstance(field_polys, CompiledField) else compile_field(field_polys)
    nsteps = int(round(T / dt))
    z0 = np.asarray(z0, dtype=np.complex128)
    out, bad = _rk4_poly(z0, cf.target, cf.coef, cf.exps, float(dt), nsteps, int(sample_every))
    if bad >= 0:
        raise DivergenceError(bad * dt)
    cut = min(int(round(transient / (dt * sample_every))), len(out) - 1)
    return Trajectory(dt * sample_every, out, 0.0, cut, dict(meta or {}))


def integrate_network(sys: NetworkSystem, z0, T: float, dt: float = 0.01, sample_every: int = 1, transient: float = 0.0) -> Trajectory:
    meta = {"system": sys.to_dict(), "integrator": "rk4", "step": dt}
    return integrate_field(original_field(sys), z0, T, dt, sample_every, transient, meta)


def default_initial_state(sys: NetworkSystem, seed: int = 0) -> np.ndarray:
    """Points on the uncoupled limit cycles with seeded random phases."""
    rng = np.random.default_rng(seed)
    return sys.r0 * np.exp(1j * rng.uniform(0, 2 * np.pi, sys.n))


# ---------------------------------------------------------------------------
# phase models


def integrate_phase_model(pm: PhaseModel | SlowPhaseSystem, theta0, T: float, dt: float, atol: float = 1e-9, rtol: float = 1e-9, t0: float = 0.0) -> Trajectory:
    """Adaptive embedded RK (Dormand-Prince 5(4)); unwrapped phases sampled every dt."""
    theta0 = np.asarray(theta0, float)
    n_s = int(round(T / dt)) + 1
    t_eval = t0 + dt * np.arange(n_s)
    t_eval[-1] = min(t_eval[-1], t0 + T)
    sol = solve_ivp(lambda t, y: pm.rhs(y), (t0, t0 + T), theta0, method="RK45", t_eval=t_eval, atol=atol, rtol=rtol)
    if sol.status != 0:
        raise StepSizeError(sol.message)
    return Trajectory(dt, sol.y.T, t0, 0, {"integrator": "RK45", "atol": atol, "rtol": rtol})


# ---------------------------------------------------------------------------
# microscopic Kuramoto ensembles


@dataclass
class EnsembleConfig:
    M: int
    Omega: Sequence[float]
    sigma: Sequence[float] | float
    mu: float
    alpha: float
    A: Optional[np.ndarray] = None
    seed: int = 0
    sampling: str = "stratified"  # or "iid"

    def __post_init__(self):
        if self.sampling not in ("stratified", "iid"):
            raise ValueError("sampling must be 'stratified' or 'iid'")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        self.Omega = np.asarray(self.Omega, float)
        self.sigma = np.broadcast_to(np.asarray(self.sigma, float), self.Omega.shape).copy()
        if np.any(self.sigma <= 0):
            raise ValueError("Lorentzian widths must be positive")
        if self.A is None:
            from .normalform import ring_adjacency

            self.A = ring_adjacency(len(self.Omega))
        self.A = np.asarray(self.A, float)


def order_parameter(phases: np.ndarray) -> np.ndarray:
    """Mean unit phasor over the last axis."""
    phases = np.asarray(phases)
    if phases.shape[-1] == 0:
        raise ValueError("need at least one oscillator")
    return np.exp(1j * phases).mean(axis=-1)


def lorentzian_frequencies(cfg: EnsembleConfig) -> np.ndarray:
    """Inverse-CDF draws Omega + sigma tan(pi (u - 1/2)).

    "stratified" jitters one uniform inside each of M equal bins, which keeps the
    sample's effective width close to sigma; "iid" uses plain uniforms.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    P = len(cfg.Omega)
    u = rng.random((P, cfg.M))
    if cfg.sampling == "stratified":
        u = (np.arange(cfg.M)[None, :] + u) / cfg.M
        u = np.array([rng.permutation(row) for row in u])
    return cfg.Omega[:, None] + cfg.sigma[:, None] * np.tan(np.pi * (u - 0.5))


@numba.njit(cache=True, nogil=True, fastmath=True)
def _micro_rhs(psi, w, A, mu, alpha, out):
    P, M = psi.shape
    c = np.empty((P, M))
    s = np.empty((P, M))
    zr = np.zeros(P)
    zi = np.zeros(P)
    for k in range(P):
        for m in range(M):
            c[k, m] = np.cos(psi[k, m])
            s[k, m] = np.sin(psi[k, m])
            zr[k] += c[k, m]
            zi[k] += s[k, m]
        zr[k] /= M
        zi[k] /= M
    for k in range(P):
        kr = 2 * mu * zr[k]
        ki = 2 * mu * zi[k]
        for l in range(P):
            kr += 2 * alpha * A[k, l] * zr[l]
            ki += 2 * alpha * A[k, l] * zi[l]
        # Im(K e^{-i psi}) = Ki cos psi - Kr sin psi
        for m in range(M):
            out[k, m] = w[k, m] + ki * c[k, m] - kr * s[k, m]


@numba.njit(cache=True, nogil=True)
def _micro_run(psi, w, A, mu, alpha, dt, nsteps, stride):
    P, M = psi.shape
    out = np.empty((nsteps // stride + 1, P), np.complex128)
    k1 = np.empty((P, M))
    k2 = np.empty((P, M))
    k3 = np.empty((P, M))
    k4 = np.empty((P, M))
    for k in range(P):
        out[0, k] = np.mean(np.exp(1j * psi[k]))
    row = 1
    for step in range(1, nsteps + 1):
        _micro_rhs(psi, w, A, mu, alpha, k1)
        _micro_rhs(psi + 0.5 * dt * k1, w, A, mu, alpha, k2)
        _micro_rhs(psi + 0.5 * dt * k2, w, A, mu, alpha, k3)
        _micro_rhs(psi + dt * k3, w, A, mu, alpha, k4)
        psi += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % stride == 0:
            for k in range(P):
                out[row, k] = np.mean(np.exp(1j * psi[k]))
            row += 1
    return out


def integrate_microscopic(cfg: EnsembleConfig, T: float, dt: float = 0.02, sample_every: int = 5, z_init: Sequence[complex] | None = None) -> Trajectory:
    """psi_km' = w_km + Im(K_k e^{-i psi_km}),  K_k = 2 mu z_k + 2 alpha sum_l A_kl z_l.

    With this normalisation the exact Ott-Antonsen reduction is
    z' = (i Omega - sigma + mu) z - mu z|z|^2 + alpha sum_l A_kl (z_l - conj(z_l) z^2).
    `z_init` places each population on the OA manifold (wrapped Cauchy) with that order parameter.
    """
    w = lorentzian_frequencies(cfg)
    rng = np.random.Generator(np.random.PCG64(cfg.seed + 7919))
    P = len(cfg.Omega)
    if z_init is None:
        psi = rng.uniform(0, 2 * np.pi, (P, cfg.M))
    else:
        z_init = np.asarray(z_init, complex)
        rho = np.clip(np.abs(z_init), 1e-6, 1 - 1e-6)[:, None]
        u = rng.random((P, cfg.M))
        psi = np.angle(z_init)[:, None] + 2 * np.arctan((1 - rho) / (1 + rho) * np.tan(np.pi * (u - 0.5)))
    nsteps = int(round(T / dt))
    out = _micro_run(np.ascontiguousarray(psi), np.ascontiguousarray(w), np.ascontiguousarray(cfg.A), float(cfg.mu), float(cfg.alpha), float(dt), nsteps, int(sample_every))
    if not np.all(np.isfinite(out)):
        raise DivergenceError(T)
    return Trajectory(dt * sample_every, out, 0.0, 0, {"M": cfg.M, "seed": cfg.seed, "mu": cfg.mu, "alpha": cfg.alpha, "sampling": cfg.sampling})


def oa_exact_field(cfg: EnsembleConfig) -> List[ConjPolynomial]:
    """Ott-Antonsen field matching integrate_microscopic's normalisation."""
    P = len(cfg.Omega)
    out = []
    for k in range(P):
        terms = {}

        def add(s, t, c):
            key = tuple(s) + tuple(t)
            terms[key] = terms.get(key, 0) + c

        e = np.eye(P, dtype=int)
        add(e[k], 0 * e[k], 1j * cfg.Omega[k] - cfg.sigma[k] + cfg.mu)
        add(2 * e[k], e[k], -cfg.mu)
        for l in range(P):
            if cfg.A[k, l]:
                add(e[l], 0 * e[l], cfg.alpha * cfg.A[k, l])
                add(2 * e[k], e[l], -cfg.alpha * cfg.A[k, l])
        out.append(ConjPolynomial(P, terms))
    return out


# ---------------------------------------------------------------------------
# delayed integrate-and-fire ring


@dataclass
class IFConfig:
    F: Sequence[float] = (4.950, 1.955, 3.177, 1.970)
    A_thresh: float = 0.36
    B: float = 3.333
    K: float = 0.234
    tau: float = 1.65
    offset: float = 0.626
    adjacency: Optional[np.ndarray] = None

    def __post_init__(self):
        self.F = np.asarray(self.F, float)
        if not (0 < self.A_thresh < 1):
            raise ValueError("threshold must lie in (0, 1)")
        if self.tau < 0 or np.any(self.F <= 0):
            raise ValueError("need tau >= 0 and F > 0")
        if self.adjacency is None:
            from .normalform import ring_adjacency

            self.adjacency = ring_adjacency(len(self.F))
        self.adjacency = np.asarray(self.adjacency, float)

    def uncoupled_period(self) -> np.ndarray:
        """Rise v: A -> 1 at rate 1/F, fall 1 -> A at rate B/F."""
        return self.F * np.log(1 / self.A_thresh) * (1 + 1 / self.B)


@numba.njit(cache=True, nogil=True)
def _if_rhs(v, vdel, p, F, B, K, Adj, off):
    n = v.shape[0]
    out = np.empty(n)
    for k in range(n):
        c = 0.0
        vk = v[k] - off
        for l in range(n):
            if Adj[k, l] != 0.0:
                c += Adj[k, l] * (vk + vk * vk) * (vdel[l] - off)
        out[k] = (p[k] * v[k] - (1.0 - p[k]) * v[k] * B) / F[k] + p[k] * K * c
    return out


@numba.njit(cache=True, nogil=True)
def _if_run(v0, p0, F, B, K, Adj, off, Ath, lag, dt, nsteps, stride):
    n = v0.shape[0]
    hist_len = lag + 1
    hist = np.empty((hist_len, n))
    for i in range(hist_len):
        hist[i] = v0
    head = 0  # index of current state in ring buffer
    v = v0.copy()
    p = p0.copy()
    out = np.empty((nsteps // stride + 1, n))
    out[0] = v
    s = 1
    for step in range(1, nsteps + 1):
        # delayed states at t - tau, t - tau + dt/2, t - tau + dt (linear interpolation)
        d0 = hist[(head - lag) % hist_len]
        d1 = hist[(head - lag + 1) % hist_len] if lag > 0 else v
        dm = 0.5 * (d0 + d1)
        k1 = _if_rhs(v, d0, p, F, B, K, Adj, off)
        k2 = _if_rhs(v + 0.5 * dt * k1, dm, p, F, B, K, Adj, off)
        k3 = _if_rhs(v + 0.5 * dt * k2, dm, p, F, B, K, Adj, off)
        k4 = _if_rhs(v + dt * k3, d1, p, F, B, K, Adj, off)
        v = v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for k in range(n):
            if p[k] == 1.0 and v[k] >= 1.0:
                p[k] = 0.0
            elif p[k] == 0.0 and v[k] <= Ath:
                p[k] = 1.0
        head = (head + 1) % hist_len
        hist[head] = v
        if step % stride == 0:
            out[s] = v
            s += 1
    return out


def integrate_if_ring(cfg: IFConfig, v0, T: float, dt: float = 0.01, sample_every: int = 1, transient: float = 0.0) -> Trajectory:
    lag_f = cfg.tau / dt
    lag = int(round(lag_f))
    if abs(lag - lag_f) > 1e-9:
        raise ValueError("dt must divide tau")
    v0 = np.asarray(v0, float)
    p0 = np.ones_like(v0)
    nsteps = int(round(T / dt))
    out = _if_run(v0, p0, cfg.F, float(cfg.B), float(cfg.K), cfg.adjacency, float(cfg.offset), float(cfg.A_thresh), lag, float(dt), nsteps, int(sample_every))
    if not np.all(np.isfinite(out)):
        raise DivergenceError(T)
    cut = min(int(round(transient / (dt * sample_every))), len(out) - 1)
    meta = {"model": "integrate-and-fire", **{k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(cfg).items()}}
    return Trajectory(dt * sample_every, out, 0.0, cut, meta)


# ---------------------------------------------------------------------------
# Arnold tongue


@numba.njit(cache=True, nogil=True)
def _sync_error(z0, target, coef, exps, dt, nsteps, ncut, i, j):
    """Run RK4 and return mean |phi(t) - phi(t_cut)| over t >= t_cut, phi = arg z_i - arg z_j unwrapped."""
    n = z0.shape[0]
    z = z0.copy()
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    prev = z[i] * np.conj(z[j])
    phi = 0.0
    acc = 0.0
    cnt = 0
    for step in range(1, nsteps + 1):
        _eval_field(z, target, coef, exps, k1)
        for q in range(n):
            tmp[q] = z[q] + 0.5 * dt * k1[q]
        _eval_field(tmp, target, coef, exps, k2)
        for q in range(n):
            tmp[q] = z[q] + 0.5 * dt * k2[q]
        _eval_field(tmp, target, coef, exps, k3)
        for q in range(n):
            tmp[q] = z[q] + dt * k3[q]
        _eval_field(tmp, target, coef, exps, k4)
        for q in range(n):
            z[q] = z[q] + dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
        cur = z[i] * np.conj(z[j])
        if step > ncut:
            phi += np.angle(cur * np.conj(prev))
            acc += abs(phi)
            cnt += 1
        prev = cur
    if not np.isfinite(acc):
        return np.inf
    return acc / max(cnt, 1)


def tongue_system(delta: float, alpha: float, lam: float = 1.0, base_omega=(1.0, 1.0, 5.0, 6.0)) -> NetworkSystem:
    from .normalform import coupling_library, ring_adjacency

    om = np.array(base_omega, float)
    om[0] += delta
    return NetworkSystem(4, ring_adjacency(4), lam, om, coupling_library("z_wbar"), alpha)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HNF_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


@dataclass
class TongueResult:
    deltas: np.ndarray
    alphas: np.ndarray
    E: np.ndarray  # len(deltas) x len(alphas)
    T: float
    transient: float

    def locked(self, rel: float = 0.1, floor: float = 0.5) -> np.ndarray:
        """E < max(rel * E_free(delta), floor); E_free is the alpha = 0 column."""
        i0 = int(np.argmin(np.abs(self.alphas)))
        thr = np.maximum(rel * self.E[:, i0], floor)
        return self.E < thr[:, None]

    def boundary(self, **kw) -> np.ndarray:
        """Smallest alpha on the grid that locks, per delta (nan if none)."""
        L = self.locked(**kw)
        out = np.full(len(self.deltas), np.nan)
        for a, row in enumerate(L):
            idx = np.flatnonzero(row)
            if idx.size:
                out[a] = self.alphas[idx[0]]
        return out

    def fit_sqrt(self, dmin: float = 0.01, dmax: float = 0.2, **kw) -> dict:
        """Least squares alpha_c = c sqrt(delta) over dmin <= delta <= dmax."""
        ac = self.boundary(**kw)
        sel = (self.deltas >= dmin - 1e-12) & (self.deltas <= dmax + 1e-12) & np.isfinite(ac)
        x = np.sqrt(self.deltas[sel])
        y = ac[sel]
        c = float(x @ y / (x @ x)) if sel.any() else float("nan")
        ss_res = float(np.sum((y - c * x) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2)) if sel.sum() > 1 else float("nan")
        return {"c": c, "r2": 1 - ss_res / ss_tot if ss_tot else float("nan"), "n_points": int(sel.sum())}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "alpha", "E"])
            for i, d in enumerate(self.deltas):
                for j, a in enumerate(self.alphas):
                    w.writerow([f"{d:.6g}", f"{a:.6g}", repr(float(self.E[i, j]))])


def sweep_sync_tongue(deltas: Sequence[float], alphas: Sequence[float], T: float = 5000.0, dt: float = 0.01, transient: float | None = None, lam: float = 1.0, seed: int = 0, threads: int | None = None) -> TongueResult:
    """Mean synchronisation error of phi = theta_1 - theta_2 over a (delta, alpha) grid."""
    deltas = np.asarray(deltas, float)
    alphas = np.asarray(alphas, float)
    transient = T / 5 if transient is None else transient
    nsteps = int(round(T / dt))
    ncut = int(round(transient / dt))
    template = tongue_system(0.0, 0.0, lam)
    z0 = default_initial_state(template, seed)

    def cell(ij):
        i, j = ij
        cf = compile_field(original_field(tongue_system(deltas[i], alphas[j], lam)))
        return ij, _sync_error(z0, cf.target, cf.coef, cf.exps, float(dt), nsteps, ncut, 0, 1)

    E = np.empty((len(deltas), len(alphas)))
    jobs = [(i, j) for i in range(len(deltas)) for j in range(len(alphas))]
    with ThreadPoolExecutor(max_workers=threads or _threads()) as ex:
        for (i, j), e in ex.map(cell, jobs):
            E[i, j] = e
    return TongueResult(deltas, alphas, E, T, transient)


def reference_tongue_grid(full: bool = False, positive_only: bool = False):
    d = np.round(np.arange(-0.2, 0.2 + 1e-9, 0.01), 10)
    if positive_only:
        d = d[d >= 0]
    a = np.round(np.arange(0.0, 0.5 + 1e-9, 0.025), 10)
    T, tr = (50000.0, 10000.0) if full else (5000.0, 1000.0)
    return d, a, T, tr
