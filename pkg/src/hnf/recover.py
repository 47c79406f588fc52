"""Phase extraction, filtering, trigonometric libraries and sparse regression
(STLSQ, LASSO) for recovering phase models from trajectories."""
from __future__ import annotations

import itertools
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks, savgol_filter
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import Lasso

from .phasered import SlowPhaseSystem
from .simkit import Trajectory, integrate_phase_model

log = logging.getLogger(__name__)


class DegenerateAmplitudeError(ValueError):
    pass


class InsufficientCyclesError(ValueError):
    pass


class ConstraintRankError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, gap: float):
        self.gap = gap
        super().__init__(f"coordinate descent did not converge (duality gap {gap:.3g})")


# ---------------------------------------------------------------------------
# phase series


@dataclass
class PhaseSeries:
    dt: float
    theta: np.ndarray  # samples x n, unwrapped
    provenance: str = "polar"
    Omega: Optional[np.ndarray] = None
    t0: float = 0.0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, float)
        if self.theta.ndim == 1:
            self.theta = self.theta[:, None]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.theta))

    @property
    def n(self) -> int:
        return self.theta.shape[1]

    def __len__(self) -> int:
        return len(self.theta)

    def combine(self, combos) -> np.ndarray:
        """Integer combinations m . theta, samples x len(combos)."""
        return self.theta @ np.atleast_2d(np.asarray(combos, float)).T

    def slice(self, start: int, stop: int | None = None) -> "PhaseSeries":
        return PhaseSeries(self.dt, self.theta[start:stop], self.provenance, self.Omega, self.t0 + start * self.dt)


def extract_phase_polar(traj: Trajectory, min_amplitude: float = 1e-9) -> PhaseSeries:
    z = np.asarray(traj.data)
    if np.any(np.abs(z) < min_amplitude):
        bad = np.argwhere(np.abs(z) < min_amplitude)[0]
        raise DegenerateAmplitudeError(f"|z| below {min_amplitude} at sample {bad[0]}, channel {bad[1] + 1}")
    return PhaseSeries(traj.dt, np.unwrap(np.angle(z), axis=0), "polar", None, traj.t0)


def _peak_times(x: np.ndarray, prominence_frac: float) -> np.ndarray:
    ptp = float(np.ptp(x))
    if ptp == 0:
        return np.empty(0)
    idx, _ = find_peaks(x, prominence=prominence_frac * ptp)
    # parabolic refinement of each maximum
    inner = idx[(idx > 0) & (idx < len(x) - 1)]
    y0, y1, y2 = x[inner - 1], x[inner], x[inner + 1]
    den = y0 - 2 * y1 + y2
    off = np.where(den != 0, 0.5 * (y0 - y2) / np.where(den != 0, den, 1), 0.0)
    return inner + np.clip(off, -0.5, 0.5)


def extract_phase_peaks(traj: Trajectory, prominence_frac: float = 0.1, min_peaks: int = 3) -> PhaseSeries:
    """Phase 2*pi*(peak count + fraction), linearly interpolated between peaks.

    The output covers the window where every channel lies between two peaks.
    """
    x = np.real(np.asarray(traj.data))
    peaks = []
    for k in range(x.shape[1]):
        p = _peak_times(x[:, k], prominence_frac)
        if len(p) < min_peaks:
            raise InsufficientCyclesError(f"channel {k + 1}: {len(p)} peaks found, need {min_peaks}")
        peaks.append(p)
    lo = int(np.ceil(max(p[0] for p in peaks)))
    hi = int(np.floor(min(p[-1] for p in peaks)))
    if hi <= lo:
        raise InsufficientCyclesError("channels have no common inter-peak window")
    idx = np.arange(lo, hi + 1, dtype=float)
    theta = np.column_stack([2 * np.pi * np.interp(idx, p, np.arange(len(p))) for p in peaks])
    return PhaseSeries(traj.dt, theta, "peak-interpolated", None, traj.t0 + lo * traj.dt)


def detrend(ps: PhaseSeries, Omega: Sequence[float]) -> PhaseSeries:
    Om = np.asarray(Omega, float)
    return PhaseSeries(ps.dt, ps.theta - np.outer(ps.t - ps.t0, Om), ps.provenance, Om, ps.t0)


def estimate_resonant_frequencies(ps: PhaseSeries, constraints: Sequence[Sequence[int]] | None = None) -> np.ndarray:
    """Per-node slopes, orthogonally projected onto {Omega : C Omega = 0}."""
    t = ps.t - ps.t0
    slopes = np.polyfit(t, ps.theta, 1)[0]
    if constraints is None or len(constraints) == 0:
        return slopes
    C = np.atleast_2d(np.asarray(constraints, float))
    if C.shape[1] != ps.n:
        raise ConstraintRankError("constraint length does not match node count")
    if np.linalg.matrix_rank(C) < C.shape[0]:
        raise ConstraintRankError("resonance constraints are linearly dependent")
    if np.linalg.matrix_rank(C) >= ps.n:
        raise ConstraintRankError("constraints force every frequency to zero")
    return slopes - C.T @ np.linalg.solve(C @ C.T, C @ slopes)


# ---------------------------------------------------------------------------
# filtering


def savitzky_golay(x: np.ndarray, window: int, order: int, deriv: int = 0, delta: float = 1.0, axis: int = 0) -> np.ndarray:
    if window % 2 == 0 or window <= order:
        raise ValueError(f"window must be odd and > order (got window={window}, order={order})")
    if window > np.shape(x)[axis]:
        raise ValueError("window longer than the series")
    return savgol_filter(x, window, order, deriv=deriv, delta=delta, axis=axis, mode="interp")


def sg_window(seconds: float, dt: float) -> int:
    """Odd sample count spanning `seconds` (45 s at dt = 0.01 -> 4501)."""
    w = int(round(seconds / dt))
    return w + 1 if w % 2 == 0 else w


def phase_velocity(theta: np.ndarray, dt: float, smooth_window: int | None = None, order: int = 1) -> np.ndarray:
    """Centred differences, then optional SG smoothing."""
    v = np.gradient(np.asarray(theta, float), dt, axis=0)
    if smooth_window:
        v = savitzky_golay(v, smooth_window, order)
    return v


def rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    return uniform_filter1d(np.asarray(x, float), size=max(int(window), 1), axis=0, mode="nearest")


# ---------------------------------------------------------------------------
# libraries


@dataclass(frozen=True)
class Feature:
    kind: str  # const | drift | sin | cos
    m: Tuple[int, ...] = ()
    power: int = 0

    @property
    def name(self) -> str:
        if self.kind == "const":
            return "1"
        if self.kind == "drift":
            return f"t^{self.power}"
        return f"{self.kind}({','.join(map(str, self.m))})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": list(self.m), "power": self.power}


@dataclass
class BasisLibrary:
    features: List[Feature]
    Phi: np.ndarray

    @property
    def names(self) -> List[str]:
        return [f.name for f in self.features]

    def index(self, kind: str, m: Sequence[int] = (), power: int = 0) -> int:
        return self.features.index(Feature(kind, tuple(int(v) for v in m), power))

    def subset(self, rows) -> "BasisLibrary":
        return BasisLibrary(self.features, self.Phi[rows])


def single_combos(n: int) -> List[Tuple[int, ...]]:
    return [tuple(int(v) for v in np.eye(n, dtype=int)[i]) for i in range(n)]


def pair_combos(n: int) -> List[Tuple[int, ...]]:
    out = []
    for i, j in itertools.combinations(range(n), 2):
        m = np.zeros(n, int)
        m[i], m[j] = 1, -1
        out.append(tuple(int(v) for v in m))
    return out


def harmonic_pair_combos(n: int) -> List[Tuple[int, ...]]:
    """2 theta_p - theta_q for p != q."""
    out = []
    for p, q in itertools.permutations(range(n), 2):
        m = np.zeros(n, int)
        m[p], m[q] = 2, -1
        out.append(tuple(int(v) for v in m))
    return out


def canonical_combo(m: Sequence[int]) -> Tuple[int, ...]:
    """Sign-normalise so the first nonzero entry is positive (sin/cos pairs span the same space)."""
    m = np.asarray(m, int)
    nz = np.flatnonzero(m)
    if nz.size and m[nz[0]] < 0:
        m = -m
    return tuple(int(v) for v in m)


def triplet_combos(n: int, doubled: bool = False) -> List[Tuple[int, ...]]:
    """theta_p - theta_q + theta_r (p < r, q distinct); with `doubled`, also
    theta_p - 2 theta_q + theta_r."""
    out = []
    for p, r in itertools.combinations(range(n), 2):
        for q in range(n):
            if q in (p, r):
                continue
            for w in ((1, 2) if doubled else (1,)):
                m = np.zeros(n, int)
                m[p] += 1
                m[r] += 1
                m[q] -= w
                out.append(tuple(int(v) for v in m))
    return out


def build_library(ps: PhaseSeries | np.ndarray, combos: Sequence[Sequence[int]], drift_degree: int = 0, t: np.ndarray | None = None, constant: bool = True) -> BasisLibrary:
    """Columns [1, t, ..., t^d, sin(m.theta), cos(m.theta) per combo]."""
    if len(combos) == 0:
        raise ValueError("library needs at least one combination")
    C = [tuple(int(v) for v in m) for m in combos]
    if len(set(C)) != len(C):
        raise ValueError("duplicate combination vectors in the library")
    if isinstance(ps, PhaseSeries):
        theta = ps.theta
        t = ps.t - ps.t0 if t is None else t
    else:
        theta = np.atleast_2d(np.asarray(ps, float))
        t = np.arange(len(theta), dtype=float) if t is None else t
    feats, cols = [], []
    if constant:
        feats.append(Feature("const"))
        cols.append(np.ones(len(theta)))
    for p in range(1, drift_degree + 1):
        feats.append(Feature("drift", (), p))
        cols.append(np.asarray(t, float) ** p)
    arg = theta @ np.asarray(C, float).T
    for j, m in enumerate(C):
        feats += [Feature("sin", m), Feature("cos", m)]
        cols += [np.sin(arg[:, j]), np.cos(arg[:, j])]
    return BasisLibrary(feats, np.column_stack(cols))


# ---------------------------------------------------------------------------
# regression


@dataclass
class FitResult:
    features: List[Feature]
    coef: np.ndarray  # targets x features
    mse: np.ndarray
    penalty: float | np.ndarray | None = None
    method: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coef = np.atleast_2d(np.asarray(self.coef, float))
        self.mse = np.atleast_1d(np.asarray(self.mse, float))

    @property
    def support(self) -> List[List[int]]:
        return [list(np.flatnonzero(row)) for row in self.coef]

    def support_names(self, target: int = 0) -> List[str]:
        return [self.features[i].name for i in self.support[target]]

    def get(self, target: int, kind: str, m: Sequence[int] = (), power: int = 0) -> float:
        f = Feature(kind, tuple(int(v) for v in m), power)
        return float(self.coef[target, self.features.index(f)]) if f in self.features else 0.0

    def predict(self, lib: BasisLibrary) -> np.ndarray:
        return lib.Phi @ self.coef.T

    def to_dict(self) -> dict:
        pen = self.penalty.tolist() if isinstance(self.penalty, np.ndarray) else self.penalty
        return {
            "method": self.method,
            "features": [f.to_dict() | {"name": f.name} for f in self.features],
            "coef": self.coef.tolist(),
            "support": [[self.features[i].name for i in s] for s in self.support],
            "mse": self.mse.tolist(),
            "penalty": pen,
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _targets(v) -> np.ndarray:
    v = np.asarray(v, float)
    return v[:, None] if v.ndim == 1 else v


def _lstsq(Phi, y):
    if Phi.shape[1] == 0:
        return np.zeros(0)
    sol, _, rank, _ = np.linalg.lstsq(Phi, y, rcond=None)
    if rank < Phi.shape[1]:
        warnings.warn("rank-deficient active set; using the minimum-norm solution", RuntimeWarning, stacklevel=3)
    return sol


def stlsq(lib: BasisLibrary, target, threshold: float, max_iter: int = 50) -> FitResult:
    """Sequential thresholded least squares, iterated to a fixed point."""
    Y = _targets(target)
    N, F = lib.Phi.shape
    if N < F:
        raise ValueError("fewer samples than library columns")
    coef = np.zeros((Y.shape[1], F))
    for i in range(Y.shape[1]):
        active = np.ones(F, bool)
        for _ in range(max_iter):
            c = np.zeros(F)
            c[active] = _lstsq(lib.Phi[:, active], Y[:, i])
            keep = active & (np.abs(c) >= threshold)
            c[~keep] = 0.0
            if np.array_equal(keep, active):
                break
            active = keep
        coef[i] = c
    mse = np.mean((Y - lib.Phi @ coef.T) ** 2, axis=0)
    return FitResult(lib.features, coef, mse, threshold, "stlsq")


def _standardize(lib: BasisLibrary, scale: bool = True):
    Phi = lib.Phi
    const = np.array([f.kind == "const" for f in lib.features])
    X = Phi[:, ~const]
    mu = X.mean(axis=0)
    sd = X.std(axis=0) if scale else np.ones(X.shape[1])
    sd[sd == 0] = 1.0
    return const, (X - mu) / sd, mu, sd


def _lasso_fit(Xs, y, alpha, tol, max_iter, strict):
    model = Lasso(alpha=alpha, fit_intercept=True, tol=tol, max_iter=max_iter, selection="cyclic")
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always", ConvergenceWarning)
        model.fit(Xs, y)
    if any(issubclass(w.category, ConvergenceWarning) for w in rec):
        gap = float(np.ravel(model.dual_gap_)[0])
        if strict:
            raise ConvergenceError(gap)
        log.warning("lasso at alpha=%.3g stopped with duality gap %.3g", alpha, gap)
    return model


def lasso(lib: BasisLibrary, target, penalty: float | None = None, rule: float = 1.2, n_path: int = 50, path_ratio: float = 1e-4, debias: bool = True, standardize: bool = True, tol: float = 1e-8, max_iter: int = 100_000) -> FitResult:
    """L1-penalised regression on standardised columns.

    `penalty` is in the per-sample scale: minimises |Phi x - v|^2 / (2N) + penalty |x|_1
    (times N this is the 1/2 |.|^2 + penalty' |.|_1 form). With penalty=None the
    largest penalty on a log path whose MSE stays within `rule` x the unpenalised
    MSE is taken. A constant column, if present, is handled as an unpenalised intercept.
    With standardize=False columns are only centred, so `penalty` acts on raw coefficients.
    """
    Y = _targets(target)
    const, Xs, mu, sd = _standardize(lib, standardize)
    N = Xs.shape[0]
    F = len(lib.features)
    coef = np.zeros((Y.shape[1], F))
    pens = np.zeros(Y.shape[1])
    for i in range(Y.shape[1]):
        y = Y[:, i]
        if penalty is None:
            ols = np.linalg.lstsq(np.column_stack([np.ones(N), Xs]), y, rcond=None)[0]
            mse_ols = np.mean((y - ols[0] - Xs @ ols[1:]) ** 2)
            amax = np.max(np.abs(Xs.T @ (y - y.mean()))) / N
            chosen = None
            for a in np.logspace(np.log10(amax), np.log10(amax * path_ratio), n_path):
                m = _lasso_fit(Xs, y, a, tol, max_iter, strict=False)
                if np.mean((y - m.predict(Xs)) ** 2) <= rule * mse_ols:
                    chosen = (a, m)
                    break
            if chosen is None:
                chosen = (0.0, None)
            a, m = chosen
        else:
            a = float(penalty)
            m = _lasso_fit(Xs, y, a, tol, max_iter, strict=True) if a > 0 else None
        pens[i] = a
        if m is None:
            w = np.linalg.lstsq(np.column_stack([np.ones(N), Xs]), y, rcond=None)[0]
            b0, w = w[0], w[1:]
        else:
            b0, w = float(m.intercept_), np.asarray(m.coef_, float)
        # undo standardisation
        w_raw = w / sd
        c = np.zeros(F)
        c[~const] = w_raw
        icpt = b0 - float(mu @ w_raw)
        if const.any():
            c[np.flatnonzero(const)[0]] = icpt
        if debias:
            sup = np.flatnonzero(c)
            sup = np.union1d(sup, np.flatnonzero(const)).astype(int)
            c = np.zeros(F)
            c[sup] = np.linalg.lstsq(lib.Phi[:, sup], y, rcond=None)[0]
        coef[i] = c
    mse = np.mean((Y - lib.Phi @ coef.T) ** 2, axis=0)
    return FitResult(lib.features, coef, mse, pens if penalty is None else float(penalty), "lasso", {"rule": rule if penalty is None else None, "debias": debias, "standardize": standardize})


def threshold_fit(fit: FitResult, tol: float) -> FitResult:
    c = fit.coef.copy()
    c[np.abs(c) < tol] = 0.0
    return FitResult(fit.features, c, fit.mse, fit.penalty, fit.method + "+threshold", dict(fit.meta))


def triplet_amplitudes(fit: FitResult, target: int, m: Sequence[int], harmonics: Sequence[int] = (1,)) -> float:
    """H = sqrt(sum_h C_h^2 + D_h^2) over sin/cos of h*m for the listed harmonics."""
    m = np.asarray(m, int)
    s = 0.0
    for h in harmonics:
        key = tuple(int(v) for v in h * m)
        s += fit.get(target, "sin", key) ** 2 + fit.get(target, "cos", key) ** 2
    return float(np.sqrt(s))


def amplitude(C: float, D: float) -> float:
    return float(np.hypot(C, D))


# ---------------------------------------------------------------------------
# slow-phase model fitting and prediction


@dataclass
class SlowPhaseFit:
    system: SlowPhaseSystem
    phi0: np.ndarray
    t: np.ndarray
    data: np.ndarray
    prediction: np.ndarray
    mse: float
    improved: bool

    def per_cycle_error(self) -> np.ndarray:
        return per_cycle_error(self.prediction, self.data)

    def to_dict(self) -> dict:
        return {"system": self.system.to_dict(), "phi0": self.phi0.tolist(), "mse": self.mse, "per_cycle_error": self.per_cycle_error().tolist()}


def per_cycle_error(pred: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Max phase deviation per slow phase, divided by 2 pi times the number of slow cycles."""
    pred = _targets(pred)
    data = _targets(data)
    cycles = np.maximum(np.abs(data[-1] - data[0]) / (2 * np.pi), 1.0)
    return np.max(np.abs(pred - data), axis=0) / (2 * np.pi * cycles)


def fit_slow_phase_coefficients(phi: np.ndarray, phidot: np.ndarray, combos) -> SlowPhaseSystem:
    """Least squares for phi_i' = Omega_i + sum_j a_ij cos phi_j + b_ij sin phi_j."""
    phi = _targets(phi)
    phidot = _targets(phidot)
    X = np.column_stack([np.ones(len(phi)), np.cos(phi), np.sin(phi)])
    sol = np.linalg.lstsq(X, phidot, rcond=None)[0]  # (1 + 2d) x d
    d = phi.shape[1]
    return SlowPhaseSystem(combos, sol[0], sol[1 : 1 + d].T, sol[1 + d :].T)


def fit_slow_phase(phi: np.ndarray, dt: float, combos, smooth_window: int | None = None, optimize_ic: bool = True, ic_span: float = np.pi / 2, sweeps: int = 2, system: SlowPhaseSystem | None = None) -> SlowPhaseFit:
    """Fit the slow-phase field, then tune the initial condition to minimise trajectory MSE.

    The initial-condition search is cyclic over coordinates, each a bounded
    scalar minimisation within +-ic_span of the data value.
    """
    phi = _targets(phi)
    T = dt * (len(phi) - 1)
    t = dt * np.arange(len(phi))
    if system is None:
        v = phase_velocity(phi, dt, smooth_window)
        system = fit_slow_phase_coefficients(phi, v, combos)

    def simulate(x0):
        return integrate_phase_model(system, x0, T, dt, atol=1e-8, rtol=1e-8).data[: len(phi)]

    def cost(x0):
        return float(np.mean((simulate(x0) - phi) ** 2))

    x0 = phi[0].copy()
    best = cost(x0)
    start = best
    if optimize_ic:
        for _ in range(sweeps):
            for j in range(phi.shape[1]):
                def f(s, j=j):
                    y = x0.copy()
                    y[j] = phi[0, j] + s
                    return cost(y)

                res = minimize_scalar(f, bounds=(-ic_span, ic_span), method="bounded", options={"xatol": 1e-4})
                if res.fun < best:
                    best = float(res.fun)
                    x0[j] = phi[0, j] + res.x
    if optimize_ic and not best < start:
        log.warning("initial-condition search did not improve on the data value")
    pred = simulate(x0)
    return SlowPhaseFit(system, x0, t, phi, pred, best, best < start)
