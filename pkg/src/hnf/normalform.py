"""Network systems near Hopf, the two near-identity transformations, and the
emergent triplet couplings G_k with resonance filtering.

Vector-field convention used throughout the package::

    z_k' = gamma_k z_k + beta_k z_k |z_k|^2 + alpha * H_k(z),   beta_k = -1 by default

so the uncoupled limit cycle has radius sqrt(-Re gamma_k / Re beta_k).  After both
transformations the field becomes ``u' = gamma u + beta u|u|^2 + alpha H_lin(u) - alpha^2 G(u)``.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .polyalg import (
    DEFAULT_EPS_RES,
    AlphaSeries,
    ConjPolynomial,
    ExponentVector,
    Key,
    ResonanceError,
    bracket,
    gamma_op,
    modified_poly,
    resonance_value,
    series_bracket,
    series_substitute,
    substitute,
)

log = logging.getLogger(__name__)


class NonResonanceFailure(ValueError):
    """The pairwise stage contains a monomial that cannot be removed."""

    def __init__(self, report: List[dict]):
        self.report = report
        bad = [r for r in report if not r["passed"]]
        msg = "; ".join(f"node {r['k']} <- {r['l']}: {r['monomial']} (value {r['value']:.4g})" for r in bad)
        super().__init__(f"pairwise coupling is resonant: {msg}")


# ---------------------------------------------------------------------------
# system definition


def coupling_from_terms(terms: Dict[Tuple[int, int, int, int], complex]) -> ConjPolynomial:
    """Two-slot coupling h(z, w) from {(s_z, s_w, t_z, t_w): coeff}.

    Variables: slot 0 is z (own node), slot 1 is w (neighbour).
    """
    return ConjPolynomial(2, {(a, b, c, d): v for (a, b, c, d), v in terms.items()})


def coupling_library(name: str) -> ConjPolynomial:
    """Couplings used in the worked examples."""
    lib = {
        # z conj(w)
        "z_wbar": {(1, 0, 0, 1): 1.0},
        # z conj(w) + z^2 conj(w)
        "z_wbar_plus_z2_wbar": {(1, 0, 0, 1): 1.0, (2, 0, 0, 1): 1.0},
        # w + conj(w) z^2  (mean-field form)
        "meanfield": {(0, 1, 0, 0): 1.0, (2, 0, 0, 1): 1.0},
    }
    if name not in lib:
        raise KeyError(f"unknown coupling {name!r}; have {sorted(lib)}")
    return coupling_from_terms(lib[name])


@dataclass
class NetworkSystem:
    n: int
    A: np.ndarray
    lam: np.ndarray | float
    omega: np.ndarray
    h: ConjPolynomial
    alpha: float = 0.0
    beta: Optional[np.ndarray] = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.lam = np.broadcast_to(np.asarray(self.lam, dtype=float), (self.n,)).copy()
        if self.beta is None:
            self.beta = -np.ones(self.n, dtype=complex)
        self.beta = np.broadcast_to(np.asarray(self.beta, dtype=complex), (self.n,)).copy()
        if self.A.shape != (self.n, self.n) or self.omega.shape != (self.n,):
            raise ValueError("adjacency / omega shape does not match n")
        if self.h.n != 2:
            raise ValueError("coupling h must be a polynomial in (z, w)")
        if self.h and min(sum(k) for k in self.h.terms) < 1:
            raise ValueError("coupling h must have vanishing constant term")
        if np.any(np.diag(self.A) != 0):
            log.warning("adjacency has self-loops; they are folded into H_k")

    @property
    def gamma(self) -> np.ndarray:
        return self.lam + 1j * self.omega

    @property
    def r0(self) -> np.ndarray:
        ratio = -self.lam / self.beta.real
        if np.any(ratio <= 0):
            raise ValueError("no stable limit cycle: need lambda > 0 with Re beta < 0")
        return np.sqrt(ratio)

    def with_alpha(self, alpha: float) -> "NetworkSystem":
        return NetworkSystem(self.n, self.A.copy(), self.lam.copy(), self.omega.copy(), self.h, alpha, self.beta.copy())

    def with_omega(self, omega) -> "NetworkSystem":
        return NetworkSystem(self.n, self.A.copy(), self.lam.copy(), np.asarray(omega, float), self.h, self.alpha, self.beta.copy())

    # serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        lam = self.lam.tolist()
        return {
            "n": self.n,
            "adjacency": self.A.tolist(),
            "lambda": lam[0] if len(set(lam)) == 1 else lam,
            "omega": self.omega.tolist(),
            "beta_re": self.beta.real.tolist(),
            "beta_im": self.beta.imag.tolist(),
            "coupling": self.h.to_dict(),
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSystem":
        n = int(d["n"])
        beta = None
        if "beta_re" in d:
            beta = np.asarray(d["beta_re"], float) + 1j * np.asarray(d.get("beta_im", [0.0] * n), float)
        h = d["coupling"]
        h = coupling_library(h) if isinstance(h, str) else ConjPolynomial.from_dict(h)
        return cls(n, np.asarray(d["adjacency"], float), d["lambda"], np.asarray(d["omega"], float), h, float(d.get("alpha", 0.0)), beta)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def ring_adjacency(n: int) -> np.ndarray:
    A = np.zeros((n, n))
    for k in range(n):
        A[k, (k + 1) % n] = A[k, (k - 1) % n] = 1.0
    return A


def chain_adjacency(n: int) -> np.ndarray:
    A = np.zeros((n, n))
    for k in range(n - 1):
        A[k, k + 1] = A[k + 1, k] = 1.0
    return A


def two_triangle_adjacency() -> np.ndarray:
    """Six nodes: triangles {1,2,3} and {4,5,6} plus rungs 1-4, 2-5, 3-6."""
    nbrs = {0: (1, 2, 3), 1: (0, 2, 4), 2: (0, 1, 5), 3: (4, 5, 0), 4: (3, 5, 1), 5: (3, 4, 2)}
    A = np.zeros((6, 6))
    for k, ls in nbrs.items():
        A[k, list(ls)] = 1.0
    return A


# ---------------------------------------------------------------------------
# pairwise stage


def _slot_subs(n: int, k: int, l: int) -> List[ConjPolynomial]:
    return [ConjPolynomial.var(n, k), ConjPolynomial.var(n, l)]


def edge_coupling(sys: NetworkSystem, k: int, l: int, max_degree: int = 5) -> ConjPolynomial:
    """A_kl h(z_k, z_l) as a polynomial in all n variables."""
    if sys.A[k, l] == 0 or not sys.h:
        return ConjPolynomial.zero(sys.n)
    return substitute(sys.h, _slot_subs(sys.n, k, l), max_degree).scale(sys.A[k, l])


def assemble_H(sys: NetworkSystem, max_degree: int = 5) -> List[ConjPolynomial]:
    H = []
    for k in range(sys.n):
        Hk = ConjPolynomial.zero(sys.n)
        for l in range(sys.n):
            Hk = Hk + edge_coupling(sys, k, l, max_degree)
        H.append(Hk)
    return H


def split_linear(H: Sequence[ConjPolynomial]) -> Tuple[List[ConjPolynomial], List[ConjPolynomial]]:
    lin = [p.truncate(1, 1) for p in H]
    nl = [p.truncate(None, 2) for p in H]
    return lin, nl


def check_nonresonance(sys: NetworkSystem, eps_res: float = DEFAULT_EPS_RES) -> List[dict]:
    """Evaluate (d1-d2-1) w_k + (d3-d4) w_l for each nonlinear monomial of h on each edge.

    Linear monomials of h are kept in the normal form, so they are reported but
    never fail the check.
    """
    report = []
    for k in range(sys.n):
        for l in range(sys.n):
            if sys.A[k, l] == 0:
                continue
            for key, c in sys.h.items():
                d1, d3, d2, d4 = key
                val = (d1 - d2 - 1) * sys.omega[k] + (d3 - d4) * sys.omega[l]
                linear = sum(key) == 1
                report.append(
                    {
                        "k": k + 1,
                        "l": l + 1,
                        "monomial": {"z": d1, "w": d3, "zbar": d2, "wbar": d4},
                        "value": float(val),
                        "linear": linear,
                        "passed": bool(linear or abs(val) > eps_res),
                    }
                )
    return report


def compute_P(sys: NetworkSystem, eps_res: float = DEFAULT_EPS_RES, max_degree: int = 5) -> List[ConjPolynomial]:
    report = check_nonresonance(sys, eps_res)
    if not all(r["passed"] for r in report):
        raise NonResonanceFailure(report)
    _, Hnl = split_linear(assemble_H(sys, max_degree))
    g = sys.gamma
    return [modified_poly(Hnl[k], k, g, eps_res) for k in range(sys.n)]


def cubic_field(sys: NetworkSystem) -> List[ConjPolynomial]:
    """(beta_j z_j |z_j|^2)_j."""
    n = sys.n
    out = []
    for j in range(n):
        key = [0] * (2 * n)
        key[j] = 2
        key[n + j] = 1
        out.append(ConjPolynomial(n, {tuple(key): sys.beta[j]}))
    return out


def linear_field(sys: NetworkSystem) -> List[ConjPolynomial]:
    return [ConjPolynomial.var(sys.n, k, coeff=sys.gamma[k]) for k in range(sys.n)]


@dataclass
class TransformSeries:
    P: List[ConjPolynomial]
    Q: List[ConjPolynomial]
    S: List[ConjPolynomial]
    degree: int

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "P": [p.to_dict() for p in self.P],
            "Q": [q.to_dict() for q in self.Q],
        }


def compute_second_transform(sys: NetworkSystem, P: Sequence[ConjPolynomial], eps_res: float = 0.0) -> Tuple[List[ConjPolynomial], List[ConjPolynomial]]:
    """Return (Q, S) with Q_k = S_k hat.

    S_k = L1_k - L2_k where L1_k = [P_k||b z|z|^2], L2_k = [b_k z_k|z_k|^2||P] and
    b = -beta is the cubic coefficient written with the leading minus sign
    (z' = gamma z - b z|z|^2).  With that sign the homological equation reads
    Gamma Q_k - gamma_k Q_k = S_k.
    """
    F3 = [p.scale(-1.0) for p in cubic_field(sys)]
    g = sys.gamma
    Q, S = [], []
    for k in range(sys.n):
        L1 = bracket(P[k], F3)
        L2 = bracket(F3[k], P)
        Sk = L1 - L2
        S.append(Sk)
        Q.append(modified_poly(Sk, k, g, eps_res))
    return Q, S


def compute_transform(sys: NetworkSystem, eps_res: float = DEFAULT_EPS_RES, max_degree: int = 5) -> TransformSeries:
    P = compute_P(sys, eps_res, max_degree)
    Q, S = compute_second_transform(sys, P)
    return TransformSeries(P, Q, S, max_degree)


def homological_residuals(sys: NetworkSystem, T: TransformSeries) -> Tuple[float, float]:
    """Relative max-coefficient residuals of both homological equations."""
    g = sys.gamma
    _, Hnl = split_linear(assemble_H(sys, T.degree))
    r1 = r2 = 0.0
    for k in range(sys.n):
        res = T.P[k].scale(g[k]) + Hnl[k] - gamma_op(T.P[k], g)
        scale = max(Hnl[k].max_abs(), 1e-300)
        r1 = max(r1, res.max_abs() / scale)
        res = T.Q[k].scale(g[k]) + T.S[k] - gamma_op(T.Q[k], g)
        scale = max(T.S[k].max_abs(), 1e-300)
        r2 = max(r2, res.max_abs() / scale)
    return r1, r2


# ---------------------------------------------------------------------------
# emergent couplings


@dataclass
class Contribution:
    kind: str  # "1G" or "2G"
    l: int
    p: int
    coeff: complex


@dataclass
class Hyperedge:
    k: int
    key: Key
    g_coeff: complex
    contributions: List[Contribution] = field(default_factory=list)

    @property
    def field_coeff(self) -> complex:
        """Coefficient in the transformed vector field (multiplies alpha^2)."""
        return -self.g_coeff

    @property
    def exponent(self) -> ExponentVector:
        return ExponentVector.from_key(self.key)

    @property
    def combination(self) -> Tuple[int, ...]:
        n = len(self.key) // 2
        m = [self.key[j] - self.key[n + j] for j in range(n)]
        m[self.k] -= 1
        return tuple(m)

    def to_dict(self) -> dict:
        ev = self.exponent
        fc = self.field_coeff
        return {
            "node": self.k + 1,
            "s": list(ev.s),
            "t": list(ev.t),
            "monomial": ev.pretty(),
            "re": fc.real,
            "im": fc.imag,
            "provenance": [
                {"tag": f"{c.kind}({c.l + 1},{c.p + 1})", "re": -c.coeff.real, "im": -c.coeff.imag}
                for c in self.contributions
            ],
        }


@dataclass
class Hypernetwork:
    system: NetworkSystem
    transform: TransformSeries
    G: List[ConjPolynomial]
    pieces: List[Dict[Tuple[str, int, int], ConjPolynomial]]
    resonant: List[ConjPolynomial]
    hyperedges: List[Hyperedge]
    shift_terms: List[Hyperedge]
    linear: List[ConjPolynomial]
    eps_res: float

    def edges_at(self, k: int) -> List[Hyperedge]:
        return [e for e in self.hyperedges if e.k == k]

    def to_dict(self) -> dict:
        return {
            "eps_res": self.eps_res,
            "hyperedges": [e.to_dict() for e in self.hyperedges],
            "frequency_shift_terms": [e.to_dict() for e in self.shift_terms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def compute_G(sys: NetworkSystem, P: Sequence[ConjPolynomial], max_degree: int = 4, eps_res: float = DEFAULT_EPS_RES):
    """G_k = [P_k||H] - [H_lin,k||P] through degree max_degree, and its tree pieces.

    Returns (G, pieces) where pieces[k][(kind, l, p)] sums to G[k].
    """
    n = sys.n
    H = assemble_H(sys)
    Hlin, _ = split_linear(H)
    g = sys.gamma
    G = []
    for k in range(n):
        Gk = bracket(P[k], H, max_degree) - bracket(Hlin[k], P, max_degree)
        G.append(Gk)

    # hat h_{kl}: the part of P_k coming from edge (k, l)
    hat = {}
    for k in range(n):
        for l in range(n):
            if sys.A[k, l] != 0:
                e = edge_coupling(sys, k, l).truncate(None, 2)
                hat[(k, l)] = modified_poly(e, k, g, eps_res) if e else ConjPolynomial.zero(n)
    zero = ConjPolynomial.zero(n)
    h_lin_w = sys.h[(0, 1, 0, 0)]
    h_lin_z = sys.h[(1, 0, 0, 0)]
    pieces: List[Dict[Tuple[str, int, int], ConjPolynomial]] = []
    for k in range(n):
        pk: Dict[Tuple[str, int, int], ConjPolynomial] = {}

        def add(key, poly):
            if poly:
                pk[key] = pk.get(key, zero) + poly

        for l in range(n):
            if (k, l) not in hat:
                continue
            hk = hat[(k, l)]
            for p in range(n):
                # derivative in node k slot, fed by edge (k, p)
                if sys.A[k, p] != 0:
                    S = [zero] * n
                    S[k] = edge_coupling(sys, k, p)
                    add(("1G", l, p), bracket(hk, S, max_degree))
                if l != k and sys.A[l, p] != 0:
                    S = [zero] * n
                    S[l] = edge_coupling(sys, l, p)
                    add(("2G", l, p), bracket(hk, S, max_degree))
                # linear part of the coupling feeding back through P
                if h_lin_w != 0 and (l, p) in hat:
                    add(("2G", l, p), hat[(l, p)].scale(-sys.A[k, l] * h_lin_w).truncate(max_degree))
                if h_lin_z != 0 and (k, p) in hat:
                    add(("1G", l, p), hat[(k, p)].scale(-sys.A[k, l] * h_lin_z).truncate(max_degree))
        pieces.append(pk)
    return G, pieces


def is_resonant(key: Key, k: int, omega: Sequence[float], eps_res: float) -> bool:
    """Triple filter: |sum (s_j - t_j) w_j - w_k| <= eps_res."""
    return abs(resonance_value(key, k, 1j * np.asarray(omega, float)).imag) <= eps_res


def filter_resonant(sys: NetworkSystem, G: Sequence[ConjPolynomial], pieces, eps_res: float):
    resonant, edges, shifts = [], [], []
    n = sys.n
    for k in range(n):
        Rk = G[k].filter(lambda key, c: is_resonant(key, k, sys.omega, eps_res))
        resonant.append(Rk)
        for key, c in Rk.items():
            contribs = [
                Contribution(kind, l, p, poly[key])
                for (kind, l, p), poly in sorted(pieces[k].items())
                if poly[key] != 0
            ]
            e = Hyperedge(k, key, c, contribs)
            m = e.combination
            (shifts if not any(m) else edges).append(e)
    return resonant, edges, shifts


def algorithm1(sys: NetworkSystem, eps_res: float = DEFAULT_EPS_RES, max_degree: int = 5, g_degree: int = 4) -> Hypernetwork:
    T = compute_transform(sys, eps_res, max_degree)
    G, pieces = compute_G(sys, T.P, g_degree, eps_res)
    resonant, edges, shifts = filter_resonant(sys, G, pieces, eps_res)
    Hlin, _ = split_linear(assemble_H(sys, max_degree))
    return Hypernetwork(sys, T, G, pieces, resonant, edges, shifts, Hlin, eps_res)


def sixring_reduction(sys: NetworkSystem, eps_res: float = DEFAULT_EPS_RES) -> Hypernetwork:
    if sys.n != 6 or not np.array_equal(sys.A != 0, two_triangle_adjacency() != 0):
        raise ValueError("expected the six-node two-triangle topology")
    return algorithm1(sys, eps_res)


def mean_field_normal_form(sys: NetworkSystem, eps_res: float = DEFAULT_EPS_RES) -> Hypernetwork:
    if sys.h[(0, 1, 0, 0)] == 0:
        raise ValueError("mean-field form expects a linear term in w")
    return algorithm1(sys, eps_res)


# ---------------------------------------------------------------------------
# vector fields, numeric transforms, symbolic re-expansion


def original_field(sys: NetworkSystem, alpha: float | None = None) -> List[ConjPolynomial]:
    a = sys.alpha if alpha is None else alpha
    H = assemble_H(sys, max_degree=None)
    lin = linear_field(sys)
    cub = cubic_field(sys)
    return [lin[k] + cub[k] + H[k].scale(a) for k in range(sys.n)]


def normal_form_field(hn: Hypernetwork, alpha: float | None = None, filtered: bool = True) -> List[ConjPolynomial]:
    sys = hn.system
    a = sys.alpha if alpha is None else alpha
    lin = linear_field(sys)
    cub = cubic_field(sys)
    G = hn.resonant if filtered else hn.G
    return [lin[k] + cub[k] + hn.linear[k].scale(a) - G[k].scale(a * a) for k in range(sys.n)]


def transform_state(T: TransformSeries, alpha: float, z: np.ndarray) -> np.ndarray:
    """u = w - alpha Q(w), w = z - alpha P(z).  z has shape (n,) or (n, m)."""
    z = np.asarray(z, dtype=complex)
    w = z - alpha * np.array([p.evaluate(z) for p in T.P])
    return w - alpha * np.array([q.evaluate(w) for q in T.Q])


def _as_series(polys, order):
    return [AlphaSeries.lift(p, order) for p in polys]


def reexpand(sys: NetworkSystem, T: TransformSeries, max_degree: int = 5, order: int = 2) -> List[AlphaSeries]:
    """u' as an alpha-series in u: [T_k||F](z) with z = T^{-1}(u) substituted."""
    n = sys.n
    ident = [AlphaSeries.lift(ConjPolynomial.var(n, j), order) for j in range(n)]
    Ps = _as_series(T.P, order)
    Qs = _as_series([q.truncate(max_degree) for q in T.Q], order)

    def forward(z):
        w = [z[j] - series_substitute(Ps[j], z, max_degree).shift(1) for j in range(n)]
        return [w[j] - series_substitute(Qs[j], w, max_degree).shift(1) for j in range(n)]

    Tz = forward(ident)
    H = assemble_H(sys, max_degree)
    base = [linear_field(sys)[k] + cubic_field(sys)[k] for k in range(n)]
    F = [AlphaSeries(n, {0: base[k], 1: H[k]}, order) for k in range(n)]
    udot = [series_bracket(Tz[k], F, max_degree) for k in range(n)]

    # z = u + (z - T(z)) by fixed-point iteration; each pass fixes one more alpha order
    Z = ident
    for _ in range(order + 1):
        TZ = forward(Z)
        Z = [ident[j] + Z[j] - TZ[j] for j in range(n)]
        Z = [s.truncate(max_degree) for s in Z]
    return [series_substitute(udot[k], Z, max_degree) for k in range(n)]


def cancellation_report(sys: NetworkSystem, T: TransformSeries, hn: Optional[Hypernetwork] = None, max_degree: int = 5) -> dict:
    """Max |coeff| of alpha^1 terms that should vanish, and the alpha^2 mismatch vs -G."""
    U = reexpand(sys, T, max_degree, order=2)
    Hlin, _ = split_linear(assemble_H(sys, max_degree))
    a1 = 0.0
    a2 = 0.0
    for k in range(sys.n):
        resid = U[k][1] - Hlin[k]
        a1 = max(a1, resid.max_abs())
        if hn is not None:
            diff = U[k][2].truncate(4) + hn.G[k]
            a2 = max(a2, diff.max_abs())
    return {"alpha1_max": a1, "alpha2_vs_G_max": a2 if hn is not None else None, "degree": max_degree}


# ---------------------------------------------------------------------------
# linear coupling: frequency shifts


def coupling_matrix(sys: NetworkSystem) -> np.ndarray:
    cw = sys.h[(0, 1, 0, 0)]
    cz = sys.h[(1, 0, 0, 0)]
    C = sys.A.astype(complex) * cw
    C += np.diag(sys.A.sum(axis=1) * cz)
    return C


def linear_frequency_shift(sys: NetworkSystem, alpha: float | None = None) -> Tuple[np.ndarray, np.ndarray]:
    """Imag parts of eig(diag(gamma) + alpha C), matched to nodes.

    Returns (frequencies, shifts) in node order.
    """
    a = sys.alpha if alpha is None else alpha
    U = np.diag(sys.gamma) + a * coupling_matrix(sys)
    vals, vecs = np.linalg.eig(U)
    om = sys.omega
    gaps = np.abs(om[:, None] - om[None, :])[~np.eye(sys.n, dtype=bool)]
    if gaps.size and gaps.min() <= a:
        warnings.warn("near-degenerate frequencies: eigenvalue-to-node matching is ambiguous", RuntimeWarning)
    rows, cols = linear_sum_assignment(-np.abs(vecs))
    freqs = np.empty(sys.n)
    freqs[rows] = vals[cols].imag
    return freqs, freqs - om
