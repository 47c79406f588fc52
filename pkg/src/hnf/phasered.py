"""Phase reduction of the emergent hypernetwork.

Polar substitution u_k = r_k e^{i theta_k} with r frozen at the uncoupled
limit-cycle radius, followed by first-order averaging (only slow phase
combinations survive).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import sympy

from .normalform import (
    Hypernetwork,
    NetworkSystem,
    coupling_library,
    is_resonant,
    linear_frequency_shift,
    ring_adjacency,
)
from .polyalg import DEFAULT_EPS_RES


@dataclass(frozen=True)
class PhaseTerm:
    node: int
    m: Tuple[int, ...]
    sin: float
    cos: float


@dataclass
class PhaseModel:
    """theta_k' = Omega_k + sum_terms(k) [sin * sin(m.theta) + cos * cos(m.theta)]."""

    n: int
    Omega: np.ndarray
    terms: List[PhaseTerm] = field(default_factory=list)

    def __post_init__(self):
        self.Omega = np.asarray(self.Omega, dtype=float)

    def terms_at(self, k: int) -> List[PhaseTerm]:
        return [t for t in self.terms if t.node == k]

    def rhs(self, theta: np.ndarray) -> np.ndarray:
        out = self.Omega.astype(float).copy()
        for t in self.terms:
            arg = np.dot(t.m, theta)
            out[t.node] += t.sin * np.sin(arg) + t.cos * np.cos(arg)
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "Omega": self.Omega.tolist(),
            "terms": [{"node": t.node + 1, "m": list(t.m), "sin": t.sin, "cos": t.cos} for t in self.terms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseModel":
        terms = [PhaseTerm(t["node"] - 1, tuple(t["m"]), t["sin"], t["cos"]) for t in d["terms"]]
        return cls(d["n"], np.asarray(d["Omega"], float), terms)


@dataclass
class SlowPhaseSystem:
    """phi_i' = Omega_i + sum_j a_ij cos(phi_j) + b_ij sin(phi_j)."""

    combos: np.ndarray
    Omega: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.combos = np.atleast_2d(np.asarray(self.combos, dtype=int))
        self.Omega = np.asarray(self.Omega, float)
        self.a = np.asarray(self.a, float)
        self.b = np.asarray(self.b, float)

    @property
    def dim(self) -> int:
        return len(self.Omega)

    def rhs(self, phi: np.ndarray) -> np.ndarray:
        return self.Omega + self.a @ np.cos(phi) + self.b @ np.sin(phi)

    def params(self) -> np.ndarray:
        return np.concatenate([self.Omega, self.a.ravel(), self.b.ravel()])

    @classmethod
    def from_params(cls, combos, p: np.ndarray) -> "SlowPhaseSystem":
        d = np.atleast_2d(combos).shape[0]
        return cls(combos, p[:d], p[d : d + d * d].reshape(d, d), p[d + d * d :].reshape(d, d))

    def to_dict(self) -> dict:
        return {"combos": self.combos.tolist(), "Omega": self.Omega.tolist(), "a": self.a.tolist(), "b": self.b.tolist()}


# ---------------------------------------------------------------------------


def polar_reduce(hn: Hypernetwork, alpha: float | None = None, eps_res: float | None = None, include_linear_shift: bool = False) -> PhaseModel:
    """Averaged phase equations from the filtered normal form.

    A field term c * u^s conj(u)^t at node k contributes
    alpha^2 * R * Im(c e^{i m.theta}) with R = prod r_j^{s_j+t_j} / r_k.
    Amplitude-only terms (m = 0) shift Omega_k.
    """
    sys = hn.system
    a = sys.alpha if alpha is None else alpha
    eps = hn.eps_res if eps_res is None else eps_res
    if np.any(sys.lam <= 0):
        raise ValueError("lambda <= 0: no limit cycle to reduce onto")
    r = sys.r0
    n = sys.n
    Omega = sys.omega.astype(float).copy()
    if include_linear_shift and any(p for p in hn.linear):
        Omega = linear_frequency_shift(sys, a)[0]
    terms = []
    for e in hn.shift_terms + hn.hyperedges:
        if not is_resonant(e.key, e.k, sys.omega, eps):
            continue
        s, t = np.array(e.key[:n]), np.array(e.key[n:])
        R = np.prod(r ** (s + t)) / r[e.k]
        c = a * a * R * e.field_coeff
        m = e.combination
        if not any(m):
            Omega[e.k] += c.imag
        else:
            terms.append(PhaseTerm(e.k, m, float(c.real), float(c.imag)))
    return PhaseModel(n, Omega, terms)


def rho(p: int, q: int, r0: float, omegas: Sequence[float]) -> Tuple[float, float]:
    """(sin, cos) coefficients of rho_pq; p, q are 0-based node indices."""
    d = omegas[p] - omegas[q]
    den = 4 * r0**4 + d * d
    return 2 * r0**2 / den, -d / den


def chi_upsilon(p: int, q: int, r: int, r0: float, omegas: Sequence[float]) -> Tuple[float, float]:
    dq = omegas[p] - omegas[q]
    dr = omegas[p] - omegas[r]
    r4 = r0**4
    chi = r0**2 * (4 / (4 * r4 + dq**2) + 4 / (4 * r4 + dr**2) + 1 / (r4 + omegas[q] ** 2) + 1 / (r4 + omegas[r] ** 2))
    ups = -2 * dq / (4 * r4 + dq**2) - 2 * dr / (4 * r4 + dr**2) + omegas[q] / (r4 + omegas[q] ** 2) + omegas[r] / (r4 + omegas[r] ** 2)
    return chi, ups


def sigma(p: int, q: int, r: int, r0: float, omegas: Sequence[float]) -> Tuple[float, float]:
    """(sin, cos) coefficients of sigma_pqr = -chi sin + upsilon cos."""
    chi, ups = chi_upsilon(p, q, r, r0, omegas)
    return -chi, ups


def slow_phase_field(pm: PhaseModel, combos: Sequence[Sequence[int]]) -> SlowPhaseSystem:
    """Chain rule: phi_i = c_i . theta, with node terms rewritten in the phi's."""
    C = np.atleast_2d(np.asarray(combos, dtype=int))
    if C.shape[1] != pm.n:
        raise IndexError("combination vector length does not match node count")
    d = C.shape[0]
    Omega = C @ pm.Omega
    a = np.zeros((d, d))
    b = np.zeros((d, d))
    for t in pm.terms:
        m = np.asarray(t.m)
        for j in range(d):
            if np.array_equal(m, C[j]):
                sgn = 1
                break
            if np.array_equal(m, -C[j]):
                sgn = -1
                break
        else:
            raise ValueError(f"term combination {t.m} is not one of the slow phases")
        for i in range(d):
            w = C[i, t.node]
            a[i, j] += w * t.cos
            b[i, j] += w * sgn * t.sin
    return SlowPhaseSystem(C, Omega, a, b)


# ---------------------------------------------------------------------------
# mean-field construction


def oa_build(Omega: Sequence[float], sigma_k: Sequence[float] | float, mu: float, alpha: float, A: np.ndarray | None = None) -> NetworkSystem:
    """Mean-field network: gamma_k = i Omega_k + mu - sigma_k, beta_k = -mu,
    h(z_k, z_l) = z_l + conj(z_l) z_k^2 scaled by alpha."""
    Omega = np.asarray(Omega, float)
    n = len(Omega)
    sig = np.broadcast_to(np.asarray(sigma_k, float), (n,))
    if np.any(mu <= sig):
        raise ValueError("subcritical: need mu > sigma_k for every population")
    A = ring_adjacency(n) if A is None else np.asarray(A, float)
    return NetworkSystem(n, A, mu - sig, Omega, coupling_library("meanfield"), alpha, beta=-mu * np.ones(n))


def oa_radius(mu: float, sigma_k) -> np.ndarray:
    return np.sqrt((mu - np.asarray(sigma_k, float)) / mu)


# ---------------------------------------------------------------------------
# numerical averaging oracle


def torus_parametrization(combos: Sequence[Sequence[int]]) -> Tuple[np.ndarray, np.ndarray]:
    """Return (X, N): combos @ X = I and N an integer basis of the fast directions (combos @ N = 0)."""
    C = sympy.Matrix(np.atleast_2d(np.asarray(combos, int)).tolist())
    X = np.array(C.pinv().tolist(), dtype=float)
    cols = []
    for v in C.nullspace():
        den = sympy.ilcm(*[sympy.fraction(x)[1] for x in v])
        w = [int(x * den) for x in v]
        g = np.gcd.reduce(np.abs(w))
        cols.append(np.asarray(w) // max(g, 1))
    N = np.array(cols, dtype=int).T if cols else np.zeros((C.shape[1], 0), dtype=int)
    return X, N


def averaged_node_field(field_poly, k: int, r: np.ndarray, combos, n_fast: int = 16, n_slow: int = 32) -> np.ndarray:
    """Trapezoid average of theta_k' = Im(F_k(u)/u_k) over the fast sub-torus.

    Returns Fourier coefficients [const, sin phi_j, cos phi_j for each slow phase j]
    from an (n_slow)^d x (n_fast)^f grid.  `field_poly` is the node-k field polynomial.
    """
    C = np.atleast_2d(np.asarray(combos, int))
    X, Nint = torus_parametrization(C)
    d, f = C.shape[0], Nint.shape[1]
    phis = np.meshgrid(*([np.arange(n_slow) * 2 * np.pi / n_slow] * d), indexing="ij")
    psis = np.meshgrid(*([np.arange(n_fast) * 2 * np.pi / n_fast] * f), indexing="ij") if f else []
    phi = np.stack([p.ravel() for p in phis])  # d x S
    psi = np.stack([p.ravel() for p in psis]) if f else np.zeros((0, 1))
    theta = (X @ phi)[:, :, None] + (Nint @ psi)[:, None, :]  # n x S x F
    u = r[:, None, None] * np.exp(1j * theta)
    shape = u.shape[1:]
    vals = field_poly.evaluate(u.reshape(len(r), -1)).reshape(shape)
    thdot = np.imag(vals / u[k])
    avg = thdot.mean(axis=1)  # over fast grid
    out = [avg.mean()]
    for j in range(d):
        out.append(2 * np.mean(avg * np.sin(phi[j])))
        out.append(2 * np.mean(avg * np.cos(phi[j])))
    return np.asarray(out)


def reduced_node_field(pm: PhaseModel, k: int, combos) -> np.ndarray:
    """Same coefficient layout as averaged_node_field, from a PhaseModel."""
    C = np.atleast_2d(np.asarray(combos, int))
    out = np.zeros(1 + 2 * C.shape[0])
    out[0] = pm.Omega[k]
    for t in pm.terms_at(k):
        for j in range(C.shape[0]):
            if np.array_equal(t.m, C[j]):
                out[1 + 2 * j] += t.sin
                out[2 + 2 * j] += t.cos
            elif np.array_equal(t.m, -C[j]):
                out[1 + 2 * j] -= t.sin
                out[2 + 2 * j] += t.cos
    return out


def to_json(obj) -> str:
    return json.dumps(obj.to_dict(), indent=2)


DEFAULT_EPS = DEFAULT_EPS_RES
