"""Complex polynomials in variables z_1..z_n and their conjugates.

A monomial is keyed by the concatenated exponent tuple (s_1..s_n, t_1..t_n),
meaning prod z_j^{s_j} conj(z_j)^{t_j}.  Coefficients are complex doubles.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from operator import add
from typing import Dict, Iterable, Iterator, Mapping, Sequence, Tuple

import numpy as np

Key = Tuple[int, ...]

DEFAULT_EPS_RES = 0.1


class DimensionError(ValueError):
    pass


class ResonanceError(ValueError):
    """Raised when a monomial cannot be removed (denominator too small)."""

    def __init__(self, key: Key, node: int, value: complex):
        self.key = key
        self.node = node
        self.value = value
        n = len(key) // 2
        ev = ExponentVector(key[:n], key[n:])
        super().__init__(
            f"resonant monomial {ev.pretty()} at node {node + 1}: "
            f"denominator {value:.6g}"
        )


@dataclass(frozen=True)
class ExponentVector:
    s: Tuple[int, ...]
    t: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(int(x) for x in self.s))
        object.__setattr__(self, "t", tuple(int(x) for x in self.t))
        if len(self.s) != len(self.t):
            raise DimensionError("s and t must have equal length")
        if any(x < 0 for x in self.s + self.t):
            raise ValueError("exponents must be non-negative")

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def degree(self) -> int:
        return sum(self.s) + sum(self.t)

    @property
    def key(self) -> Key:
        return self.s + self.t

    @classmethod
    def from_key(cls, key: Key) -> "ExponentVector":
        n = len(key) // 2
        return cls(key[:n], key[n:])

    def pretty(self, var: str = "u") -> str:
        parts = []
        for j, e in enumerate(self.s):
            if e:
                parts.append(f"{var}{j + 1}" + (f"^{e}" if e > 1 else ""))
        for j, e in enumerate(self.t):
            if e:
                parts.append(f"~{var}{j + 1}" + (f"^{e}" if e > 1 else ""))
        return "*".join(parts) if parts else "1"


def _deg(key: Key) -> int:
    return sum(key)


def _order(key: Key):
    # graded lex on the concatenated (s, t) tuple, highest exponent first
    return (_deg(key), tuple(-e for e in key))


class ConjPolynomial:
    """Canonical sparse polynomial: no zero coefficients, unique keys.

    Treated as immutable by every function in this package.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Key, complex] | None = None):
        self.n = int(n)
        clean: Dict[Key, complex] = {}
        if terms:
            for k, c in terms.items():
                k = tuple(int(e) for e in k)
                if len(k) != 2 * self.n:
                    raise DimensionError(f"key {k} does not match n={self.n}")
                c = complex(c)
                if c != 0:
                    clean[k] = clean.get(k, 0) + c
            clean = {k: c for k, c in clean.items() if c != 0}
        self._terms = clean

    # construction helpers -------------------------------------------------
    @classmethod
    def _raw(cls, n: int, terms: Dict[Key, complex]) -> "ConjPolynomial":
        p = cls.__new__(cls)
        p.n = n
        p._terms = {k: c for k, c in terms.items() if c != 0}
        return p

    @classmethod
    def zero(cls, n: int) -> "ConjPolynomial":
        return cls._raw(n, {})

    @classmethod
    def const(cls, n: int, c: complex) -> "ConjPolynomial":
        return cls._raw(n, {(0,) * (2 * n): complex(c)})

    @classmethod
    def var(cls, n: int, j: int, conj: bool = False, coeff: complex = 1.0) -> "ConjPolynomial":
        key = [0] * (2 * n)
        key[j + (n if conj else 0)] = 1
        return cls._raw(n, {tuple(key): complex(coeff)})

    @classmethod
    def monomial(cls, s: Sequence[int], t: Sequence[int], coeff: complex = 1.0) -> "ConjPolynomial":
        ev = ExponentVector(tuple(s), tuple(t))
        return cls._raw(ev.n, {ev.key: complex(coeff)})

    # accessors -------------------------------------------------------------
    @property
    def terms(self) -> Dict[Key, complex]:
        return dict(self._terms)

    def items(self) -> Iterator[Tuple[Key, complex]]:
        for k in sorted(self._terms, key=_order):
            yield k, self._terms[k]

    def coeff(self, s: Sequence[int], t: Sequence[int]) -> complex:
        return self._terms.get(tuple(s) + tuple(t), 0j)

    def __getitem__(self, key: Key) -> complex:
        return self._terms.get(tuple(key), 0j)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self._terms.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConjPolynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def __repr__(self) -> str:
        if not self._terms:
            return f"ConjPolynomial(n={self.n}, 0)"
        body = " + ".join(
            f"({c.real:.6g}{c.imag:+.6g}j)*{ExponentVector.from_key(k).pretty('z')}"
            for k, c in self.items()
        )
        return f"ConjPolynomial(n={self.n}, {body})"

    # arithmetic -------------------------------------------------------------
    def _check(self, other: "ConjPolynomial"):
        if self.n != other.n:
            raise DimensionError(f"n mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "ConjPolynomial") -> "ConjPolynomial":
        self._check(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0) + c
        return ConjPolynomial._raw(self.n, out)

    def __neg__(self) -> "ConjPolynomial":
        return ConjPolynomial._raw(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: "ConjPolynomial") -> "ConjPolynomial":
        return self + (-other)

    def scale(self, c: complex) -> "ConjPolynomial":
        c = complex(c)
        return ConjPolynomial._raw(self.n, {k: c * v for k, v in self._terms.items()})

    def __rmul__(self, c) -> "ConjPolynomial":
        if isinstance(c, (int, float, complex, np.number)):
            return self.scale(c)
        return NotImplemented

    def __mul__(self, other) -> "ConjPolynomial":
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return self.mul(other)

    def mul(self, other: "ConjPolynomial", max_degree: int | None = None) -> "ConjPolynomial":
        self._check(other)
        out: Dict[Key, complex] = {}
        rhs = [(k2, c2, _deg(k2)) for k2, c2 in other._terms.items()]
        for k1, c1 in self._terms.items():
            room = None if max_degree is None else max_degree - _deg(k1)
            for k2, c2, d2 in rhs:
                if room is not None and d2 > room:
                    continue
                k = tuple(map(add, k1, k2))
                out[k] = out.get(k, 0) + c1 * c2
        return ConjPolynomial._raw(self.n, out)

    def conj(self) -> "ConjPolynomial":
        n = self.n
        return ConjPolynomial._raw(
            n, {k[n:] + k[:n]: c.conjugate() for k, c in self._terms.items()}
        )

    def truncate(self, max_degree: int | None = None, min_degree: int = 0) -> "ConjPolynomial":
        return ConjPolynomial._raw(
            self.n,
            {
                k: c
                for k, c in self._terms.items()
                if _deg(k) >= min_degree and (max_degree is None or _deg(k) <= max_degree)
            },
        )

    def homogeneous(self, d: int) -> "ConjPolynomial":
        return self.truncate(d, d)

    def filter(self, pred) -> "ConjPolynomial":
        return ConjPolynomial._raw(self.n, {k: c for k, c in self._terms.items() if pred(k, c)})

    def max_abs(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # evaluation -------------------------------------------------------------
    def evaluate(self, z) -> np.ndarray:
        """Evaluate at z with shape (n,) or (n, m); returns scalar or (m,)."""
        z = np.asarray(z, dtype=complex)
        zc = np.conj(z)
        out = np.zeros(z.shape[1:], dtype=complex)
        n = self.n
        for k, c in self._terms.items():
            term = np.full(z.shape[1:], c, dtype=complex)
            for j in range(n):
                if k[j]:
                    term = term * z[j] ** k[j]
                if k[n + j]:
                    term = term * zc[j] ** k[n + j]
            out = out + term
        return out

    # serialization ------------------------------------------------------------
    def to_dict(self) -> dict:
        n = self.n
        return {
            "n": n,
            "terms": [
                {"s": list(k[:n]), "t": list(k[n:]), "re": c.real, "im": c.imag}
                for k, c in self.items()
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConjPolynomial":
        n = int(d["n"])
        terms: Dict[Key, complex] = {}
        for term in d["terms"]:
            key = tuple(term["s"]) + tuple(term["t"])
            terms[key] = terms.get(key, 0) + complex(term["re"], term.get("im", 0.0))
        return cls(n, terms)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ConjPolynomial":
        return cls.from_dict(json.loads(text))


def arith(P: ConjPolynomial, Q: ConjPolynomial | None = None, op: str = "add", c: complex = 1.0) -> ConjPolynomial:
    """Functional front for add / mul / scale / conj."""
    if op == "add":
        return P + Q
    if op == "mul":
        return P.mul(Q)
    if op == "scale":
        return P.scale(c)
    if op == "conj":
        return P.conj()
    raise ValueError(f"unknown op {op!r}")


# ---------------------------------------------------------------------------
# gamma vectors and resonance


def gamma_vector(lam: float, omega: Sequence[float]) -> np.ndarray:
    g = lam + 1j * np.asarray(omega, dtype=float)
    if np.any(g == 0):
        raise ValueError("gamma entries must be nonzero")
    return g


def resonance_value(key: Key | ExponentVector, k: int, g: Sequence[complex]) -> complex:
    """sum s_j g_j + sum t_j conj(g_j) - g_k  (k is 0-based)."""
    if isinstance(key, ExponentVector):
        key = key.key
    g = np.asarray(g, dtype=complex)
    n = len(g)
    if len(key) != 2 * n:
        raise DimensionError("exponent vector does not match gamma")
    s = np.asarray(key[:n])
    t = np.asarray(key[n:])
    return complex(s @ g + t @ np.conj(g) - g[k])


def _monomial_gamma(key: Key, g: np.ndarray) -> complex:
    n = len(g)
    total = 0j
    for j in range(n):
        if key[j]:
            total += key[j] * g[j]
        if key[n + j]:
            total += key[n + j] * g[j].conjugate()
    return total


def gamma_op(R: ConjPolynomial, g: Sequence[complex]) -> ConjPolynomial:
    g = np.asarray(g, dtype=complex)
    if len(g) != R.n:
        raise DimensionError("gamma length mismatch")
    return ConjPolynomial._raw(R.n, {k: c * _monomial_gamma(k, g) for k, c in R._terms.items()})


def modified_poly(Q: ConjPolynomial, k: int, g: Sequence[complex], eps_res: float = 0.0) -> ConjPolynomial:
    """Divide every monomial by its node-k resonance value.

    A denominator whose modulus is <= eps_res raises ResonanceError.
    """
    g = np.asarray(g, dtype=complex)
    if len(g) != Q.n:
        raise DimensionError("gamma length mismatch")
    out = {}
    for key, c in Q._terms.items():
        den = _monomial_gamma(key, g) - g[k]
        if abs(den) <= eps_res or den == 0:
            raise ResonanceError(key, k, den)
        out[key] = c / den
    return ConjPolynomial._raw(Q.n, out)


def degree_bounds(P: ConjPolynomial) -> Tuple[int, int]:
    if not P:
        raise ValueError("degree of the zero polynomial is undefined")
    degs = [_deg(k) for k in P._terms]
    return min(degs), max(degs)


# ---------------------------------------------------------------------------
# bracket and substitution


def _shift(P: ConjPolynomial, key: Key, coeff: complex, out: Dict[Key, complex], max_degree=None):
    d0 = _deg(key)
    for k2, c2 in P._terms.items():
        if max_degree is not None and d0 + _deg(k2) > max_degree:
            continue
        k = tuple(a + b for a, b in zip(key, k2))
        out[k] = out.get(k, 0) + coeff * c2


def bracket(R: ConjPolynomial, S: Sequence[ConjPolynomial], max_degree: int | None = None) -> ConjPolynomial:
    """[R||S] = sum_j d_{z_j}R * S_j + d_{conj z_j}R * conj(S_j)."""
    n = R.n
    if len(S) != n or any(Sj.n != n for Sj in S):
        raise DimensionError("bracket: S must be n polynomials in n variables")
    Sc = [None] * n
    out: Dict[Key, complex] = {}
    for key, c in R._terms.items():
        for j in range(n):
            e = key[j]
            if e and S[j]:
                k = list(key)
                k[j] -= 1
                _shift(S[j], tuple(k), c * e, out, max_degree)
            e = key[n + j]
            if e and S[j]:
                if Sc[j] is None:
                    Sc[j] = S[j].conj()
                k = list(key)
                k[n + j] -= 1
                _shift(Sc[j], tuple(k), c * e, out, max_degree)
    return ConjPolynomial._raw(n, out)


class _PowerCache:
    def __init__(self, base: ConjPolynomial, max_degree):
        self.base = base
        self.max_degree = max_degree
        self.powers = [ConjPolynomial.const(base.n, 1.0), base]

    def get(self, e: int) -> ConjPolynomial:
        while len(self.powers) <= e:
            self.powers.append(self.powers[-1].mul(self.base, self.max_degree))
        return self.powers[e]


def substitute(P: ConjPolynomial, subs: Sequence[ConjPolynomial], truncate_at: int | None = None) -> ConjPolynomial:
    """Replace z_j -> subs_j and conj(z_j) -> conj(subs_j), expand, truncate."""
    n = P.n
    if len(subs) != n:
        raise DimensionError("substitute: need one polynomial per variable")
    m = subs[0].n if subs else n
    if any(q.n != m for q in subs):
        raise DimensionError("substitute: inconsistent target dimension")
    if truncate_at is not None and truncate_at < 1:
        raise ValueError("truncate_at must be >= 1")
    caches = [_PowerCache(q, truncate_at) for q in subs] + [
        _PowerCache(q.conj(), truncate_at) for q in subs
    ]
    acc: Dict[Key, complex] = {}
    for key, c in P._terms.items():
        term = ConjPolynomial.const(m, c)
        for idx, e in enumerate(key):
            if e:
                term = term.mul(caches[idx].get(e), truncate_at)
        _accumulate(acc, term)
    return ConjPolynomial._raw(m, acc)


def _accumulate(acc: Dict[Key, complex], p: ConjPolynomial) -> None:
    for k, c in p._terms.items():
        acc[k] = acc.get(k, 0) + c


# ---------------------------------------------------------------------------
# formal alpha-series with polynomial coefficients


class AlphaSeries:
    """sum_a alpha^a C_a truncated at alpha order `order` (alpha real)."""

    __slots__ = ("n", "order", "coeffs")

    def __init__(self, n: int, coeffs: Mapping[int, ConjPolynomial] | None = None, order: int = 2):
        self.n = n
        self.order = order
        self.coeffs: Dict[int, ConjPolynomial] = {}
        for a, p in (coeffs or {}).items():
            if a <= order and p:
                if p.n != n:
                    raise DimensionError("alpha-series coefficient dimension mismatch")
                self.coeffs[a] = p

    @classmethod
    def lift(cls, p: ConjPolynomial, order: int = 2, power: int = 0) -> "AlphaSeries":
        return cls(p.n, {power: p}, order)

    def __getitem__(self, a: int) -> ConjPolynomial:
        return self.coeffs.get(a, ConjPolynomial.zero(self.n))

    def __add__(self, other: "AlphaSeries") -> "AlphaSeries":
        order = min(self.order, other.order)
        out = {a: self[a] + other[a] for a in range(order + 1)}
        return AlphaSeries(self.n, out, order)

    def __neg__(self) -> "AlphaSeries":
        return AlphaSeries(self.n, {a: -p for a, p in self.coeffs.items()}, self.order)

    def __sub__(self, other: "AlphaSeries") -> "AlphaSeries":
        return self + (-other)

    def scale(self, c: complex) -> "AlphaSeries":
        return AlphaSeries(self.n, {a: p.scale(c) for a, p in self.coeffs.items()}, self.order)

    def shift(self, k: int = 1) -> "AlphaSeries":
        """Multiply by alpha^k."""
        return AlphaSeries(self.n, {a + k: p for a, p in self.coeffs.items()}, self.order)

    def conj(self) -> "AlphaSeries":
        return AlphaSeries(self.n, {a: p.conj() for a, p in self.coeffs.items()}, self.order)

    def mul(self, other: "AlphaSeries", max_degree=None) -> "AlphaSeries":
        order = min(self.order, other.order)
        out: Dict[int, ConjPolynomial] = {}
        for a, p in self.coeffs.items():
            for b, q in other.coeffs.items():
                if a + b <= order:
                    out[a + b] = out.get(a + b, ConjPolynomial.zero(self.n)) + p.mul(q, max_degree)
        return AlphaSeries(self.n, out, order)

    def truncate(self, max_degree) -> "AlphaSeries":
        return AlphaSeries(self.n, {a: p.truncate(max_degree) for a, p in self.coeffs.items()}, self.order)

    def __repr__(self):
        return f"AlphaSeries(order={self.order}, {self.coeffs})"


def series_bracket(R: AlphaSeries, S: Sequence[AlphaSeries], max_degree=None) -> AlphaSeries:
    order = min([R.order] + [s.order for s in S])
    out: Dict[int, ConjPolynomial] = {}
    for a, Ra in R.coeffs.items():
        for b in range(order + 1 - a):
            Sb = [s[b] for s in S]
            if any(Sb):
                out[a + b] = out.get(a + b, ConjPolynomial.zero(R.n)) + bracket(Ra, Sb, max_degree)
    return AlphaSeries(R.n, out, order)


def series_substitute(P: AlphaSeries, subs: Sequence[AlphaSeries], max_degree=None) -> AlphaSeries:
    """Substitute alpha-series into an alpha-series polynomial."""
    n = P.n
    if len(subs) != n:
        raise DimensionError("series_substitute: need one series per variable")
    order = min([P.order] + [s.order for s in subs])
    m = subs[0].n
    bases = list(subs) + [s.conj() for s in subs]
    cache: Dict[Tuple[int, int], AlphaSeries] = {}

    def power(idx: int, e: int) -> AlphaSeries:
        if e == 0:
            return AlphaSeries.lift(ConjPolynomial.const(m, 1.0), order)
        if (idx, e) not in cache:
            cache[(idx, e)] = power(idx, e - 1).mul(bases[idx], max_degree)
        return cache[(idx, e)]

    acc: Dict[int, Dict[Key, complex]] = {}
    for a, Pa in P.coeffs.items():
        for key, c in Pa._terms.items():
            # orders above `order - a` are dropped by the final shift anyway
            term = AlphaSeries.lift(ConjPolynomial.const(m, c), order - a, 0)
            for idx, e in enumerate(key):
                if e:
                    term = term.mul(power(idx, e), max_degree)
            for b, q in term.coeffs.items():
                _accumulate(acc.setdefault(a + b, {}), q)
    return AlphaSeries(m, {a: ConjPolynomial._raw(m, d) for a, d in acc.items()}, order)


def identity_map(n: int) -> list:
    return [ConjPolynomial.var(n, j) for j in range(n)]


def random_polynomial(rng: np.random.Generator, n: int, n_terms: int, min_degree: int = 1, max_degree: int = 3) -> ConjPolynomial:
    """Random sparse polynomial, for property tests and demos."""
    terms: Dict[Key, complex] = {}
    for _ in range(n_terms):
        d = int(rng.integers(min_degree, max_degree + 1))
        key = np.zeros(2 * n, dtype=int)
        for _ in range(d):
            key[rng.integers(0, 2 * n)] += 1
        terms[tuple(int(x) for x in key)] = complex(rng.normal(), rng.normal())
    return ConjPolynomial(n, terms)


def iter_keys(P: ConjPolynomial) -> Iterable[Key]:
    return (k for k, _ in P.items())
