import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hnf.normalform import (
    NetworkSystem,
    NonResonanceFailure,
    algorithm1,
    assemble_H,
    chain_adjacency,
    check_nonresonance,
    compute_G,
    compute_P,
    compute_second_transform,
    coupling_from_terms,
    coupling_library,
    homological_residuals,
    linear_frequency_shift,
    ring_adjacency,
    two_triangle_adjacency,
)
from hnf.phasered import oa_build
from hnf.polyalg import ConjPolynomial, degree_bounds

RING_OMEGA = [1.01, 2.5, 1.5, 2.49]


def key(n, s, t):
    out = [0] * (2 * n)
    for j, e in s.items():
        out[j - 1] += e
    for j, e in t.items():
        out[n + j - 1] += e
    return tuple(out)


def ring(omega=RING_OMEGA, coupling="z_wbar_plus_z2_wbar", alpha=0.18):
    return NetworkSystem(4, ring_adjacency(4), 0.15, omega, coupling_library(coupling), alpha)


def test_assemble_ring():
    H = assemble_H(ring())
    n = 4
    want = {key(n, {1: 1}, {2: 1}), key(n, {1: 2}, {2: 1}), key(n, {1: 1}, {4: 1}), key(n, {1: 2}, {4: 1})}
    assert set(H[0].terms) == want
    assert all(c == 1 for c in H[0].terms.values())


def test_assemble_empty_and_chain():
    s = NetworkSystem(3, np.zeros((3, 3)), 0.1, [1, 2, 3], coupling_library("z_wbar_plus_z2_wbar"))
    assert all(not h for h in assemble_H(s))
    c = NetworkSystem(3, chain_adjacency(3), 0.1, [1, 2, 3], coupling_library("z_wbar_plus_z2_wbar"))
    H = assemble_H(c)
    assert len(H[1]) == 4 and len(H[0]) == 2


def test_nonresonance_ring_margin():
    rep = check_nonresonance(ring())
    assert all(r["passed"] for r in rep)
    margin = min(abs(r["value"]) for r in rep if not r["linear"])
    # nonlinear monomials give -w_l and w_k - w_l; closest is |1.5 - 2.49|
    assert margin == pytest.approx(0.99)
    assert margin >= 0.98


def test_nonresonance_failure():
    s = ring(omega=[1.0, 1.0, 1.0, 1.0])
    bad = [r for r in check_nonresonance(s) if not r["passed"]]
    assert bad and all(r["monomial"] == {"z": 2, "w": 0, "zbar": 0, "wbar": 1} for r in bad)
    with pytest.raises(NonResonanceFailure):
        compute_P(s)


def test_P_ring_closed_form():
    s = ring()
    g = s.gamma
    P = compute_P(s)
    n = 4
    want = {
        key(n, {1: 1}, {2: 1}): 1 / np.conj(g[1]),
        key(n, {1: 2}, {2: 1}): 1 / (g[0] + np.conj(g[1])),
        key(n, {1: 1}, {4: 1}): 1 / np.conj(g[3]),
        key(n, {1: 2}, {4: 1}): 1 / (g[0] + np.conj(g[3])),
    }
    assert set(P[0].terms) == set(want)
    for k, v in want.items():
        assert P[0][k] == pytest.approx(v, rel=1e-14)
    assert degree_bounds(P[0])[0] >= 2


def test_homological_residuals_small():
    s = ring()
    hn = algorithm1(s)
    r1, r2 = homological_residuals(s, hn.transform)
    assert r1 <= 1e-12 and r2 <= 1e-12
    assert min(degree_bounds(q)[0] for q in hn.transform.Q if q) >= 4


def test_Q_vanishes_without_cubic():
    s = NetworkSystem(4, ring_adjacency(4), 0.15, RING_OMEGA, coupling_library("z_wbar_plus_z2_wbar"), 0.1, beta=np.zeros(4))
    P = compute_P(s)
    Q, S = compute_second_transform(s, P)
    assert all(not q for q in Q) and all(not x for x in S)


def test_S_monomial_shapes():
    """Every monomial of S_k is |u_j|^2 R or u_k^2 conj(R) with R a monomial of P_k."""
    s = ring()
    P = compute_P(s)
    _, S = compute_second_transform(s, P)
    n = 4
    for k in range(n):
        Rs = set(P[k].terms)
        for sk in S[k].terms:
            ok = False
            for R in Rs:
                for j in range(n):
                    cand = list(R)
                    cand[j] += 1
                    cand[n + j] += 1
                    ok |= tuple(cand) == sk
                flip = list(R[n:]) + list(R[:n])
                flip[k] += 2
                ok |= tuple(flip) == sk
            assert ok, (k, sk)


def test_G_for_z_wbar_matches_tree_sum():
    rng = np.random.default_rng(0)
    n = 4
    A = (rng.random((n, n)) < 0.6).astype(float) * rng.uniform(0.5, 1.5, (n, n))
    np.fill_diagonal(A, 0)
    s = NetworkSystem(n, A, 0.2, rng.uniform(1, 3, n), coupling_library("z_wbar"))
    g = s.gamma
    P = compute_P(s)
    G, _ = compute_G(s, P)
    for k in range(n):
        want = {}
        for l, p in itertools.product(range(n), repeat=2):
            if A[k, l] and A[k, p]:
                kk = key(n, {k + 1: 1}, {l + 1: 1})
                kk = tuple(a + b for a, b in zip(kk, key(n, {}, {p + 1: 1})))
                want[kk] = want.get(kk, 0) + A[k, l] * A[k, p] / np.conj(g[l])
            if A[k, l] and A[l, p]:
                kk = tuple(a + b for a, b in zip(key(n, {k + 1: 1}, {l + 1: 1}), key(n, {p + 1: 1}, {})))
                want[kk] = want.get(kk, 0) + A[k, l] * A[l, p] / np.conj(g[l])
        want = ConjPolynomial(n, want)
        assert (G[k] - want).max_abs() <= 1e-12 * want.max_abs()


def test_ring_node1_survivors():
    s = ring()
    g = s.gamma
    hn = algorithm1(s)
    n = 4
    at1 = {e.key: e.field_coeff for e in hn.edges_at(0)}
    assert set(at1) == {key(n, {1: 2, 3: 1}, {2: 1}), key(n, {1: 2, 3: 1}, {4: 1})}
    assert at1[key(n, {1: 2, 3: 1}, {2: 1})] == pytest.approx(-1 / (g[0] + np.conj(g[1])), rel=1e-12)
    zeta = 2 / (g[1] + np.conj(g[2])) + 2 / (g[1] + np.conj(g[0])) + 1 / np.conj(g[2]) + 1 / np.conj(g[0])
    at2 = {e.key: e.field_coeff for e in hn.edges_at(1)}
    assert at2 == pytest.approx({key(n, {2: 2}, {1: 1, 3: 1}): -zeta}, rel=1e-12)


def test_chain_goldens():
    s = NetworkSystem(3, chain_adjacency(3), 0.15, [1.01, 2.5, 1.5], coupling_library("z_wbar_plus_z2_wbar"), 0.18)
    g = s.gamma
    hn = algorithm1(s)
    got = {(e.k, e.key): e.field_coeff for e in hn.hyperedges}
    zeta = 2 / (g[1] + np.conj(g[2])) + 2 / (g[1] + np.conj(g[0])) + 1 / np.conj(g[2]) + 1 / np.conj(g[0])
    want = {
        (0, key(3, {1: 2, 3: 1}, {2: 1})): -1 / (g[0] + np.conj(g[1])),
        (1, key(3, {2: 2}, {1: 1, 3: 1})): -zeta,
        (2, key(3, {3: 2, 1: 1}, {2: 1})): -1 / (g[2] + np.conj(g[1])),
    }
    assert got == pytest.approx(want, rel=1e-12)


def test_incommensurate_has_no_hyperedges():
    s = ring(omega=np.array([1, np.sqrt(2), np.sqrt(3), np.sqrt(5)]))
    assert algorithm1(s).hyperedges == []


def test_sixring_node1_and_node5():
    om = [1.0, 2.0, 1.3, 1.7, 2.0, 3.1]
    s = NetworkSystem(6, two_triangle_adjacency(), 0.15, om, coupling_library("z_wbar"), 0.1)
    hn = algorithm1(s)
    g = s.gamma
    e1 = {e.key: e.field_coeff for e in hn.edges_at(0)}
    assert e1[key(6, {1: 1, 5: 1}, {2: 1})] == pytest.approx(-1 / np.conj(g[1]))
    e5 = {e.key: e.field_coeff for e in hn.edges_at(4)}
    assert e5[key(6, {5: 2}, {2: 1})] == pytest.approx(-1 / np.conj(g[1]))


def test_sixring_generic_stays_stuart_landau():
    om = [1.0, 2.2, 1.3, 1.7, 2.9, 3.6]
    s = NetworkSystem(6, two_triangle_adjacency(), 0.15, om, coupling_library("z_wbar"), 0.1)
    assert algorithm1(s).hyperedges == []


def _meanfield_oracle(Om):
    """Brute force: candidate u_l^2 conj(u_p) at node k via the path k-l-p, kept if 2W_l - W_p - W_k ~ 0."""
    s = oa_build(Om, 0.48, 0.5, 0.1)
    g = s.gamma
    A = s.A
    want = {}
    for k, l, p in itertools.product(range(4), repeat=3):
        if A[k, l] and A[l, p] and p != k and abs(2 * Om[l] - Om[p] - Om[k]) <= 0.1:
            kk = key(4, {l + 1: 2}, {p + 1: 1})
            want[(k, kk)] = want.get((k, kk), 0) + 1 / (g[l] + np.conj(g[p]))
    return s, want


@pytest.mark.parametrize("Om", [(2, 3, 4, 1), (2, 3, 4, 7), (2, 3, 5, 8)])
def test_meanfield_terms(Om):
    s, want = _meanfield_oracle(Om)
    got = {(e.k, e.key): e.field_coeff for e in algorithm1(s).hyperedges}
    assert got == pytest.approx(want, rel=1e-12)


def test_meanfield_reference_set():
    s, want = _meanfield_oracle((2, 3, 4, 1))
    g = s.gamma
    assert want[(0, key(4, {2: 2}, {3: 1}))] == pytest.approx(1 / (g[1] + np.conj(g[2])))
    assert set(k for k, _ in want) == {0, 1, 2, 3}
    assert not _meanfield_oracle((2, 3, 5, 8))[1]


def test_linear_shift():
    s = oa_build([2, 3, 4, 1], 0.48, 0.5, 0.1)
    _, d0 = linear_frequency_shift(s, 0.0)
    assert np.all(d0 == 0)
    mags = [np.linalg.norm(linear_frequency_shift(s, a)[1]) for a in (0.025, 0.05, 0.1)]
    slope = np.polyfit(np.log([0.025, 0.05, 0.1]), np.log(mags), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_linear_shift_degenerate_warning():
    h = coupling_from_terms({(0, 1, 0, 0): 1.0})
    s = NetworkSystem(2, np.array([[0, 1], [1, 0]]), 0.1, [1.0, 1.0], h)
    with pytest.warns(RuntimeWarning):
        linear_frequency_shift(s, 0.1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_tree_provenance(seed):
    rng = np.random.default_rng(seed)
    n = 4
    A = (rng.random((n, n)) < 0.5).astype(float)
    np.fill_diagonal(A, 0)
    # commensurate frequencies so that some triples resonate
    om = rng.integers(1, 5, n).astype(float) + rng.uniform(-0.02, 0.02, n)
    s = NetworkSystem(n, A, 0.15, om, coupling_library("z_wbar"), 0.1)
    try:
        hn = algorithm1(s)
    except NonResonanceFailure:
        return
    for e in hn.hyperedges:
        assert degree_bounds(ConjPolynomial(n, {e.key: 1}))[0] >= 3
        for c in e.contributions:
            if c.kind == "1G":
                assert A[e.k, c.l] * A[e.k, c.p] != 0
            else:
                assert A[e.k, c.l] * A[c.l, c.p] != 0
        assert abs(np.dot(e.combination, om)) <= hn.eps_res + 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 0.1), st.floats(0.01, 0.1))
def test_filter_monotone(seed, e1, e2):
    lo, hi = sorted((e1, e2))
    rng = np.random.default_rng(seed)
    om = np.array([1.0, 2.0, 1.0, 2.0]) + rng.uniform(-0.05, 0.05, 4)
    s = ring(omega=om, coupling="z_wbar")
    small = {(e.k, e.key) for e in algorithm1(s, eps_res=lo).hyperedges}
    big = {(e.k, e.key) for e in algorithm1(s, eps_res=hi).hyperedges}
    assert small <= big


def test_system_json_roundtrip():
    s = ring()
    t = NetworkSystem.from_dict(s.to_dict())
    assert np.allclose(t.A, s.A) and np.allclose(t.omega, s.omega) and t.h == s.h and t.alpha == s.alpha


def test_self_loops_flagged(caplog):
    A = ring_adjacency(4)
    A[0, 0] = 1
    with caplog.at_level("WARNING"):
        NetworkSystem(4, A, 0.1, RING_OMEGA, coupling_library("z_wbar"))
    assert "self-loops" in caplog.text
