import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parity.comoments import (
    CoMomentSet,
    Mode,
    ZeroVarianceError,
    build_comoments,
    cross_term_tensor,
    portfolio_moments,
)
from parity.distributions import MomentSet, central_moments
from parity.synthetic import vg_source
from tests.reference import mc_comoments, source_fit


def fitted_sources(n):
    return [central_moments(source_fit(j)) for j in range(n)]


def market(n, seed=0, mode=Mode.EXACT_INDEPENDENT):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    return a, build_comoments(a, fitted_sources(n), mode)


def hand_cross_terms_n2(a, v):
    """sum over ordered pairs j != j' of the three pairings, written out."""
    t = np.zeros((2, 2, 2, 2))
    for i, k, l, m in itertools.product(range(2), repeat=4):
        for j, jj in ((0, 1), (1, 0)):
            t[i, k, l, m] += (
                a[i, j] * a[k, j] * a[l, jj] * a[m, jj]
                + a[i, j] * a[l, j] * a[k, jj] * a[m, jj]
                + a[i, j] * a[m, j] * a[k, jj] * a[l, jj]
            ) * v[j] * v[jj]
    return t


def test_identity_mixing_is_diagonal():
    ms = fitted_sources(3)
    com = build_comoments(np.eye(3), ms, Mode.PAPER_DIAGONAL)
    np.testing.assert_allclose(com.sigma, np.diag([m.variance for m in ms]))
    m3, m4 = com.m3_tensor(), com.m4_tensor()
    for j, m in enumerate(ms):
        assert m3[j, j, j] == m.m3
        assert m4[j, j, j, j] == m.m4  # raw fourth central moment, not excess kurtosis
    mask3 = np.ones_like(m3, dtype=bool)
    mask4 = np.ones_like(m4, dtype=bool)
    for j in range(3):
        mask3[j, j, j] = mask4[j, j, j, j] = False
    assert np.all(m3[mask3] == 0) and np.all(m4[mask4] == 0)


def test_modes_differ_by_hand_expanded_cross_terms():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 2))
    ms = fitted_sources(2)
    v = np.array([m.variance for m in ms])
    d = build_comoments(a, ms, "paper_diagonal").m4_tensor()
    e = build_comoments(a, ms, "exact_independent").m4_tensor()
    hand = hand_cross_terms_n2(a, v)
    np.testing.assert_allclose(e - d, hand, rtol=0, atol=1e-10)
    np.testing.assert_allclose(cross_term_tensor(a, v), hand, rtol=0, atol=1e-12)


def test_tensors_symmetric_under_index_swaps():
    _, com = market(4)
    m3, m4 = com.m3_tensor(), com.m4_tensor()
    rng = np.random.default_rng(0)
    for _ in range(20):
        p3 = tuple(rng.permutation(3))
        p4 = tuple(rng.permutation(4))
        np.testing.assert_allclose(m3, m3.transpose(p3), atol=1e-12)
        np.testing.assert_allclose(m4, m4.transpose(p4), atol=1e-12)
    np.testing.assert_array_equal(com.sigma, com.sigma.T)
    assert np.linalg.eigvalsh(com.sigma).min() > 0


def test_sign_flip_invariance():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(3, 3))
    ms = fitted_sources(3)
    base = build_comoments(a, ms)
    flip = a.copy()
    flip[:, 1] *= -1
    m = ms[1]
    ms2 = list(ms)
    ms2[1] = MomentSet(-m.mean, m.variance, -m.m3, m.m4)
    other = build_comoments(flip, ms2)
    for f in ("sigma", "m3", "m4", "mean"):
        np.testing.assert_allclose(getattr(other, f), getattr(base, f), atol=1e-12)


def test_permutation_invariance():
    rng = np.random.default_rng(6)
    a = rng.normal(size=(4, 4))
    ms = fitted_sources(4)
    perm = [2, 0, 3, 1]
    base = build_comoments(a, ms)
    other = build_comoments(a[:, perm], [ms[p] for p in perm])
    np.testing.assert_allclose(other.m4, base.m4, atol=1e-12)
    np.testing.assert_allclose(other.m3, base.m3, atol=1e-12)


def test_mean_includes_data_mean():
    a = np.array([[1.0, 0.5], [0.0, 2.0]])
    ms = fitted_sources(2)
    com = build_comoments(a, ms, data_mean=np.array([0.1, -0.2]))
    expect = a @ np.array([m.mean for m in ms]) + [0.1, -0.2]
    np.testing.assert_allclose(com.mean, expect)


def test_dimension_checks():
    with pytest.raises(ValueError):
        build_comoments(np.eye(3), fitted_sources(2))
    with pytest.raises(ValueError):
        build_comoments(np.ones((2, 3)), fitted_sources(2))
    with pytest.raises(ValueError):
        build_comoments(np.eye(2), fitted_sources(2), "other")


def test_json_roundtrip():
    _, com = market(3)
    back = CoMomentSet.from_dict(__import__("json").loads(com.to_json()))
    for f in ("mean", "sigma", "m3", "m4"):
        np.testing.assert_array_equal(getattr(back, f), getattr(com, f))
    assert back.mode is com.mode


def test_unit_vector_selects_factor():
    _, com = market(3)
    pm = portfolio_moments(com, [0.0, 1.0, 0.0])
    assert pm.m2 == pytest.approx(com.sigma[1, 1])
    assert pm.m3 == pytest.approx(com.m3_tensor()[1, 1, 1])
    assert pm.m4 == pytest.approx(com.m4_tensor()[1, 1, 1, 1])


def test_homogeneity():
    _, com = market(4)
    b = np.array([0.1, 0.2, 0.3, 0.4])
    p1, p2 = portfolio_moments(com, b), portfolio_moments(com, 2 * b)
    assert p2.m2 == pytest.approx(4 * p1.m2, rel=1e-13)
    assert p2.m3 == pytest.approx(8 * p1.m3, rel=1e-13)
    assert p2.m4 == pytest.approx(16 * p1.m4, rel=1e-13)
    assert p2.skew == pytest.approx(p1.skew, rel=1e-13)
    assert p2.kurt == pytest.approx(p1.kurt, rel=1e-13)


def test_kronecker_contraction_matches_triple_sum():
    _, com = market(3)
    b = np.array([0.2, 0.5, 0.3])
    t3 = com.m3_tensor()
    triple = sum(b[i] * b[k] * b[l] * t3[i, k, l] for i, k, l in itertools.product(range(3), repeat=3))
    assert portfolio_moments(com, b).m3 == pytest.approx(triple, abs=1e-12)


def test_zero_variance_portfolio():
    com = build_comoments(np.eye(2), [MomentSet(0, 1, 0, 3), MomentSet(0, 0, 0, 0)])
    with pytest.raises(ZeroVarianceError):
        portfolio_moments(com, [0.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=5, max_size=5))
def test_gradients_match_finite_differences(w):
    _, com = market(5, seed=2)
    b = np.array(w) / sum(w)
    pm = portfolio_moments(com, b)
    h = 1e-5
    for name in ("m2", "m3", "m4"):
        fd = np.array(
            [
                (getattr(portfolio_moments(com, b + h * e), name) - getattr(portfolio_moments(com, b - h * e), name)) / (2 * h)
                for e in np.eye(5)
            ]
        )
        g = getattr(pm, "grad_" + name)
        assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_exact_m4_matches_monte_carlo_n2():
    params = [vg_source(1.0, -0.4), vg_source(2.0, 0.3)]
    a = np.array([[1.0, 0.6], [-0.4, 0.9]])
    com = build_comoments(a, [central_moments(p) for p in params])
    mc = mc_comoments(a, params, 10_000_000, seed=42)
    t2, t3, t4 = com.sigma, com.m3_tensor(), com.m4_tensor()
    for key, (est, se) in mc.items():
        exact = {2: t2, 3: t3, 4: t4}[len(key)][key]
        assert abs(est - exact) < 3 * se, (key, est, exact, se)
    diag = build_comoments(a, [central_moments(p) for p in params], "paper_diagonal").m4_tensor()
    # the cross terms are many standard errors away, so the omission is detectable
    assert abs(mc[(0, 0, 0, 0)][0] - diag[0, 0, 0, 0]) > 10 * mc[(0, 0, 0, 0)][1]
