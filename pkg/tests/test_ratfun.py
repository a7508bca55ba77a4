from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkzlab.params import IndexSubset, extremal, subsets
from qkzlab.ratfun import (
    RationalFn, d1_sides, extremal_factor, mu_fn, poly_part, q_identity_sides, q_polynomial, random_points,
    residue_at, residue_matrix, small_circle_residue, total_difference, w_eval, xi_expansion, xi_fn,
)

from conftest import make_params

POLES = (1.0 + 0j, -0.5 + 0.7j, 0.3 - 1.1j)
coef = st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=6)
point = st.builds(lambda r, a: r * np.exp(1j * a), st.floats(0.2, 2.5), st.floats(0, 2 * np.pi)).filter(
    lambda t: min(abs(t - a) for a in POLES) > 0.05)


@given(coef, coef, st.integers(-2, 2), point)
@settings(max_examples=60, deadline=None)
def test_sum_is_pointwise(a, b, low, t):
    f = RationalFn(np.array(a), low, POLES[:2])
    g = RationalFn(np.array(b), 0, POLES[1:])
    assert abs((f + g)(t) - (f(t) + g(t))) <= 1e-10 * (1 + abs(f(t)) + abs(g(t)))


@given(coef, point, st.sampled_from([0.6**2, 0.1296, 1.7 + 0.3j]))
@settings(max_examples=40, deadline=None)
def test_dilate(a, t, c):
    f = RationalFn(np.array(a), 1, POLES)
    if min(abs(c * t - x) for x in POLES) < 0.05:
        return
    assert abs(f.dilate(c)(t) - f(c * t)) <= 1e-10 * (1 + abs(f(c * t)))


def test_residue_matches_small_circle():
    f = RationalFn(np.array([1.0, 2.0, -1j, 0.5]), -1, POLES)
    for a in POLES:
        assert abs(residue_at(f, a) - small_circle_residue(f, a, 0.05)) < 1e-12
    assert residue_at(f, 5.0) == 0


def test_orders():
    f = RationalFn(np.array([0, 0, 1.0, 2.0]), 1, POLES)
    assert f.order_at_zero() == 3
    assert f.order_at_infinity() == 1 + 3 - 3


def test_total_difference_definition(p_gen):
    P = p_gen
    f = RationalFn(np.array([1.0, -0.5, 2j, 0.3, 1.0]), 1, P.z)
    Df = total_difference(f, P)
    for t in (0.4 + 0.2j, -1.3j, 1.7):
        direct = f(t) - P.alpha * f(P.p * t) * np.prod([(t / P.q**2 - zj) / (t - zj) for zj in P.z])
        assert abs(Df(t) - direct) < 1e-11 * (1 + abs(direct))


def test_poly_part():
    f = RationalFn(np.array([3.0, 1.0, 0, 2.0, 1.0]), 0, POLES[:2])
    Q = poly_part(f)
    for t in (1e4, 1e4j, -3e4):
        assert abs(f(t) - Q(t)) < 1e-2


def test_mu_normalization(p_one):
    M = IndexSubset((1, 3))
    z = p_one.z
    for m in M:
        mu = mu_fn(M, m, p_one)
        assert residue_at(mu, z[m - 1]) == pytest.approx(z[m - 1])
        other = [k for k in M if k != m][0]
        assert abs(mu(p_one.q**2 * z[other - 1])) < 1e-14


def test_extremal_proportionality(p_gen):
    M = extremal(2)
    t = (0.3 + 0.8j, -1.2 + 0.1j)
    w = w_eval("w", M, t, p_gen)
    wt = w_eval("wtilde", M, t, p_gen)
    assert abs(w - extremal_factor(2, p_gen) * wt) < 1e-12 * abs(w)


def test_residue_biorthogonality(p_one):
    table = residue_matrix(p_one, 2, "wtilde")
    for M in subsets(4, 2):
        for N in subsets(4, 2):
            assert abs(table[(M, N)] - (M == N)) < 1e-8


def test_lowering_identity(p_gen):
    rng = np.random.default_rng(1)
    for M in subsets(4, 1):
        for _ in range(5):
            t = random_points(rng, 2, p_gen.z, 0.1)
            lhs, rhs = d1_sides(M, t, p_gen)
            assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1)


def test_q_polynomials_at_half_filling(p_one):
    for M in subsets(4, 2):
        assert np.max(np.abs(q_polynomial(M, 2, p_one).coef)) == 0 or \
            np.max(np.abs(q_polynomial(M, 2, p_one).coef)) < 1e-12
        for a in (1, 2):
            g, s = q_polynomial(M, a, p_one), q_polynomial(M, a, p_one, simplified=True)
            d = np.max(np.abs((g - s).coef))
            assert d < 1e-12 * max(1, np.max(np.abs(g.coef)))
    with pytest.raises(ValueError):
        q_polynomial(IndexSubset((1,)), 1, p_one, simplified=True)


def test_q_identity():
    P = make_params(1.0, n=5, ell=2)
    t = np.array([0.3 + 0.4j, 1.5 - 0.2j, -0.7j])
    for M in subsets(5, 2):
        for m in M:
            lhs, rhs = q_identity_sides(M, m, t, P)
            assert np.max(np.abs(lhs - rhs)) < 1e-9 * np.max(np.abs(lhs))


def test_xi_expansion(p_one):
    t = np.array([0.3 + 0.4j, 1.5 - 0.2j, -0.7j])
    for M in subsets(4, 2):
        lhs = xi_fn(M, p_one)(t)
        assert np.max(np.abs(lhs - xi_expansion(M, p_one)(t))) < 1e-9 * np.max(np.abs(lhs))
