from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkzlab.elliptic import (
    FAR_SHELL, EllipticError, b_fn, big_theta, c_fn, discrepancy, e_hat_fn, log_derivative_E, measured_rho,
    qpochhammer_inf, space_basis, theta, theta_fn, w_family,
)

from conftest import make_params

P0 = 0.1296
u_st = st.builds(lambda r, a: r * np.exp(1j * a), st.floats(0.2, 3.0), st.floats(0, 2 * np.pi))


def test_pochhammer_against_long_product():
    u = np.array([0.3 + 0.2j, -1.5, 2.2j])
    ref = np.ones_like(u)
    for s in range(200):
        ref = ref * (1 - P0**s * u)
    assert np.max(np.abs(qpochhammer_inf(u, P0) - ref)) < 1e-14 * np.max(np.abs(ref))


@given(u_st)
@settings(max_examples=50, deadline=None)
def test_theta_quasi_periodicity(u):
    assert abs(theta(P0 * u, P0) + theta(u, P0) / u) < 1e-12 * (1 + abs(theta(u, P0) / u))
    assert abs(theta(P0 / u, P0) - theta(u, P0)) < 1e-12 * (1 + abs(theta(u, P0)))


@given(u_st)
@settings(max_examples=50, deadline=None)
def test_log_derivative_shift(u):
    assert abs(log_derivative_E(u / P0, P0) - log_derivative_E(u, P0) - 1) < 1e-9 * (1 + abs(log_derivative_E(u, P0)))


def test_log_derivative_is_u_dlog_theta():
    u, h = 0.7 + 0.4j, 1e-6
    fd = u * (np.log(theta(u + h, P0)) - np.log(theta(u - h, P0))) / (2 * h)
    assert abs(log_derivative_E(u, P0) - fd) < 1e-6


def test_big_theta_is_p_periodic(p_one):
    t = np.array([0.4 + 0.3j, -1.1 + 0.5j, 2.0j])
    assert np.allclose(big_theta(P0 * t, p_one), big_theta(t, p_one), rtol=1e-12, atol=0)
    assert theta_fn(p_one).multiplier == pytest.approx(1.0)
    with pytest.raises(EllipticError):
        big_theta(t, make_params(1.0, n=3, ell=1))


def test_basis_quasi_periodicity(p_one, p_gen):
    t = np.array([0.4 + 0.3j, -1.1 + 0.5j, 2.0j, 0.8])
    for F in space_basis("f_ell", p_gen) + space_basis("f_hat", p_one):
        assert F.check_quasiperiodic(t) < 1e-10, F.label
    assert b_fn(1, p_gen).multiplier == p_gen.alpha


def test_discrepancies(p_one):
    assert discrepancy(e_hat_fn(p_one), p_one) == pytest.approx(1.0, abs=1e-10)
    assert discrepancy(e_hat_fn(p_one, 3), p_one) == pytest.approx(1.0, abs=1e-10)
    assert discrepancy(c_fn(2, p_one), p_one) == 0
    assert discrepancy(theta_fn(p_one), p_one) == 0


def test_residues_match_small_circles(p_one):
    from qkzlab.ratfun import small_circle_residue

    for F in (c_fn(1, p_one), e_hat_fn(p_one), theta_fn(p_one)):
        for j in F.sites[:2]:
            for m in (-1, 0, 2):
                pt = p_one.p**m * p_one.z[j - 1]
                ref = small_circle_residue(F, pt, 1e-3 * abs(pt), nodes=128)
                assert abs(F.residue(pt) - ref) < 1e-9 * max(abs(ref), 1e-300), (F.label, j, m)
    assert c_fn(1, p_one).residue(0.123 + 0.4j) == 0


def test_far_shell_law_agrees_with_direct(p_one):
    for F in (c_fn(1, p_one), e_hat_fn(p_one)):
        for j in F.sites[:3]:
            for m in (1, 3, 5):
                direct = F._shell_residue(j, m)
                scale = abs(p_one.p) ** m * abs(F._shell_residue(j, 0))
                assert abs(F._far_residue(j, m) - direct) < 1e-9 * scale, (F.label, j, m)
    assert FAR_SHELL >= 5


def test_family_ratios(p_gen, p_one):
    fam = w_family("generic_alpha", ("B1", "B2"), p_gen)
    assert fam.rho[0] == pytest.approx(1 / p_gen.alpha)
    mean, spread = measured_rho(fam, 1)
    assert spread < 1e-10 and mean == pytest.approx(1 / p_gen.alpha)
    hat = w_family("alpha_one_hat", ("C1", "hat"), p_one)
    assert hat.rho[0] is None
    with pytest.raises(EllipticError):
        w_family("alpha_one_hat", ("hat", "C1"), p_one)
    with pytest.raises(EllipticError):
        w_family("alpha_one", ("C1",), p_gen)


def test_f_hat_requires_alpha_one(p_gen):
    with pytest.raises(EllipticError):
        space_basis("f_hat", p_gen)
