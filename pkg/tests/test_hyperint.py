from __future__ import annotations

import numpy as np
import pytest

from qkzlab.elliptic import b_fn, c_fn, e_hat_fn, theta_fn
from qkzlab.hyperint import (
    QuadratureError, contour_spec, convergence_history, default_contour, pair_integral, pair_integral_multi,
    residue_series_oracle,
)
from qkzlab.params import ModelParams
from qkzlab.ratfun import MultiEvaluator, RationalFn


def _f(params, seed, low=1):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=params.n + 1 - low) + 1j * rng.normal(size=params.n + 1 - low)
    return RationalFn(c, low, params.z)


def test_quadrature_matches_residue_series(p_one, p_gen):
    cases = [(p_gen, b_fn(2, p_gen)), (p_one, c_fn(1, p_one)), (p_one, e_hat_fn(p_one)), (p_one, theta_fn(p_one))]
    for i, (P, F) in enumerate(cases):
        f = _f(P, i)
        r = pair_integral(f, F, contour_spec(P), detail=True)
        ref = residue_series_oracle(f, F, P)
        assert abs(r.value - ref) < 1e-8 * r.scale, F.label


def test_oracle_needs_vanishing_at_zero(p_one):
    with pytest.raises(ValueError):
        residue_series_oracle(_f(p_one, 0, low=0), c_fn(1, p_one), p_one)


def test_radius_independence(p_gen):
    lo, hi = p_gen.contour_interval()
    f, F = _f(p_gen, 3), b_fn(1, p_gen)
    vals = [pair_integral(f, F, contour_spec(p_gen, radius=lo * (hi / lo) ** s), detail=True) for s in (0.2, 0.5, 0.8)]
    scale = max(v.scale for v in vals)
    assert max(abs(a.value - b.value) for a in vals for b in vals) < 1e-10 * scale


def test_geometric_convergence(p_one):
    hist = convergence_history(_f(p_one, 4), c_fn(2, p_one), contour_spec(p_one), sizes=(8, 16, 32, 64))
    errs = [e for _, e in hist]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 1e-12


def test_never_singular_corrections_carry_no_mass(p_one):
    r = pair_integral(_f(p_one, 5), e_hat_fn(p_one), contour_spec(p_one), detail=True)
    masses = [abs(m[3]) for m in r.correction_mass if m[0] == "outer" and m[1] == 1]
    assert masses and max(masses) < 1e-14 * r.scale


def test_tensor_rule_factorizes(p_gen):
    spec = contour_spec(p_gen)
    f1, f2 = _f(p_gen, 6), _f(p_gen, 7)
    F1, F2 = b_fn(1, p_gen), b_fn(3, p_gen)
    w = MultiEvaluator(2, lambda a, b: f1(a) * f2(b))
    two = pair_integral_multi(w, (F1, F2), spec)
    one = pair_integral(f1, F1, spec) * pair_integral(f2, F2, spec)
    assert abs(two - one) < 1e-9 * abs(one)


def test_empty_interval_is_reported():
    P = ModelParams(q=0.6, n=2, ell=1, z=(10.0, -1.0))
    with pytest.raises(QuadratureError):
        default_contour(P)
    # the general-radius construction still separates the families
    spec = contour_spec(P)
    assert spec.corrections
