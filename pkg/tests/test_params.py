from __future__ import annotations

import numpy as np
import pytest

from qkzlab.params import IndexSubset, ModelParams, ParameterError, default_points, extremal, subsets


def test_subsets_colex_order():
    got = [S.members for S in subsets(4, 2)]
    assert got == [(1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)]
    assert len(subsets(5, 2)) == 10
    assert extremal(3).members == (1, 2, 3)


def test_subset_order_and_complement():
    a, b = IndexSubset((1, 3)), IndexSubset((2, 4))
    assert a.le(b) and not b.le(a)
    assert not IndexSubset((1, 4)).comparable(IndexSubset((2, 3)))
    assert a.complement(4).members == (2, 4)
    assert b.lam(3) == 1 and b.lam(5) == 2
    with pytest.raises(ValueError):
        IndexSubset((2, 1))


def test_derived_quantities():
    P = ModelParams(q=0.6, n=4, ell=2, z=default_points(4))
    assert P.p == pytest.approx(0.6**4)
    assert P.kappa == pytest.approx(0.6**-2)
    assert not P.kappa_overridden
    lo, hi = P.contour_interval()
    assert lo < hi


def test_default_points_are_seeded():
    assert default_points(4, seed=3) == default_points(4, seed=3)
    assert default_points(4, seed=3) != default_points(4, seed=4)
    z = np.array(default_points(6, noise=0.05))
    assert np.all(np.abs(np.abs(z) - 1) <= 0.05 + 1e-12)


def test_distinctness_is_named():
    z = (1.0, 1.0, -1.0, 1j)
    with pytest.raises(ParameterError) as exc:
        ModelParams(q=0.6, n=4, ell=2, z=z).validate()
    assert exc.value.invariant == "distinctness"


def test_contour_feasibility_is_named():
    # |q|^4 * 10 > |q|^2 * 1
    z = (10.0, 1.0, -1.0, 1j)
    with pytest.raises(ParameterError) as exc:
        ModelParams(q=0.6, n=4, ell=2, z=z).validate()
    assert exc.value.invariant == "contour feasibility"


def test_field_errors():
    with pytest.raises(ParameterError):
        ModelParams(q=1.2, n=2, ell=1, z=(1, -1))
    with pytest.raises(ParameterError):
        ModelParams(q=0.6, n=2, ell=3, z=(1, -1))
    with pytest.raises(ParameterError):
        ModelParams(q=0.6, n=2, ell=1, z=(1,))


def test_level_override_fails_level_zero():
    P = ModelParams(q=0.6, n=2, ell=1, z=(1, -1), p=0.6**3)
    names = {c.name: c.ok for c in P.diagnostics()}
    assert names["level zero"] is False


def test_shifted_keeps_kappa_override():
    P = ModelParams(q=0.6, n=2, ell=1, z=(1, -1), kappa=2.0)
    S = P.shifted(2)
    assert S.z[1] == pytest.approx(-P.p)
    assert S.kappa == 2.0
    assert ModelParams(q=0.6, n=2, ell=1, z=(1, -1)).shifted(1).kappa == pytest.approx(0.6**-2)
