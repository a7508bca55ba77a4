from __future__ import annotations

import pytest

from qkzlab.params import ModelParams, default_points


def make_params(alpha: complex = 1.0, n: int = 4, ell: int = 2, q: float = 0.6, seed: int = 0) -> ModelParams:
    return ModelParams(q=q, n=n, ell=ell, z=default_points(n, seed=seed), alpha=alpha).validate()


@pytest.fixture(scope="session")
def p_one() -> ModelParams:
    return make_params(1.0)


@pytest.fixture(scope="session")
def p_gen() -> ModelParams:
    return make_params(1.3 + 0.2j)
