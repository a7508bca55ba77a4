"""Hypergeometric solutions of the level-zero qKZ equation and their verification."""

from __future__ import annotations

from .params import IndexSubset, ModelParams, ParameterError, default_points, subsets
from .qkz import SolutionRequest, VerificationReport, psi, run_suite

__all__ = [
    "IndexSubset", "ModelParams", "ParameterError", "SolutionRequest", "VerificationReport",
    "default_points", "psi", "run_suite", "subsets",
]
__version__ = "0.1.0"
