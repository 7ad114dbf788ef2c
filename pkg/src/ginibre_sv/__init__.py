"""Smallest singular values of shifted Ginibre matrices.

Contour-integral evaluation of the one-point function of (X - z)(X - z)*
near zero for real and complex Ginibre matrices X, at finite N and in the
edge scaling limit, plus a seeded Monte Carlo engine to check it.
"""
from ._backend import NAME as BACKEND
from .contours import Tolerance
from .onepoint import (
    EvalRequest, OnePointValue, QuadratureFailure, eval_finite_n, eval_limit_complex, eval_limit_real,
    eval_limit_real_reduced, small_regime_mass, tau_collapse_integral,
)
from .phases import FiniteParams, ScaledParams

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Tolerance", "EvalRequest", "OnePointValue", "QuadratureFailure",
    "eval_finite_n", "eval_limit_complex", "eval_limit_real", "eval_limit_real_reduced",
    "small_regime_mass", "tau_collapse_integral", "FiniteParams", "ScaledParams",
]
