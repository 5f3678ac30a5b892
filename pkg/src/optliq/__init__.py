"""Optimal liquidation of a position with price impact and credit-driven default risk."""

from .boundaries import BoundarySet, compute_boundaries, g_infinity, g_lambda, solve_exponent
from .model import ModelParams, RegionLabel, State, load_params, validate
from .value import ValueContext, classify, optimal_sale, value, value_derivatives

__all__ = [
    "BoundarySet",
    "ModelParams",
    "RegionLabel",
    "State",
    "ValueContext",
    "classify",
    "compute_boundaries",
    "g_infinity",
    "g_lambda",
    "load_params",
    "optimal_sale",
    "solve_exponent",
    "validate",
    "value",
    "value_derivatives",
]
