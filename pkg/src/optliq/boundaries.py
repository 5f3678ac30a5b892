"""
Free boundaries and coefficients of the closed-form value function.

Two regimes share the same structure. Above the credit barrier the waiting
region is ``x < F0`` and the value there is ``A(y) x**n0``; below it the
waiting region is ``x < G(y)`` and the value is ``B(y) x**n1 - kappa*x*y``.

``B`` has no elementary closed form for non-integer ``n1``. It is computed
by adaptive quadrature in the scaled form ``G(y)**n1 * B(y)``, whose
integrand is bounded by one, so large default rates (``n1`` of order 100)
do not overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from .model import ModelParams, validate


class NonPositiveDiscriminant(ArithmeticError):
    pass


class QuadratureFailure(ArithmeticError):
    pass


def solve_exponent(half_sigma_sq: float, mu: float, rhs: float) -> float:
    """Positive root of ``half_sigma_sq*l*(l-1) + mu*l - rhs = 0``.

    Uses the cancellation-free form of the quadratic formula followed by one
    Newton polish. For ``rhs > mu`` the root exceeds one.
    """
    a = half_sigma_sq
    b = mu - half_sigma_sq
    c = -rhs
    disc = b * b - 4.0 * a * c
    if not disc > 0:
        raise NonPositiveDiscriminant(f"discriminant {disc} <= 0 (rhs={rhs}, mu={mu})")
    sq = math.sqrt(disc)
    if b >= 0:
        root = 2.0 * c / (-b - sq)
    else:
        root = (-b + sq) / (2.0 * a)
    fval = (a * root + b) * root + c
    root -= fval / (2.0 * a * root + b)
    return root


def exponent_residual(half_sigma_sq: float, mu: float, rhs: float, root: float) -> float:
    return half_sigma_sq * root * (root - 1.0) + mu * root - rhs


def f0(params: ModelParams, n0: float) -> float:
    """Free boundary above the barrier: ``n0*Cs/(n0-1)``."""
    return n0 * params.cost_sell / (n0 - 1.0)


def kappa_of(params: ModelParams) -> float:
    lam = params.default_rate
    return lam * params.default_penalty / (params.delta + lam - params.mu)


def g_lambda(y, params: ModelParams, n1: float):
    """Free boundary below the barrier (independent of the credit index)."""
    kappa = kappa_of(params)
    return n1 * params.cost_sell / ((n1 - 1.0) * (1.0 + kappa * (params.gamma * np.asarray(y) + 1.0)))


def g_lambda_prime(y, params: ModelParams, n1: float):
    """Derivative of :func:`g_lambda` in ``y``, by direct differentiation."""
    kappa = kappa_of(params)
    den = 1.0 + kappa * (params.gamma * np.asarray(y) + 1.0)
    return -n1 * params.cost_sell * kappa * params.gamma / ((n1 - 1.0) * den * den)


def g_infinity(y, params: ModelParams):
    """Limit of the lower boundary as the default rate grows without bound."""
    return params.cost_sell / (1.0 + params.default_penalty * (params.gamma * np.asarray(y) + 1.0))


def _b_scaled_quad(y: float, params: ModelParams, n1: float, tol: float) -> float:
    if y == 0.0:
        return 0.0
    g = params.gamma
    kappa = kappa_of(params)
    lead = params.cost_sell / (n1 - 1.0)
    if kappa == 0.0:
        return lead * -math.expm1(-g * n1 * y) / (g * n1)
    slope = kappa * g / (1.0 + kappa * (g * y + 1.0))

    # s = y - u; (G(y)/G(y-s))**n1 == (1 - slope*s)**n1
    def integrand(s: float) -> float:
        return math.exp(n1 * (-g * s + math.log1p(-slope * s)))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(integrand, 0.0, y, epsabs=0.0, epsrel=tol, limit=500)
        except (integrate.IntegrationWarning, ValueError) as exc:
            raise QuadratureFailure(f"B({y}) did not reach rel. tolerance {tol}: {exc}") from exc
    return lead * val


def b_coeff(y: float, params: ModelParams, n1: float, quadrature_tol: float = 1e-10) -> float:
    """``B(y) = exp(-gamma*n1*y) * int_0^y Cs*exp(gamma*n1*u) / ((n1-1)*G(u)**n1) du``.

    Raises:
        QuadratureFailure: the relative tolerance could not be met.
    """
    if y < 0:
        raise ValueError(f"inventory must be >= 0, got {y}")
    scaled = _b_scaled_quad(float(y), params, n1, quadrature_tol)
    return scaled / float(g_lambda(y, params, n1)) ** n1


def b_coeff_no_default(y, params: ModelParams, n0: float):
    """Limit of ``B(y)`` as the default rate goes to zero.

    With ``G == F0`` and ``n1 == n0`` the integral is elementary:
    ``Cs*(1 - exp(-gamma*n0*y)) / (gamma*n0*(n0-1)*F0**n0)``, which is the
    coefficient ``A(y)`` of the no-default value function.
    """
    F0 = f0(params, n0)
    g = params.gamma
    return params.cost_sell * -np.expm1(-g * n0 * np.asarray(y)) / (g * n0 * (n0 - 1.0) * F0**n0)


@dataclass(frozen=True)
class BoundarySet:
    """Exponents, boundaries and waiting-region coefficients for one parameter set.

    ``b_scale`` multiplies the below-barrier coefficient (and its derivative);
    it exists only to build deliberately wrong value functions for negative
    controls and must stay 1.0 otherwise.
    """

    params: ModelParams
    n0: float
    n1: float
    F0: float
    kappa: float
    quadrature_tol: float = 1e-10
    b_scale: float = 1.0
    b_table: Optional["BTable"] = field(default=None, compare=False, repr=False)

    @property
    def g0(self) -> float:
        """Lower boundary at zero inventory, ``G(0)``."""
        return float(g_lambda(0.0, self.params, self.n1))

    def g_lambda(self, y):
        return g_lambda(y, self.params, self.n1)

    def g_lambda_prime(self, y):
        return g_lambda_prime(y, self.params, self.n1)

    def g_infinity(self, y):
        return g_infinity(y, self.params)

    def a_scaled(self, y: float) -> float:
        """``F0**n0 * A(y)``, i.e. the above-barrier value at ``x = F0``."""
        g, n0 = self.params.gamma, self.n0
        return self.F0 / (g * n0 * n0) * -math.expm1(-g * n0 * y)

    def a_scaled_prime(self, y: float) -> float:
        g, n0 = self.params.gamma, self.n0
        return self.F0 / n0 * math.exp(-g * n0 * y)

    def a_coeff(self, y: float) -> float:
        return self.a_scaled(y) / self.F0**self.n0

    def b_scaled(self, y: float) -> float:
        """``G(y)**n1 * B(y)``, the below-barrier value of the power term at ``x = G(y)``."""
        if self.b_table is not None and self.b_table.covers(y):
            base = self.b_table(y)
        else:
            base = _b_scaled_quad(float(y), self.params, self.n1, self.quadrature_tol)
        return self.b_scale * base

    def b_scaled_prime(self, y: float, scaled: Optional[float] = None) -> float:
        """Derivative of :meth:`b_scaled`, from the linear ODE that ``B`` satisfies."""
        if scaled is None:
            scaled = self.b_scaled(y)
        p = self.params
        ratio = float(self.g_lambda_prime(y) / self.g_lambda(y))
        return scaled * self.n1 * (ratio - p.gamma) + self.b_scale * p.cost_sell / (self.n1 - 1.0)

    def b_coeff(self, y: float) -> float:
        return self.b_scaled(y) / float(self.g_lambda(y)) ** self.n1

    def with_b_table(self, y_max: float, nodes: Optional[int] = None) -> "BoundarySet":
        """Copy whose ``b_scaled`` interpolates a cached table on ``[0, y_max]``."""
        return replace(self, b_table=BTable.build(self, y_max, nodes))

    def with_b_scale(self, scale: float) -> "BoundarySet":
        return replace(self, b_scale=scale)


class BTable:
    """Cubic Hermite interpolant of ``b_scaled`` using exact node slopes.

    Node spacing shrinks with ``gamma*n1`` (the decay rate of the integrand)
    so the interpolation error stays far below 1e-8.
    """

    def __init__(self, ys: np.ndarray, vals: np.ndarray, slopes: np.ndarray):
        self.ys = ys
        self._spline = CubicHermiteSpline(ys, vals, slopes)

    @classmethod
    def build(cls, bounds: BoundarySet, y_max: float, nodes: Optional[int] = None) -> "BTable":
        if nodes is None:
            h = min(0.01, 0.1 / (bounds.params.gamma * bounds.n1))
            nodes = int(math.ceil(y_max / h)) + 1
        ys = np.linspace(0.0, y_max, nodes)
        exact = replace(bounds, b_table=None, b_scale=1.0)
        vals = np.array([exact.b_scaled(y) for y in ys])
        slopes = np.array([exact.b_scaled_prime(y, v) for y, v in zip(ys, vals)])
        return cls(ys, vals, slopes)

    def covers(self, y: float) -> bool:
        return 0.0 <= y <= self.ys[-1]

    def __call__(self, y: float) -> float:
        return float(self._spline(y))


def compute_boundaries(params: ModelParams, quadrature_tol: float = 1e-10) -> BoundarySet:
    validate(params)
    half = 0.5 * params.sigma**2
    n0 = solve_exponent(half, params.mu, params.delta)
    if params.default_rate == 0.0:
        n1 = n0
    else:
        n1 = solve_exponent(half, params.mu, params.delta + params.default_rate)
    return BoundarySet(
        params=params,
        n0=n0,
        n1=n1,
        F0=f0(params, n0),
        kappa=kappa_of(params),
        quadrature_tol=quadrature_tol,
    )
