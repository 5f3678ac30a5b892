"""
Closed-form value function, its partial derivatives and the region map.

In each credit regime the state space ``(x, y)`` splits into a waiting
region below a boundary curve ``bdry(y)``, a partial-sale band and a
full-liquidation region. In the band the seller sells ``D`` shares at once,
moving along the characteristic ``x*exp(-gamma*u), y - u`` until it hits the
boundary, so

    v(x, y) = phi(x_L, y_L) + (x - x_L)/gamma - Cs*D,
    x_L = x*exp(-gamma*D) = bdry(y_L),  y_L = y - D.

Above the barrier ``bdry == F0`` is flat and ``D = log(x/F0)/gamma``.
Below it ``bdry == G(y)`` is decreasing in ``y`` and ``D`` solves a scalar
equation. The band ends where the characteristic reaches ``y = 0`` still
above the boundary, i.e. at ``x = bdry(0)*exp(gamma*y)``.

An alternative construction that lands at the fixed price ``G(y)`` is
kept as :func:`v_below_fixed_landing` for comparison. It does not satisfy
the gradient constraint with equality inside the band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from scipy.optimize import brentq

from .boundaries import BoundarySet, compute_boundaries
from .model import ModelError, ModelParams, RegionLabel, State, validate

EDGE_RTOL = 1e-12


class NonPositivePrice(ModelError):
    pass


class OnBranchEdge(ModelError):
    """Derivatives were requested exactly on a branch edge without choosing a side."""


class RootBracketFailure(ArithmeticError):
    pass


class InconsistentContext(ModelError):
    pass


@dataclass(frozen=True)
class ValueContext:
    params: ModelParams
    bounds: BoundarySet

    def __post_init__(self) -> None:
        if self.bounds.params != self.params:
            raise InconsistentContext("bounds were computed for a different parameter set")

    @classmethod
    def from_params(cls, params: ModelParams, quadrature_tol: float = 1e-10) -> "ValueContext":
        validate(params)
        return cls(params, compute_boundaries(params, quadrature_tol))

    def with_bounds(self, bounds: BoundarySet) -> "ValueContext":
        return ValueContext(self.params, bounds)

    def regime(self, w: float) -> "Regime":
        if w >= self.params.barrier or self.params.default_rate == 0.0:
            return AboveRegime(self.bounds)
        return BelowRegime(self.bounds)

    @property
    def above(self) -> "AboveRegime":
        return AboveRegime(self.bounds)

    @property
    def below(self) -> "Regime":
        if self.params.default_rate == 0.0:
            return AboveRegime(self.bounds)
        return BelowRegime(self.bounds)


class Derivs(NamedTuple):
    v_x: float
    v_xx: float
    v_y: float


def sale_map(x: float, z: float, gamma: float) -> float:
    """Shares to sell to push the price from ``x`` down to ``z``: ``log(x/z)/gamma``."""
    if not (x > 0 and z > 0):
        raise NonPositivePrice(f"prices must be positive, got x={x}, z={z}")
    return math.log(x / z) / gamma


class Regime:
    """Value function of one credit regime. Subclasses define the waiting-region part."""

    above: bool

    def __init__(self, bounds: BoundarySet):
        self.bounds = bounds
        self.p = bounds.params

    # waiting region: phi and its partials
    def bdry(self, y: float) -> float:
        raise NotImplementedError

    def phi(self, x: float, y: float) -> float:
        raise NotImplementedError

    def phi_derivs(self, x: float, y: float) -> Derivs:
        raise NotImplementedError

    def landing_shares(self, x: float, y: float) -> float:
        raise NotImplementedError

    def full_edge(self, y: float) -> float:
        """Smallest price at which the whole inventory is sold at once."""
        return self.bdry(0.0) * math.exp(self.p.gamma * y)

    def branch(self, x: float, y: float) -> int:
        """0 waiting, 1 partial sale, 2 full liquidation. Edges go to the selling side."""
        bd = self.bdry(y)
        if x < bd * (1.0 - EDGE_RTOL):
            return 0
        if x <= self.full_edge(y) * (1.0 + EDGE_RTOL):
            return 1
        return 2

    def on_edge(self, x: float, y: float) -> bool:
        for e in (self.bdry(y), self.full_edge(y)):
            if abs(x - e) <= EDGE_RTOL * e:
                return True
        return False

    def shares_to_sell(self, x: float, y: float) -> float:
        if y == 0.0:
            return 0.0
        b = self.branch(x, y)
        if b == 0:
            return 0.0
        if b == 2:
            return y
        return self.landing_shares(x, y)

    def liquidation_value(self, x: float, y: float) -> float:
        g = self.p.gamma
        return x / g * -math.expm1(-g * y) - self.p.cost_sell * y

    def value_on_branch(self, x: float, y: float, branch: int) -> float:
        if y == 0.0:
            return 0.0
        g = self.p.gamma
        if branch == 0:
            return self.phi(x, y)
        if branch == 2:
            return self.liquidation_value(x, y)
        d = self.landing_shares(x, y)
        return self.phi(x * math.exp(-g * d), y - d) + x / g * -math.expm1(-g * d) - self.p.cost_sell * d

    def value(self, x: float, y: float) -> float:
        if y == 0.0:
            return 0.0
        return self.value_on_branch(x, y, self.branch(x, y))

    def eval_on_branch(self, x: float, y: float, branch: int) -> tuple[float, Derivs]:
        """Value and analytic partials using the formula of ``branch``."""
        g = self.p.gamma
        cs = self.p.cost_sell
        if y == 0.0:
            return 0.0, Derivs(0.0, 0.0, x - cs)
        if branch == 0:
            return self.phi(x, y), self.phi_derivs(x, y)
        if branch == 2:
            e = math.exp(-g * y)
            return self.liquidation_value(x, y), Derivs(-math.expm1(-g * y) / g, 0.0, x * e - cs)
        # partial sale: envelope argument along the characteristic
        d = self.landing_shares(x, y)
        e = math.exp(-g * d)
        sold = -math.expm1(-g * d) / g
        xl, yl = x * e, y - d
        ph = self.phi_derivs(xl, yl)
        v = self.phi(xl, yl) + x * sold - cs * d
        return v, Derivs(e * ph.v_x + sold, e * e * ph.v_xx, ph.v_y)

    def derivs_on_branch(self, x: float, y: float, branch: int) -> Derivs:
        return self.eval_on_branch(x, y, branch)[1]

    def resolve_branch(self, x: float, y: float, side: Optional[str] = None) -> int:
        """Branch whose formulas apply at ``(x, y)``; on an edge ``side`` picks one."""
        if side is None:
            if self.on_edge(x, y):
                raise OnBranchEdge(f"(x={x}, y={y}) lies on a branch edge; choose a side")
            return self.branch(x, y)
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        bd, fe = self.bdry(y), self.full_edge(y)
        if abs(x - bd) <= EDGE_RTOL * bd:
            return 0 if side == "left" else 1
        if abs(x - fe) <= EDGE_RTOL * fe:
            return 1 if side == "left" else 2
        return self.branch(x, y)

    def evaluate(self, x: float, y: float, side: Optional[str] = None) -> tuple[float, Derivs]:
        return self.eval_on_branch(x, y, self.resolve_branch(x, y, side))

    def derivs(self, x: float, y: float, side: Optional[str] = None) -> Derivs:
        """Analytic partials. On an edge pass ``side='left'`` or ``'right'``."""
        return self.eval_on_branch(x, y, self.resolve_branch(x, y, side))[1]

    def label(self, x: float, y: float) -> RegionLabel:
        if y == 0.0:
            return RegionLabel.LIQUIDATED
        b = self.branch(x, y)
        if self.above:
            return (RegionLabel.WAIT_ABOVE, RegionLabel.SELL2_ABOVE, RegionLabel.SELL1_ABOVE)[b]
        return (RegionLabel.WAIT_BELOW, RegionLabel.SELL2_BELOW, RegionLabel.SELL1_BELOW)[b]


class AboveRegime(Regime):
    above = True

    def bdry(self, y: float) -> float:
        return self.bounds.F0

    def phi(self, x: float, y: float) -> float:
        b = self.bounds
        return b.a_scaled(y) * (x / b.F0) ** b.n0

    def phi_derivs(self, x: float, y: float) -> Derivs:
        b = self.bounds
        n = b.n0
        r = (x / b.F0) ** n
        a = b.a_scaled(y)
        return Derivs(n * a * r / x, n * (n - 1.0) * a * r / (x * x), b.a_scaled_prime(y) * r)

    def landing_shares(self, x: float, y: float) -> float:
        return min(max(sale_map(x, self.bounds.F0, self.p.gamma), 0.0), y)


class BelowRegime(Regime):
    above = False

    def bdry(self, y: float) -> float:
        return float(self.bounds.g_lambda(y))

    def phi(self, x: float, y: float) -> float:
        b = self.bounds
        return b.b_scaled(y) * (x / self.bdry(y)) ** b.n1 - b.kappa * x * y

    def phi_derivs(self, x: float, y: float) -> Derivs:
        b = self.bounds
        n = b.n1
        G = self.bdry(y)
        r = (x / G) ** n
        bs = b.b_scaled(y)
        bsp = b.b_scaled_prime(y, bs)
        ratio = float(b.g_lambda_prime(y)) / G
        v_x = n * bs * r / x - b.kappa * y
        v_xx = n * (n - 1.0) * bs * r / (x * x)
        v_y = (bsp - n * ratio * bs) * r - b.kappa * x
        return Derivs(v_x, v_xx, v_y)

    def landing_shares(self, x: float, y: float) -> float:
        g = self.p.gamma
        lx = math.log(x)

        def h(d: float) -> float:
            return lx - g * d - math.log(self.bdry(y - d))

        h0, hy = h(0.0), h(y)
        if h0 <= 0.0:
            return 0.0
        if hy >= 0.0:
            return y
        try:
            return brentq(h, 0.0, y, xtol=1e-15, rtol=1e-15, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            raise RootBracketFailure(f"no landing point for x={x}, y={y}: {exc}") from exc


def classify(s: State, ctx: ValueContext) -> RegionLabel:
    return ctx.regime(s.w).label(s.x, s.y)


def v_above(x: float, y: float, ctx: ValueContext) -> float:
    return ctx.above.value(x, y)


def v_below(x: float, y: float, ctx: ValueContext) -> float:
    return ctx.below.value(x, y)


def value(s: State, ctx: ValueContext) -> float:
    return ctx.regime(s.w).value(s.x, s.y)


def value_derivatives(s: State, ctx: ValueContext, side: Optional[str] = None) -> Derivs:
    return ctx.regime(s.w).derivs(s.x, s.y, side)


def optimal_sale(s: State, ctx: ValueContext) -> float:
    """Shares sold immediately by the optimal strategy at state ``s``."""
    return ctx.regime(s.w).shares_to_sell(s.x, s.y)


def value_bounds(x: float, y: float, params: ModelParams) -> tuple[float, float]:
    """Liquidate-now lower bound and ``x/gamma`` upper bound on the value."""
    g = params.gamma
    return x / g * -math.expm1(-g * y) - params.cost_sell * y, x / g


# Alternative below-barrier construction: the band value is taken at the
# fixed landing price G(y) rather than on the boundary curve. Used only to
# compare against the main construction and in the identity cross-checks.


def fixed_landing_full_edge(y: float, ctx: ValueContext) -> float:
    return float(ctx.bounds.g_lambda(y)) * math.exp(ctx.params.gamma * y)


def _b_coeff_and_prime(t: float, bounds: BoundarySet) -> tuple[float, float, float]:
    """``B(t)``, ``B'(t)``, ``B''(t)`` from the scaled coefficient."""
    p = bounds.params
    n = bounds.n1
    Gt = float(bounds.g_lambda(t))
    Gp = float(bounds.g_lambda_prime(t))
    bs = bounds.b_scaled(t)
    B = bs / Gt**n
    src = bounds.b_scale * p.cost_sell / ((n - 1.0) * Gt**n)
    B1 = -p.gamma * n * B + src
    B2 = -p.gamma * n * B1 - n * src * Gp / Gt
    return B, B1, B2


def v_below_fixed_landing(x: float, y: float, ctx: ValueContext) -> float:
    if y == 0.0:
        return 0.0
    bounds = ctx.bounds
    reg = BelowRegime(bounds)
    G = reg.bdry(y)
    if x < G:
        return reg.phi(x, y)
    if x > fixed_landing_full_edge(y, ctx):
        return reg.liquidation_value(x, y)
    g = ctx.params.gamma
    d = sale_map(x, G, g)
    t = y - d
    B, _, _ = _b_coeff_and_prime(t, bounds)
    return B * G**bounds.n1 - bounds.kappa * G * t + (x - G) / g - ctx.params.cost_sell * d


def fixed_landing_derivs(x: float, y: float, ctx: ValueContext) -> Derivs:
    """Partials of :func:`v_below_fixed_landing` inside its partial-sale band.

    ``v_y`` is not needed by the identity checks and is returned as NaN.
    """
    bounds = ctx.bounds
    g = ctx.params.gamma
    cs = ctx.params.cost_sell
    G = float(bounds.g_lambda(y))
    t = y - sale_map(x, G, g)
    _, B1, B2 = _b_coeff_and_prime(t, bounds)
    Gn = G**bounds.n1
    phi_y = B1 * Gn - bounds.kappa * G
    phi_yy = B2 * Gn
    v_x = 1.0 / g - (phi_y + cs) / (g * x)
    v_xx = phi_yy / (g * g * x * x) + (phi_y + cs) / (g * x * x)
    return Derivs(v_x, v_xx, math.nan)
