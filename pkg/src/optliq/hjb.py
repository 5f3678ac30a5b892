"""
Residual certification of the variational inequality.

Above the barrier the value must satisfy ``max{Lv, Xi1} = 0``; below it
``max{Lv - lam*v - lam*K*x*y, Xi1} = 0``, where

    Lv  = sigma^2/2 x^2 v_xx + mu x v_x - delta v
    Xi1 = -gamma x v_x - v_y + x - Cs.

In the waiting regions the equation part must vanish and the gradient
constraint must be non-positive; in the selling regions it is the other way
around. :func:`verify_hjb` sweeps a grid and reports the worst residual of
each kind per region. :func:`verify_boundary_identities` checks the
closed-form identities behind the sign arguments for the lower boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import RegionLabel, State
from .value import (
    BelowRegime,
    Derivs,
    Regime,
    ValueContext,
    fixed_landing_derivs,
    fixed_landing_full_edge,
    v_below_fixed_landing,
    value_derivatives,
    value as value_at,
)

XI2_CONVENTION = "Xi2 = sigma^2/2 x^2 v_xx + mu x v_x - (delta+lambda) v - lambda K x y"
TOL_EQ = 1e-7  # scaled by (1 + |v|)
TOL_EQ_SELL = 1e-8
TOL_INEQ = 1e-9
ONE_SIDED = 1e-9


def generator(s: State, ctx: ValueContext, derivs: Optional[Derivs] = None, v: Optional[float] = None) -> float:
    """``sigma^2/2 x^2 v_xx + mu x v_x - delta v`` plus the credit-index terms.

    The value is flat in ``w`` inside each regime, so ``v_ww`` and ``v_xw``
    are zero; they are kept as explicit terms.
    """
    p = ctx.params
    if derivs is None:
        derivs = value_derivatives(s, ctx)
    if v is None:
        v = value_at(s, ctx)
    v_ww = 0.0
    v_xw = 0.0
    x = s.x
    return (
        0.5 * p.sigma**2 * x * x * derivs.v_xx
        + p.mu * x * derivs.v_x
        - p.delta * v
        + 0.5 * v_ww
        + p.rho * p.sigma * x * v_xw
    )


def _xi1(x: float, d: Derivs, ctx: ValueContext) -> float:
    return -ctx.params.gamma * x * d.v_x - d.v_y + x - ctx.params.cost_sell


def _xi2(x: float, y: float, v: float, d: Derivs, ctx: ValueContext) -> float:
    p = ctx.params
    lam = p.default_rate
    return (
        0.5 * p.sigma**2 * x * x * d.v_xx
        + p.mu * x * d.v_x
        - (p.delta + lam) * v
        - lam * p.default_penalty * x * y
    )


def xi1(s: State, ctx: ValueContext, side: Optional[str] = None) -> float:
    """Gradient-constraint expression ``-gamma x v_x - v_y + x - Cs``."""
    return _xi1(s.x, value_derivatives(s, ctx, side), ctx)


def xi2(s: State, ctx: ValueContext, side: Optional[str] = None) -> float:
    """Below-barrier equation part, evaluated with the below-barrier value."""
    reg = ctx.below
    v, d = reg.evaluate(s.x, s.y, side)
    return _xi2(s.x, s.y, v, d, ctx)


def xi1_waiting_closed_form(x: float, y: float, ctx: ValueContext) -> float:
    """``Xi1`` in the below-barrier waiting region without any derivative of ``B``."""
    b = ctx.bounds
    n = b.n1
    cs = ctx.params.cost_sell
    r = x / float(b.g_lambda(y))
    return cs / (n - 1.0) * (-(r**n) + n * r) - cs


@dataclass(frozen=True)
class Grid:
    """Rectangular evaluation grid; ``x`` log-spaced, ``y`` uniform."""

    x_min: float = 0.01
    x_max: float = 10.0
    nx: int = 400
    y_min: float = 0.1
    y_max: float = 7.0
    ny: int = 50
    w_values: tuple[float, ...] = (1.0, -1.0)

    def xs(self) -> np.ndarray:
        return np.geomspace(self.x_min, self.x_max, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def describe(self) -> dict:
        d = asdict(self)
        d["w_values"] = list(self.w_values)
        d["spacing"] = {"x": "log", "y": "linear"}
        return d


@dataclass
class RegionResult:
    name: str
    max_eq_residual: float = 0.0
    max_ineq_violation: float = 0.0
    worst_point: Optional[dict] = None
    worst_ineq_point: Optional[dict] = None
    count: int = 0
    tol_eq: float = TOL_EQ
    tol_ineq: float = TOL_INEQ
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.max_eq_residual <= self.tol_eq and self.max_ineq_violation <= self.tol_ineq

    def add(self, eq: float, ineq: float, point: dict) -> None:
        self.count += 1
        eq = math.inf if math.isnan(eq) else eq
        viol = math.inf if math.isnan(ineq) else max(ineq, 0.0)
        if self.worst_point is None or eq > self.max_eq_residual:
            self.max_eq_residual = eq
            self.worst_point = point
        if viol > self.max_ineq_violation:
            self.max_ineq_violation = viol
            self.worst_ineq_point = point

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass
class ResidualReport:
    grid: dict
    per_region: list[RegionResult] = field(default_factory=list)
    convention: str = XI2_CONVENTION

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.per_region)

    def region(self, name: str) -> RegionResult:
        for r in self.per_region:
            if r.name == name:
                return r
        raise KeyError(name)

    def failing(self) -> list[str]:
        return [r.name for r in self.per_region if not r.passed]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "convention": self.convention,
            "passed": self.passed,
            "per_region": [r.to_dict() for r in self.per_region],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _regions_for(above: bool) -> list[RegionLabel]:
    if above:
        return [RegionLabel.WAIT_ABOVE, RegionLabel.SELL2_ABOVE, RegionLabel.SELL1_ABOVE]
    return [RegionLabel.WAIT_BELOW, RegionLabel.SELL2_BELOW, RegionLabel.SELL1_BELOW]


def point_residuals(reg: Regime, x: float, y: float, ctx: ValueContext) -> tuple[RegionLabel, float, float, float]:
    """Region, scaled equality residual, inequality residual and value at one point.

    On a branch edge the selling-side formulas are used, matching the
    classification convention.
    """
    label = reg.label(x, y)
    side = "right" if reg.on_edge(x, y) else None
    v, d = reg.evaluate(x, y, side)
    if reg.above:
        eq_op = generator(State(x, y, ctx.params.barrier), ctx, d, v)
    else:
        eq_op = _xi2(x, y, v, d, ctx)
    con = _xi1(x, d, ctx)
    if label.waiting:
        return label, abs(eq_op) / (1.0 + abs(v)), con, v
    return label, abs(con), eq_op, v


def verify_hjb(ctx: ValueContext, grid: Grid = Grid()) -> ResidualReport:
    """Sweep ``grid`` in both regimes and collect per-region worst residuals.

    Waiting regions: equality residual is ``|Lv|/(1+|v|)`` (resp. ``|Xi2|``),
    inequality residual is ``Xi1``. Selling regions: equality residual is
    ``|Xi1|``, inequality residual is ``Lv`` (resp. ``Xi2``).
    """
    report = ResidualReport(grid=grid.describe())
    results: dict[RegionLabel, RegionResult] = {}
    xs, ys = grid.xs(), grid.ys()
    for w in grid.w_values:
        reg = ctx.regime(w)
        above = w >= ctx.params.barrier
        for lab in _regions_for(above):
            if lab not in results:
                tol = TOL_EQ if lab.waiting else TOL_EQ_SELL
                results[lab] = RegionResult(lab.value, tol_eq=tol)
        for y in ys:
            for x in xs:
                x, y = float(x), float(y)
                label, eq, ineq, v = point_residuals(reg, x, y, ctx)
                # a zero-rate lower regime reuses the upper formulas; keep its own labels
                if not above and label.above:
                    label = RegionLabel(label.value.replace("Above", "Below"))
                results[label].add(eq, ineq, {"x": x, "y": y, "w": w, "v": v, "eq": eq, "ineq": ineq})
    report.per_region = list(results.values())
    return report


# --- closed-form identities behind the lower-boundary sign arguments ---


def ser_g(y: float, ctx: ValueContext) -> float:
    """``G'(y)`` written through ``G(y)**2``."""
    p, b = ctx.params, ctx.bounds
    n = b.n1
    G = float(b.g_lambda(y))
    lk = p.default_rate * p.default_penalty
    return G * G * (n - 1.0) / (n * p.cost_sell) * lk / (p.mu - p.delta - p.default_rate) * p.gamma


def h_first(y: float, ctx: ValueContext) -> float:
    """``H(y)`` before substituting the boundary identity."""
    p, b = ctx.params, ctx.bounds
    n, g, cs = b.n1, p.gamma, p.cost_sell
    lam, K = p.default_rate, p.default_penalty
    a = lam + p.delta - p.mu
    G = float(b.g_lambda(y))
    t1 = lam * K / (n * g * a) * G * ((lam + p.delta) - 0.5 * p.sigma**2 * (n - 1.0) ** 2 / (cs * a) * lam * K * G)
    t2 = (lam + p.delta) / g * (lam * K / a * G - cs) + G * a / g * (1.0 + lam * K * y * g / a)
    return t1 - t2


def h_final(y: float, ctx: ValueContext) -> float:
    """``H(y)`` in its manifestly non-positive form."""
    p, b = ctx.params, ctx.bounds
    n, g, cs = b.n1, p.gamma, p.cost_sell
    lam, K = p.default_rate, p.default_penalty
    a = lam + p.delta - p.mu
    G = float(b.g_lambda(y))
    s2 = 0.5 * p.sigma**2
    return -lam * K / (n * g * a) * G * (s2 * (n - 1.0) ** 2 / (cs * a) * lam * K * G) - s2 / g * (n - 1.0) * G * (
        1.0 + lam * K * y * g / a
    )


def theta1(y: float, ctx: ValueContext) -> float:
    p = ctx.params
    return (p.default_rate + p.delta) * p.cost_sell * y / float(ctx.bounds.g_lambda(y))


def theta1_poly(y: float, ctx: ValueContext) -> float:
    p, n = ctx.params, ctx.bounds.n1
    lam = p.default_rate
    return (n - 1.0) * (lam + p.delta) / n * (y + lam * p.default_penalty / (p.delta + lam - p.mu) * (p.gamma * y * y + y))


def theta2(y: float, ctx: ValueContext) -> float:
    p = ctx.params
    lam, g = p.default_rate, p.gamma
    return math.exp(g * y) * ((lam + p.delta - p.mu) / g * -math.expm1(-g * y) + lam * p.default_penalty * y)


def theta_slopes_at_zero(ctx: ValueContext) -> tuple[float, float]:
    p, n = ctx.params, ctx.bounds.n1
    lam = p.default_rate
    a = lam + p.delta - p.mu
    d1 = (n - 1.0) * (lam + p.delta) * (a + lam * p.default_penalty) / (n * a)
    d2 = a + lam * p.default_penalty
    return d1, d2


def _xi2_fixed_landing(x: float, y: float, ctx: ValueContext) -> float:
    return _xi2(x, y, v_below_fixed_landing(x, y, ctx), fixed_landing_derivs(x, y, ctx), ctx)


def _one_sided_slope(f, x0: float, h: float) -> float:
    """Slope at ``x0`` of the quadratic through ``f`` at ``x0 + h, x0 + 2h, x0 + 3h``."""
    f1, f2, f3 = f(x0 + h), f(x0 + 2 * h), f(x0 + 3 * h)
    return (-5.0 * f1 + 8.0 * f2 - 3.0 * f3) / (2.0 * h)


def verify_boundary_identities(ctx: ValueContext, y_grid: Iterable[float] = (0.1, 0.5, 1.0, 1.5, 3.0, 7.0)) -> ResidualReport:
    """Check the lower-boundary identities (a)-(e) for each ``y`` in ``y_grid``.

    (a) closed-form ``G'`` against direct differentiation and finite differences;
    (b) ``Xi2(G(y)+) = 0``;
    (c) ``H(y) <= 0``, both forms of ``H`` agree, and ``H`` equals ``G * dXi2/dx``
        at ``G+`` for the fixed-landing band; the main value's slope there is
        also required to be non-positive;
    (d) ``Xi2`` is non-increasing across the partial-sale band (50 samples);
    (e) the slope inequality for ``Theta1``/``Theta2`` at ``0+`` and
        ``Xi2`` of the liquidation formula at ``G(y)exp(gamma*y)`` equal to
        ``G(y)[Theta1 - Theta2] < 0``.
    """
    ys = [float(y) for y in y_grid]
    if any(not y > 0 for y in ys):
        raise ValueError("y_grid must be strictly positive")
    b = ctx.bounds
    reg = BelowRegime(b)
    g = ctx.params.gamma
    checks = {
        "a_ser_G": RegionResult("a_ser_G", tol_eq=1e-7, note="relative error of G' vs finite differences"),
        "b_xi2_at_G": RegionResult("b_xi2_at_G", tol_eq=1e-8),
        "c_H_forms": RegionResult("c_H_forms", tol_eq=1e-12, note="relative; ineq is H itself"),
        "c_H_slope": RegionResult(
            "c_H_slope", tol_eq=1e-5, note="relative gap H vs G*Xi2'(G+) of the fixed-landing band"
        ),
        "c_main_slope": RegionResult("c_main_slope", tol_eq=math.inf, note="ineq is G*Xi2'(G+) of the main value"),
        "d_monotone": RegionResult("d_monotone", tol_eq=math.inf, note="ineq is max increment of Xi2 across the band"),
        "e_theta": RegionResult("e_theta", tol_eq=1e-12, note="eq is relative gap; ineq is the liquidation Xi2 edge value"),
    }
    d1, d2 = theta_slopes_at_zero(ctx)
    checks["e_theta"].add(0.0, d1 - d2, {"theta1_slope": d1, "theta2_slope": d2})
    checks["e_theta"].add(
        abs(theta1(0.0, ctx)) + abs(theta2(0.0, ctx)), -math.inf, {"theta1_0": theta1(0.0, ctx), "theta2_0": theta2(0.0, ctx)}
    )
    for y in ys:
        G = float(b.g_lambda(y))
        # (a)
        h = 1e-5 * max(1.0, y)
        fd = (float(b.g_lambda(y + h)) - float(b.g_lambda(y - h))) / (2 * h)
        closed = ser_g(y, ctx)
        direct = float(b.g_lambda_prime(y))
        err = max(abs(closed - fd), abs(closed - direct)) / abs(closed)
        checks["a_ser_G"].add(err, -math.inf, {"y": y, "closed": closed, "fd": fd, "direct": direct})
        # (b)
        x_plus = G * (1.0 + ONE_SIDED)
        r = _xi2(x_plus, y, *reg.evaluate(x_plus, y), ctx)
        checks["b_xi2_at_G"].add(abs(r), r, {"y": y, "x": x_plus, "xi2": r})
        # (c)
        hf, hl = h_first(y, ctx), h_final(y, ctx)
        checks["c_H_forms"].add(abs(hf - hl) / abs(hl), hl, {"y": y, "H_first": hf, "H_final": hl})
        step = 1e-4 * G
        slope_fixed = _one_sided_slope(lambda x: _xi2_fixed_landing(x, y, ctx), G, step)
        checks["c_H_slope"].add(
            abs(hl - G * slope_fixed) / abs(hl), -math.inf, {"y": y, "H": hl, "G_slope": G * slope_fixed}
        )
        slope_main = _one_sided_slope(lambda x: _xi2(x, y, *reg.evaluate(x, y), ctx), G, step)
        checks["c_main_slope"].add(0.0, G * slope_main, {"y": y, "G_slope": G * slope_main})
        # (d)
        xs = np.geomspace(G, reg.full_edge(y), 52)[1:-1]
        vals = [_xi2(float(x), y, *reg.evaluate(float(x), y), ctx) for x in xs]
        inc = max(np.diff(vals).max(), 0.0)
        worst = int(np.argmax(np.diff(vals)))
        checks["d_monotone"].add(0.0, float(inc), {"y": y, "x": float(xs[worst]), "max_xi2": max(vals)})
        # (e)
        x_edge = G * math.exp(g * y)
        v, dd = reg.eval_on_branch(x_edge, y, 2)
        xi_edge = _xi2(x_edge, y, v, dd, ctx)
        th = G * (theta1(y, ctx) - theta2(y, ctx))
        rel = max(abs(xi_edge - th), abs(theta1(y, ctx) - theta1_poly(y, ctx)) * G) / abs(th)
        checks["e_theta"].add(rel, xi_edge, {"y": y, "xi2_edge": xi_edge, "G_theta_gap": th})
    grid = {"y": ys, "one_sided_offset": ONE_SIDED, "fixed_landing_edge": [fixed_landing_full_edge(y, ctx) for y in ys]}
    return ResidualReport(grid=grid, per_region=list(checks.values()))
