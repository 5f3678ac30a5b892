"""
Datasets for the boundary and value-function figures, written as CSV.

* f1: no-default value curves ``x -> v0(x, y)`` for a set of inventories,
  with markers at ``F0`` and ``F0*exp(gamma*y)``.
* f2: the same below the barrier for one default rate, with markers at
  ``G(y)`` and ``G(y)*exp(gamma*y)`` (and at the full-liquidation edge
  ``G(0)*exp(gamma*y)``).
* f3: the curves ``G(y)`` and ``G(y)*exp(gamma*y)`` across a sweep
  ``lam = 2**(-N)``, plus the ``F0`` and ``G_inf`` limit curves.
* f4: ``x -> v(x, 1.5)`` across a sweep ``lam = 2**N``, the no-default
  curve and the large-rate limit ``v_inf`` of a static sell-then-default
  problem.

Every number comes from the boundary or value modules; nothing is
re-derived here except ``v_inf``, which has no counterpart there.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .boundaries import BoundarySet, compute_boundaries, g_infinity
from .model import ModelParams
from .value import ValueContext, v_above, v_below

FIGURES = ("f1", "f2", "f3", "f4")
CACHE_TOL = 1e-8


@dataclass(frozen=True)
class FigureSpec:
    """Grids for one figure.

    ``lambda_sign`` picks the sweep ``lam = 2**(lambda_sign*N)`` for
    ``N`` in ``lambda_n`` (f3 uses -1, f4 uses +1).
    """

    figure: str
    x_grid: tuple[float, float, int] = (0.01, 10.0, 400)
    y_grid: tuple[float, float, int] = (0.1, 7.0, 50)
    lambda_n: tuple[float, float, float] = (-20.0, 8.0, 0.5)
    lambda_sign: int = 1
    y_fixed: float = 1.5
    out: Optional[str] = None

    def __post_init__(self) -> None:
        if self.figure not in FIGURES:
            raise ValueError(f"unknown figure {self.figure!r}")
        lo, hi, n = self.x_grid
        if not (0 < lo < hi and n >= 2):
            raise ValueError(f"bad x grid {self.x_grid}")
        lo, hi, n = self.y_grid
        if not (0 < lo < hi and n >= 2):
            raise ValueError(f"bad y grid {self.y_grid}")
        a, b, step = self.lambda_n
        if not (a < b and step > 0):
            raise ValueError(f"bad lambda exponent range {self.lambda_n}")

    @classmethod
    def default(cls, figure: str, out: Optional[str] = None) -> "FigureSpec":
        return cls(figure=figure, lambda_sign=-1 if figure == "f3" else 1, out=out)

    def xs(self) -> np.ndarray:
        lo, hi, n = self.x_grid
        return np.geomspace(lo, hi, int(n))

    def ys(self) -> np.ndarray:
        lo, hi, n = self.y_grid
        return np.linspace(lo, hi, int(n))

    def lambdas(self) -> np.ndarray:
        a, b, step = self.lambda_n
        ns = a + step * np.arange(int(round((b - a) / step)) + 1)
        return np.sort(2.0 ** (self.lambda_sign * ns))


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return "%.17g" % v


def write_table(table: Table, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(table.columns)
        for row in table.rows:
            wr.writerow([_fmt(v) for v in row])


def write_dataset(tables: Sequence[Table], out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for t in tables:
        p = os.path.join(out_dir, f"{t.name}.csv")
        write_table(t, p)
        paths.append(p)
    return paths


def sweep_context(params: ModelParams, lam: float, y_max: float) -> ValueContext:
    """Context for one sweep rate, with the cached coefficient table on ``[0, y_max]``."""
    p = params.replace(default_rate=float(lam))
    bounds = compute_boundaries(p)
    if lam > 0:
        bounds = bounds.with_b_table(y_max)
    return ValueContext(p, bounds)


def cache_discrepancy(bounds: BoundarySet, n: int = 25) -> float:
    """Largest gap between the cached and the directly integrated coefficient at off-node points."""
    table = bounds.b_table
    if table is None:
        return 0.0
    exact = compute_boundaries(bounds.params, bounds.quadrature_tol)
    ys = table.ys
    idx = np.linspace(0, ys.size - 2, n).astype(int)
    mids = 0.5 * (ys[idx] + ys[idx + 1])
    return max(abs(bounds.b_scaled(float(y)) - exact.b_scaled(float(y))) for y in mids)


def _curves(name: str, ys, xs, fn) -> Table:
    t = Table(name, ("y", "x", "v"))
    for y in ys:
        for x in xs:
            t.rows.append((float(y), float(x), fn(float(x), float(y))))
    return t


def dataset_f1(ctx: ValueContext, spec: Optional[FigureSpec] = None) -> list[Table]:
    spec = spec or FigureSpec.default("f1")
    ys, xs = spec.ys(), spec.xs()
    F0 = ctx.bounds.F0
    g = ctx.params.gamma
    curves = _curves("f1_curves", ys, xs, lambda x, y: v_above(x, y, ctx))
    markers = Table("f1_markers", ("y", "x_marker", "v_marker", "kind"))
    for y in ys:
        y = float(y)
        markers.rows.append((y, F0, v_above(F0, y, ctx), "lower"))
    for y in ys:
        y = float(y)
        xu = F0 * math.exp(g * y)
        markers.rows.append((y, xu, v_above(xu, y, ctx), "upper"))
    return [curves, markers]


def dataset_f2(ctx: ValueContext, spec: Optional[FigureSpec] = None) -> list[Table]:
    spec = spec or FigureSpec.default("f2")
    ys, xs = spec.ys(), spec.xs()
    b = ctx.bounds
    g = ctx.params.gamma
    curves = _curves("f2_curves", ys, xs, lambda x, y: v_below(x, y, ctx))
    markers = Table("f2_markers", ("y", "x_marker", "v_marker", "kind"))
    for kind in ("lower", "upper", "liquidation_edge"):
        for y in ys:
            y = float(y)
            G = float(b.g_lambda(y))
            x = {"lower": G, "upper": G * math.exp(g * y), "liquidation_edge": b.g0 * math.exp(g * y)}[kind]
            markers.rows.append((y, x, v_below(x, y, ctx), kind))
    return [curves, markers]


def dataset_f3(params: ModelParams, spec: Optional[FigureSpec] = None) -> list[Table]:
    """Boundary curves across the sweep; ``lambda = 0`` rows hold ``F0`` and ``inf`` rows ``G_inf``."""
    spec = spec or FigureSpec.default("f3")
    ys = spec.ys()
    g = params.gamma
    t = Table("f3_boundaries", ("lambda", "y", "x_lower", "x_upper"))
    b0 = compute_boundaries(params.replace(default_rate=0.0))
    for y in ys:
        t.rows.append((0.0, float(y), b0.F0, b0.F0 * math.exp(g * y)))
    for lam in spec.lambdas():
        bl = compute_boundaries(params.replace(default_rate=float(lam)))
        for y in ys:
            G = float(bl.g_lambda(float(y)))
            t.rows.append((float(lam), float(y), G, G * math.exp(g * y)))
    for y in ys:
        Gi = float(g_infinity(float(y), params))
        t.rows.append((math.inf, float(y), Gi, Gi * math.exp(g * y)))
    return [t]


def v_infinity_shares(x: float, y: float, params: ModelParams) -> float:
    """Maximiser of the static sell-then-default payoff (concave in the amount sold)."""
    g, cs, K = params.gamma, params.cost_sell, params.default_penalty

    def slope(d: float) -> float:
        return x * math.exp(-g * d) * (1.0 + K * (g * (y - d) + 1.0)) - cs

    if y == 0.0 or slope(0.0) <= 0.0:
        return 0.0
    if slope(y) >= 0.0:
        return y
    return brentq(slope, 0.0, y, xtol=1e-15, rtol=1e-15)


def v_infinity(x: float, y: float, params: ModelParams) -> float:
    """Large-rate limit: sell ``d`` now, then default immediately and pay ``K*x*(y - d)``."""
    g, cs, K = params.gamma, params.cost_sell, params.default_penalty
    d = v_infinity_shares(x, y, params)
    e = math.exp(-g * d)
    return x / g * -math.expm1(-g * d) - cs * d - K * x * e * (y - d)


def dataset_f4(params: ModelParams, spec: Optional[FigureSpec] = None) -> list[Table]:
    """Value slices at fixed inventory across the sweep, with the two limit curves.

    Rows with ``lambda = 0`` are the no-default value and rows with
    ``lambda = inf`` are the derived large-rate limit.
    """
    spec = spec or FigureSpec.default("f4")
    xs = spec.xs()
    y = float(spec.y_fixed)
    g = params.gamma
    t = Table("f4_values", ("lambda", "x", "v", "kind"))
    ctx0 = ValueContext.from_params(params.replace(default_rate=0.0))
    for x in xs:
        t.rows.append((0.0, float(x), v_above(float(x), y, ctx0), "v0"))
    markers = []
    for lam in spec.lambdas():
        ctx = sweep_context(params, lam, y)
        gap = cache_discrepancy(ctx.bounds)
        if gap > CACHE_TOL:
            raise ArithmeticError(f"coefficient cache off by {gap:g} at lambda={lam:g}")
        for x in xs:
            t.rows.append((float(lam), float(x), v_below(float(x), y, ctx), "v_lambda"))
        G = float(ctx.bounds.g_lambda(y))
        xu = G * math.exp(g * y)
        markers.append((float(lam), G, v_below(G, y, ctx), "marker_lower"))
        markers.append((float(lam), xu, v_below(xu, y, ctx), "marker_upper"))
    for x in xs:
        t.rows.append((math.inf, float(x), v_infinity(float(x), y, params), "v_inf"))
    F0 = ctx0.bounds.F0
    markers.append((0.0, F0, v_above(F0, y, ctx0), "marker_lower"))
    markers.append((0.0, F0 * math.exp(g * y), v_above(F0 * math.exp(g * y), y, ctx0), "marker_upper"))
    Gi = float(g_infinity(y, params))
    markers.append((math.inf, Gi, v_infinity(Gi, y, params), "marker_lower"))
    markers.append((math.inf, Gi * math.exp(g * y), v_infinity(Gi * math.exp(g * y), y, params), "marker_upper"))
    t.rows.extend(markers)
    return [t]


def build(figure: str, params: ModelParams, spec: Optional[FigureSpec] = None) -> list[Table]:
    spec = spec or FigureSpec.default(figure)
    if figure == "f1":
        return dataset_f1(ValueContext.from_params(params.replace(default_rate=0.0)), spec)
    if figure == "f2":
        return dataset_f2(ValueContext.from_params(params), spec)
    if figure == "f3":
        return dataset_f3(params, spec)
    if figure == "f4":
        return dataset_f4(params, spec)
    raise ValueError(f"unknown figure {figure!r}")


# --- sweep properties ---


def f3_checks(table: Table) -> dict:
    """Monotonicity in the rate and bracketing by the limit curves."""
    rows = table.rows
    by_lam: dict[float, dict[float, float]] = {}
    for lam, y, lo, _ in rows:
        by_lam.setdefault(lam, {})[y] = lo
    lams = sorted(k for k in by_lam if 0 < k < math.inf)
    ys = sorted(by_lam[0.0])
    monotone = all(by_lam[a][y] > by_lam[b][y] for a, b in zip(lams, lams[1:]) for y in ys)
    bracket = all(by_lam[math.inf][y] < by_lam[lam][y] < by_lam[0.0][y] for lam in lams for y in ys)
    smallest = max(abs(by_lam[lams[0]][y] - by_lam[0.0][y]) for y in ys)
    largest = max(abs(by_lam[lams[-1]][y] - by_lam[math.inf][y]) for y in ys)
    return {
        "monotone": monotone,
        "bracketed": bracket,
        "smallest_rate_gap_to_F0": smallest,
        "largest_rate_gap_to_G_inf": largest,
    }


def f4_checks(table: Table, tail: int = 5, tol: float = 1e-12) -> dict:
    """Pointwise monotonicity in the rate and the tail sup-distance to ``v_inf``."""
    curves: dict[float, dict[float, float]] = {}
    for lam, x, v, kind in table.rows:
        if kind in ("v_lambda", "v_inf", "v0"):
            curves.setdefault(lam, {})[x] = v
    lams = sorted(k for k in curves if 0 < k < math.inf)
    xs = sorted(curves[lams[0]])
    worst_increase = max(curves[b][x] - curves[a][x] for a, b in zip(lams, lams[1:]) for x in xs)
    vinf = curves[math.inf]
    dist = [max(abs(curves[lam][x] - vinf[x]) for x in xs) for lam in lams]
    tail_d = dist[-tail:]
    return {
        "nonincreasing": worst_increase <= tol,
        "worst_increase": worst_increase,
        "tail_lambdas": lams[-tail:],
        "tail_sup_distance": tail_d,
        "tail_decreasing": all(b < a for a, b in zip(tail_d, tail_d[1:])),
    }
