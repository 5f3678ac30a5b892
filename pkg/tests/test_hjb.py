import json
import math

import numpy as np
import pytest

from optliq import hjb
from optliq.hjb import Grid, generator, verify_boundary_identities, verify_hjb, xi1, xi2
from optliq.model import RegionLabel, State
from optliq.value import ValueContext, value, value_derivatives

SMALL = Grid(nx=80, ny=12)


@pytest.fixture(scope="module")
def report(ctx):
    return verify_hjb(ctx)


def test_generator_vanishes_in_upper_waiting_region(ctx):
    for x, y in ((0.2, 0.5), (0.9, 3.0), (1.05, 6.0)):
        s = State(x, y, 1.0)
        assert abs(generator(s, ctx)) <= 1e-14 * (1 + value(s, ctx))


def test_generator_on_liquidation_branch(ctx):
    p = ctx.params
    for x, y in ((5.0, 1.0), (9.0, 0.3)):
        s = State(x, y, 1.0)
        expected = (p.mu - p.delta) * x / p.gamma * (1 - math.exp(-p.gamma * y)) + p.delta * p.cost_sell * y
        assert generator(s, ctx) == pytest.approx(expected, rel=1e-13)


def test_generator_is_linear(ctx):
    s = State(0.7, 2.0, 1.0)
    d = value_derivatives(s, ctx)
    v = value(s, ctx)
    d2 = type(d)(*(2 * c for c in d))
    assert generator(s, ctx, d2, 2 * v) == pytest.approx(2 * generator(s, ctx, d, v), rel=1e-15, abs=1e-16)


def test_xi1_examples(ctx):
    b = ctx.bounds
    for y in (0.5, 2.0, 6.0):
        G = float(b.g_lambda(y))
        assert abs(xi1(State(G, y, -1.0), ctx, side="left")) <= 1e-10
        mid = G * math.exp(0.3 * ctx.params.gamma * y)
        assert abs(xi1(State(mid, y, -1.0), ctx)) <= 1e-8
        assert xi1(State(10 * G * math.exp(ctx.params.gamma * y), y, -1.0), ctx) == pytest.approx(0.0, abs=1e-13)


def test_xi1_closed_form_in_waiting_region(ctx):
    worst = 0.0
    for y in np.linspace(0.1, 7, 20):
        G = float(ctx.bounds.g_lambda(y))
        for x in np.geomspace(0.01, G * 0.999, 30):
            a = xi1(State(float(x), float(y), -1.0), ctx)
            b = hjb.xi1_waiting_closed_form(float(x), float(y), ctx)
            worst = max(worst, abs(a - b))
    assert worst <= 1e-9


def test_xi1_nondecreasing_below_boundary(ctx):
    for y in (0.5, 3.0, 7.0):
        G = float(ctx.bounds.g_lambda(y))
        xs = np.geomspace(0.01, G * 0.999, 50)
        vals = [xi1(State(float(x), y, -1.0), ctx) for x in xs]
        assert np.all(np.diff(vals) >= -1e-12)


def test_xi2_examples(ctx):
    b = ctx.bounds
    g = ctx.params.gamma
    for y in (0.5, 2.0, 6.0):
        G = float(b.g_lambda(y))
        assert abs(xi2(State(0.5 * G, y, -1.0), ctx)) <= 1e-8
        assert abs(xi2(State(G * (1 + 1e-9), y, -1.0), ctx)) <= 1e-8
        edge = ctx.below.full_edge(y)
        assert xi2(State(edge * (1 + 1e-9), y, -1.0), ctx) < 0
        assert xi2(State(G * math.exp(g * y) * (1 + 1e-9), y, -1.0), ctx) < 0


def test_full_grid_report_passes(report):
    assert report.passed, report.failing()
    names = {r.name for r in report.per_region}
    assert names == {lab.value for lab in RegionLabel if lab is not RegionLabel.LIQUIDATED}
    assert sum(r.count for r in report.per_region) == 400 * 50 * 2
    for r in report.per_region:
        assert r.max_ineq_violation <= 1e-9
        assert r.max_eq_residual <= (1e-7 if r.name.startswith("Wait") else 1e-8)


def test_exactly_one_part_is_active(ctx):
    # at every point the larger of (equation, constraint) is ~0 and the other <= 0
    reg = ctx.below
    for y in np.linspace(0.1, 7, 8):
        for x in np.geomspace(0.01, 10, 40):
            label, eq, ineq, v = hjb.point_residuals(reg, float(x), float(y), ctx)
            assert eq <= 1e-7 and ineq <= 1e-9


def test_report_json_is_stable(ctx):
    a = verify_hjb(ctx, SMALL).to_json(sort_keys=True)
    b = verify_hjb(ctx, SMALL).to_json(sort_keys=True)
    assert a == b
    d = json.loads(a)
    assert set(d) == {"grid", "convention", "passed", "per_region"}
    assert set(d["per_region"][0]) >= {"name", "max_eq_residual", "max_ineq_violation", "worst_point"}
    assert "lambda K x y" in d["convention"]


def test_zero_rate_regimes_agree(params):
    ctx = ValueContext.from_params(params.replace(default_rate=0.0))
    rep = verify_hjb(ctx, SMALL)
    for above, below in (("WaitAbove", "WaitBelow"), ("Sell2Above", "Sell2Below"), ("Sell1Above", "Sell1Below")):
        a, b = rep.region(above), rep.region(below)
        assert (a.max_eq_residual, a.max_ineq_violation, a.count) == (b.max_eq_residual, b.max_ineq_violation, b.count)


def test_corrupted_coefficient_is_flagged(ctx):
    bad = ctx.with_bounds(ctx.bounds.with_b_scale(1.01))
    rep = verify_hjb(bad, SMALL)
    assert not rep.passed
    assert "Sell2Below" in rep.failing()
    assert rep.region("Sell2Below").max_eq_residual > 1e-4
    # the waiting-region equation is homogeneous in the power term and stays satisfied
    assert rep.region("WaitBelow").max_eq_residual <= 1e-7


def test_boundary_identities(ctx):
    rep = verify_boundary_identities(ctx)
    assert rep.passed, rep.failing()
    d1, d2 = hjb.theta_slopes_at_zero(ctx)
    assert d1 == pytest.approx(1.205, abs=1e-3)
    assert d2 == pytest.approx(1.25, abs=1e-12)
    assert d1 < d2


def test_h_is_nonpositive_on_many_rates(params):
    for lam in (0.01, 0.7, 5.0, 100.0):
        c = ValueContext.from_params(params.replace(default_rate=lam))
        for y in np.linspace(0.05, 7, 15):
            assert hjb.h_final(float(y), c) <= 0
            assert hjb.h_first(float(y), c) == pytest.approx(hjb.h_final(float(y), c), rel=1e-10)


def test_theta_zero_limits(ctx):
    assert hjb.theta1(0.0, ctx) == 0.0 and hjb.theta2(0.0, ctx) == 0.0
    h = 1e-7
    d1, d2 = hjb.theta_slopes_at_zero(ctx)
    assert hjb.theta1(h, ctx) / h == pytest.approx(d1, rel=1e-5)
    assert hjb.theta2(h, ctx) / h == pytest.approx(d2, rel=1e-5)


def test_boundary_identities_reject_nonpositive_y(ctx):
    with pytest.raises(ValueError):
        verify_boundary_identities(ctx, [0.0, 1.0])
