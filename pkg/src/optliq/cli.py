"""
Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
Everything printed on stdout is JSON; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import figures as figs
from .boundaries import compute_boundaries
from .hjb import Grid, verify_boundary_identities, verify_hjb
from .model import ModelError, ModelParams, State, load_params, validate
from .simulation import ESTIMATORS, POLICIES, Policy, SimConfig, compare_to_value, simulate_paths, summarize, write_paths_csv
from .value import ValueContext, classify, value, value_derivatives

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 2 with a diagnostic, never a traceback
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(o):
    # JSON has no inf/nan; spell them as strings
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def _emit(obj, out: Optional[str]) -> None:
    text = json.dumps(_clean(obj), default=_json_default, indent=2, allow_nan=False)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _params(args) -> ModelParams:
    if args.config is None:
        return ModelParams.reference()
    return validate(load_params(args.config))


def _state(args) -> State:
    for name in ("x", "y", "w"):
        if getattr(args, name) is None:
            raise UsageError(f"--{name} is required")
    return State(args.x, args.y, args.w)


def cmd_boundaries(args) -> int:
    p = _params(args)
    b = compute_boundaries(p)
    ys = np.linspace(0.0, args.y_max, args.samples)
    _emit(
        {
            "params": p.to_dict(),
            "n0": b.n0,
            "n1": b.n1,
            "F0": b.F0,
            "kappa": b.kappa,
            "G_lambda": [{"y": float(y), "G": float(b.g_lambda(float(y)))} for y in ys],
            "B": [{"y": float(y), "B": b.b_coeff(float(y))} for y in ys],
        },
        args.out,
    )
    return EXIT_OK


def cmd_value(args) -> int:
    p = _params(args)
    ctx = ValueContext.from_params(p)
    s = _state(args)
    reg = ctx.regime(s.w)
    out = {"x": s.x, "y": s.y, "w": s.w, "value": value(s, ctx), "region": classify(s, ctx).value}
    if reg.on_edge(s.x, s.y):
        out["derivatives"] = {side: value_derivatives(s, ctx, side)._asdict() for side in ("left", "right")}
    else:
        out["derivatives"] = value_derivatives(s, ctx)._asdict()
    _emit(out, args.out)
    return EXIT_OK


def cmd_region(args) -> int:
    p = _params(args)
    ctx = ValueContext.from_params(p)
    s = _state(args)
    _emit({"x": s.x, "y": s.y, "w": s.w, "region": classify(s, ctx).value}, args.out)
    return EXIT_OK


def _grid(args) -> Grid:
    return Grid(args.x_min, args.x_max, args.nx, args.y_min, args.y_max, args.ny)


def _ctx_for_verify(args) -> ValueContext:
    ctx = ValueContext.from_params(_params(args))
    if args.corrupt_b is not None:
        ctx = ctx.with_bounds(ctx.bounds.with_b_scale(args.corrupt_b))
    return ctx


def cmd_verify_hjb(args) -> int:
    rep = verify_hjb(_ctx_for_verify(args), _grid(args))
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_verify_identities(args) -> int:
    rep = verify_boundary_identities(_ctx_for_verify(args), args.y_values)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    ctx = _ctx_for_verify(args)
    h = verify_hjb(ctx, _grid(args))
    a = verify_boundary_identities(ctx, args.y_values)
    _emit({"passed": h.passed and a.passed, "hjb": h.to_dict(), "identities": a.to_dict()}, args.out)
    return EXIT_OK if (h.passed and a.passed) else EXIT_FAIL


def cmd_simulate(args) -> int:
    p = _params(args)
    ctx = ValueContext.from_params(p)
    s = _state(args)
    if args.policy == "sell-at":
        policy = Policy.sell_at(args.sell_time)
    else:
        policy = Policy(args.policy)
    cfg = SimConfig(
        dt=args.dt, t_max=args.tmax, n_paths=args.paths, seed=args.seed,
        estimator=args.estimator, policy=policy, threads=args.threads,
    )
    paths = simulate_paths(s, ctx, cfg)
    est = summarize(paths, s, ctx, cfg)
    cmp = compare_to_value(s, ctx, est)
    out = est.to_dict()
    out.update(
        {
            "x": s.x, "y": s.y, "w": s.w,
            "value": cmp["value"],
            "z_score": (est.mean - cmp["value"]) / est.std_error if est.std_error > 0 else None,
            "tolerance": cmp["tolerance"],
            "within_tolerance": cmp["passed"],
        }
    )
    if args.dump_paths:
        write_paths_csv(paths, args.dump_paths)
    _emit(out, args.out)
    return EXIT_OK


def cmd_figures(args) -> int:
    p = _params(args)
    if not args.out:
        raise UsageError("--out DIR is required for figures")
    ids = [args.figure] if args.figure else list(figs.FIGURES)
    written = {}
    for f in ids:
        tables = figs.build(f, p)
        try:
            written[f] = figs.write_dataset(tables, args.out)
        except OSError as exc:
            raise UsageError(f"cannot write to {args.out}: {exc}") from exc
    print(json.dumps({"written": written}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON parameter file (default: reference parameters)")
    common.add_argument("--out", metavar="PATH", help="output file (directory for figures); default stdout")
    common.add_argument("--threads", type=int, default=1, metavar="N")

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--x", type=float, help="price")
    point.add_argument("--y", type=float, help="inventory")
    point.add_argument("--w", type=float, help="credit index")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--x-min", type=float, default=0.01)
    grid.add_argument("--x-max", type=float, default=10.0)
    grid.add_argument("--nx", type=int, default=400)
    grid.add_argument("--y-min", type=float, default=0.1)
    grid.add_argument("--y-max", type=float, default=7.0)
    grid.add_argument("--ny", type=int, default=50)
    grid.add_argument("--y-values", type=float, nargs="+", default=[0.1, 0.5, 1.0, 1.5, 3.0, 7.0])
    grid.add_argument("--corrupt-b", type=float, default=None, help=argparse.SUPPRESS)

    parser = _Parser(prog="optliq", description="Optimal liquidation under default risk")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("boundaries", parents=[common], help="exponents, boundaries and sampled curves")
    p.add_argument("--y-max", type=float, default=7.0)
    p.add_argument("--samples", type=int, default=15)
    p.set_defaults(func=cmd_boundaries)

    p = sub.add_parser("value", parents=[common, point], help="value, region and partial derivatives")
    p.set_defaults(func=cmd_value)
    p = sub.add_parser("region", parents=[common, point], help="region label of a state")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("verify-hjb", parents=[common, grid], help="grid residuals of the variational inequality")
    p.set_defaults(func=cmd_verify_hjb)
    p = sub.add_parser("verify-identities", parents=[common, grid], help="closed-form lower-boundary identities")
    p.set_defaults(func=cmd_verify_identities)
    p = sub.add_parser("verify", parents=[common, grid], help="both verification suites")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", parents=[common, point], help="Monte Carlo estimate of a policy")
    p.add_argument("--policy", choices=POLICIES, default="optimal")
    p.add_argument("--sell-time", type=float, default=1.0, help="liquidation time for --policy sell-at")
    p.add_argument("--paths", type=int, default=10_000, metavar="N")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=15.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--estimator", choices=ESTIMATORS, default="survival")
    p.add_argument("--dump-paths", metavar="CSV", help="write per-path records")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("figures", parents=[common], help="figure datasets as CSV")
    p.add_argument("--figure", choices=figs.FIGURES)
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (ModelError, UsageError, OSError, ValueError) as exc:
        print(f"optliq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
