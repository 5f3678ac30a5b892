"""
Monte Carlo simulation of the controlled price / inventory / credit system.

Each path runs a fixed-step loop: apply the policy's block sale, then move
the price and credit index one step (exact log-normal step for the price).
Default is handled in one of two ways:

* ``survival``: never sampled; payoffs are weighted by the survival factor
  ``exp(-delta*t - lam*int 1{w<b} ds)`` and the expected default loss is
  charged as a running cost ``lam*1{w<b}*K*x*y*dt``.
* ``sampled``: an ``Exp(1)`` threshold is drawn once and default occurs
  when the accumulated hazard crosses it; the loss ``K*x*y`` is then paid
  and the path stops.

Paths use independent Philox substreams keyed by ``(seed, path index)``,
so results do not depend on thread scheduling.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numba as nb
import numpy as np

from .model import ModelError, ModelParams, State
from .value import ValueContext, optimal_sale, value

POLICIES = ("optimal", "immediate", "sell-at", "hold")
ESTIMATORS = ("survival", "sampled")
_POLICY_CODE = {name: i for i, name in enumerate(POLICIES)}


class NegativeSale(ModelError):
    pass


class SimConfigError(ModelError):
    pass


@dataclass(frozen=True)
class Policy:
    kind: str = "optimal"
    sell_time: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in POLICIES:
            raise SimConfigError(f"unknown policy {self.kind!r}; expected one of {POLICIES}")
        if self.kind == "sell-at" and not (self.sell_time >= 0 and math.isfinite(self.sell_time)):
            raise SimConfigError(f"sell time must be finite and >= 0, got {self.sell_time}")

    @classmethod
    def optimal(cls) -> "Policy":
        return cls("optimal")

    @classmethod
    def immediate(cls) -> "Policy":
        return cls("immediate")

    @classmethod
    def sell_at(cls, t0: float) -> "Policy":
        return cls("sell-at", float(t0))

    @classmethod
    def hold(cls) -> "Policy":
        return cls("hold")

    @property
    def tag(self) -> str:
        return f"sell-at({self.sell_time:g})" if self.kind == "sell-at" else self.kind


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Attributes:
        dt: time step.
        t_max: horizon at which the infinite-horizon problem is truncated.
        n_paths: number of independent paths.
        seed: key of the counter-based generator.
        estimator: ``"survival"`` or ``"sampled"``.
        policy: selling strategy.
        threads: worker threads (results do not depend on this).
    """

    dt: float = 1e-3
    t_max: float = 15.0
    n_paths: int = 10_000
    seed: int = 0
    estimator: str = "survival"
    policy: Policy = field(default_factory=Policy.optimal)
    threads: int = 1

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise SimConfigError(f"dt must be positive, got {self.dt}")
        if not (self.t_max >= self.dt and math.isfinite(self.t_max)):
            raise SimConfigError(f"t_max must be finite and >= dt, got {self.t_max}")
        if self.n_paths < 1:
            raise SimConfigError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.estimator not in ESTIMATORS:
            raise SimConfigError(f"unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}")
        if self.threads < 1:
            raise SimConfigError(f"threads must be >= 1, got {self.threads}")
        if self.seed < 0:
            raise SimConfigError(f"seed must be >= 0, got {self.seed}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class PathRecord:
    discounted_gain: float
    defaulted: bool
    default_time: Optional[float]
    final_inventory: float
    shares_sold_total: float


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    dt: float
    t_max: float
    estimator: str
    policy: str
    seed: int
    default_fraction: float
    truncation_bound: float
    barrier: float
    rho: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["artifact_defaults"] = "barrier, rho and the initial state are user choices, not model outputs"
        return d


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Independent substream for path ``index``."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, index, 0]))


def step_exact(x0: float, w: float, dt: float, mu: float, sigma: float, rho: float, rng: np.random.Generator):
    """One step of the unaffected price and the credit index.

    Returns ``(x0_next, w_next, dB)`` where ``dB`` is the price-noise increment.
    """
    z1 = rng.standard_normal()
    z2 = rng.standard_normal()
    sq = math.sqrt(dt)
    dw = sq * z1
    db = sq * (rho * z1 + math.sqrt(max(1.0 - rho * rho, 0.0)) * z2)
    return x0 * math.exp((mu - 0.5 * sigma * sigma) * dt + sigma * db), w + dw, db


def sale_gain(x: float, delta: float, gamma: float, cost_sell: float) -> float:
    """Proceeds of selling ``delta`` shares at once from price ``x`` with multiplicative impact."""
    if delta < 0:
        raise NegativeSale(f"cannot sell a negative amount ({delta})")
    return x / gamma * -math.expm1(-gamma * delta) - cost_sell * delta


def optimal_action(s: State, ctx: ValueContext) -> float:
    """Shares the optimal strategy sells at ``s`` (moves the state onto the waiting-region closure)."""
    return optimal_sale(s, ctx)


@nb.njit(nogil=True, cache=True)
def _lower_landing(x, y, gamma, c1, kappa):
    # root in [0, y] of log(x) - gamma*d - log(G(y - d)), G(t) = c1/(1 + kappa*(gamma*t + 1))
    lx = math.log(x) - math.log(c1)
    lo = 0.0
    hi = y
    d = 0.0
    for _ in range(100):
        q = 1.0 + kappa + kappa * gamma * (y - d)
        h = lx - gamma * d + math.log(q)
        if h > 0.0:
            lo = d
        else:
            hi = d
        dh = -gamma - kappa * gamma / q
        nxt = d - h / dh
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - d) <= 1e-13 * (1.0 + y) or hi - lo <= 1e-13:
            return nxt
        d = nxt
    return d


@nb.njit(nogil=True, cache=True)
def _optimal_shares(x, y, below, gamma, F0, c1, kappa):
    if y <= 0.0:
        return 0.0
    if below:
        bd = c1 / (1.0 + kappa * (gamma * y + 1.0))
        bd0 = c1 / (1.0 + kappa)
    else:
        bd = F0
        bd0 = F0
    if x < bd:
        return 0.0
    if x >= bd0 * math.exp(gamma * y):
        return y
    if below:
        d = _lower_landing(x, y, gamma, c1, kappa)
    else:
        d = math.log(x / F0) / gamma
    return min(max(d, 0.0), y)


@nb.njit(nogil=True, cache=True)
def _run_path(rng, x0, y0, w0, mu, sigma, delta, gamma, cs, lam, K, barrier, rho,
              F0, c1, kappa, policy, t_sell, dt, n_steps, sampled):
    """Returns (gain, defaulted, default_time, final_inventory, sold)."""
    threshold = rng.standard_exponential()
    sq = math.sqrt(dt)
    rr = math.sqrt(max(1.0 - rho * rho, 0.0))
    drift = (mu - 0.5 * sigma * sigma) * dt
    x = x0
    y = y0
    w = w0
    hz = 0.0  # lam * time spent below the barrier
    gain = 0.0
    sold = 0.0
    for k in range(n_steps + 1):
        t = k * dt
        below = w < barrier
        if y > 0.0:
            if policy == 0:
                d = _optimal_shares(x, y, below and lam > 0.0, gamma, F0, c1, kappa)
            elif policy == 1:
                d = y
            elif policy == 2:
                d = y if t >= t_sell - 1e-12 else 0.0
            else:
                d = 0.0
            if d > 0.0:
                if sampled:
                    disc = math.exp(-delta * t)
                else:
                    disc = math.exp(-delta * t - hz)
                gain += disc * (x / gamma * -math.expm1(-gamma * d) - cs * d)
                x *= math.exp(-gamma * d)
                y -= d
                sold += d
                if y < 1e-15 * y0:
                    sold += y
                    y = 0.0
        if y <= 0.0 or k == n_steps:
            break
        rate = lam if below else 0.0
        if rate > 0.0:
            if sampled:
                if hz + rate * dt > threshold:
                    tau = t + (threshold - hz) / rate
                    gain -= math.exp(-delta * tau) * K * x * y
                    return gain, True, tau, y, sold
            else:
                gain -= math.exp(-delta * t - hz) * rate * K * x * y * dt
        hz += rate * dt
        z1 = rng.standard_normal()
        z2 = rng.standard_normal()
        w += sq * z1
        x *= math.exp(drift + sigma * sq * (rho * z1 + rr * z2))
    return gain, False, -1.0, y, sold


def _kernel_args(s: State, ctx: ValueContext, cfg: SimConfig) -> tuple:
    p = ctx.params
    b = ctx.bounds
    c1 = b.n1 * p.cost_sell / (b.n1 - 1.0)
    return (
        float(s.x), float(s.y), float(s.w),
        p.mu, p.sigma, p.delta, p.gamma, p.cost_sell, p.default_rate, p.default_penalty, p.barrier, p.rho,
        b.F0, c1, b.kappa,
        _POLICY_CODE[cfg.policy.kind], float(cfg.policy.sell_time),
        cfg.dt, cfg.n_steps, cfg.estimator == "sampled",
    )


def run_path(initial: State, ctx: ValueContext, cfg: SimConfig, rng: np.random.Generator) -> PathRecord:
    gain, defaulted, tau, y_end, sold = _run_path(rng, *_kernel_args(initial, ctx, cfg))
    return PathRecord(gain, bool(defaulted), tau if defaulted else None, y_end, sold)


def truncation_bound(params: ModelParams, x: float, t_max: float) -> float:
    """Bound on the payoff lost by stopping at ``t_max``: ``exp(-(delta-mu)*t_max)*x/gamma``."""
    return math.exp(-(params.delta - params.mu) * t_max) * x / params.gamma


def simulate_paths(initial: State, ctx: ValueContext, cfg: SimConfig) -> dict[str, np.ndarray]:
    """Run all paths and return per-path arrays keyed by record field."""
    n = cfg.n_paths
    gains = np.empty(n)
    defaulted = np.zeros(n, dtype=bool)
    taus = np.full(n, np.nan)
    y_end = np.empty(n)
    sold = np.empty(n)
    args = _kernel_args(initial, ctx, cfg)

    def work(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            g, d, tau, ye, so = _run_path(path_generator(cfg.seed, i), *args)
            gains[i] = g
            defaulted[i] = d
            if d:
                taus[i] = tau
            y_end[i] = ye
            sold[i] = so

    if cfg.threads == 1:
        work(0, n)
    else:
        edges = np.linspace(0, n, cfg.threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            list(pool.map(lambda ab: work(*ab), zip(edges[:-1], edges[1:])))
    return {
        "path_id": np.arange(n),
        "defaulted": defaulted,
        "default_time": taus,
        "discounted_gain": gains,
        "final_inventory": y_end,
        "shares_sold_total": sold,
    }


def summarize(paths: dict[str, np.ndarray], initial: State, ctx: ValueContext, cfg: SimConfig) -> McEstimate:
    gains = paths["discounted_gain"]
    n = gains.size
    # identical gains (deterministic policies) give an exact zero, not rounding noise
    if n > 1 and np.ptp(gains) > 0:
        se = float(np.std(gains, ddof=1) / math.sqrt(n))
    else:
        se = 0.0
    return McEstimate(
        mean=float(gains[0]) if se == 0.0 else float(np.mean(gains)),
        std_error=se,
        n_paths=n,
        dt=cfg.dt,
        t_max=cfg.t_max,
        estimator=cfg.estimator,
        policy=cfg.policy.tag,
        seed=cfg.seed,
        default_fraction=float(np.mean(paths["defaulted"])),
        truncation_bound=truncation_bound(ctx.params, initial.x, cfg.t_max),
        barrier=ctx.params.barrier,
        rho=ctx.params.rho,
    )


def estimate(initial: State, ctx: ValueContext, cfg: SimConfig) -> McEstimate:
    """Mean discounted gain and its standard error over ``cfg.n_paths`` paths."""
    return summarize(simulate_paths(initial, ctx, cfg), initial, ctx, cfg)


def write_paths_csv(paths: dict[str, np.ndarray], path: str) -> None:
    cols = ["path_id", "defaulted", "default_time", "discounted_gain", "final_inventory"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for i in range(paths["path_id"].size):
            tau = paths["default_time"][i]
            wr.writerow([
                int(paths["path_id"][i]),
                int(bool(paths["defaulted"][i])),
                "" if math.isnan(tau) else f"{tau:.17g}",
                f"{paths['discounted_gain'][i]:.17g}",
                f"{paths['final_inventory'][i]:.17g}",
            ])


def mc_tolerance(est: McEstimate, x: float, c: float = 0.5) -> float:
    """``3*SE + c*sqrt(dt)*x``: the acceptance band around the analytic value."""
    return 3.0 * est.std_error + c * math.sqrt(est.dt) * x


def compare_to_value(initial: State, ctx: ValueContext, est: McEstimate, c: float = 0.5) -> dict:
    v = value(initial, ctx)
    tol = mc_tolerance(est, initial.x, c)
    return {"value": v, "mean": est.mean, "gap": est.mean - v, "tolerance": tol, "passed": abs(est.mean - v) <= tol}
