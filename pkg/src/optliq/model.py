"""
Model parameters, states and region labels.

Everything here is an immutable value object. ``ModelParams`` does not
validate itself on construction (some tests deliberately build degenerate
parameter sets); call :func:`validate` before using a parameter set for
anything that relies on the standing assumptions.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Any, Mapping


class ModelError(ValueError):
    """Base class for invalid model inputs."""


class ParameterError(ModelError):
    """A parameter set violates one of the admissibility conditions.

    Attributes:
        values: the offending parameter values, keyed by field name.
    """

    def __init__(self, message: str, **values: float):
        super().__init__(message)
        self.values = values


class DriftDominance(ParameterError):
    pass


class ZeroVolatility(ParameterError):
    pass


class NonPositiveImpact(ParameterError):
    pass


class NonPositiveCost(ParameterError):
    pass


class NegativePenalty(ParameterError):
    pass


class NegativeDefaultRate(ParameterError):
    pass


class CorrelationOutOfRange(ParameterError):
    pass


class NonFiniteParameter(ParameterError):
    pass


class ConfigError(ModelError):
    """Malformed parameter configuration (missing/unknown keys, bad JSON)."""


class InvalidState(ModelError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Market, default and cost constants.

    Attributes:
        mu: drift of the unaffected price.
        sigma: price volatility.
        delta: discount rate.
        gamma: permanent (multiplicative) impact per share sold.
        cost_sell: per-share transaction cost.
        default_rate: default intensity while the credit index is below the barrier.
        default_penalty: slope K of the terminal cost K*x*y paid at default.
        barrier: credit-index threshold b.
        rho: correlation between price noise and credit-index noise.
    """

    mu: float
    sigma: float
    delta: float
    gamma: float
    cost_sell: float
    default_rate: float
    default_penalty: float
    barrier: float = 0.0
    rho: float = 0.0

    @classmethod
    def reference(cls, **overrides: float) -> "ModelParams":
        """The reference parameter set used throughout the numerical study.

        ``barrier`` and ``rho`` are not part of that set; they default to 0.
        """
        base = dict(
            mu=0.5,
            sigma=0.2,
            delta=0.7,
            gamma=0.5,
            cost_sell=0.3,
            default_rate=0.7,
            default_penalty=0.5,
            barrier=0.0,
            rho=0.0,
        )
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes: float) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


PARAM_KEYS = tuple(f.name for f in fields(ModelParams))


def validate(params: ModelParams) -> ModelParams:
    """Check the admissibility conditions and return ``params`` unchanged.

    Raises:
        ParameterError: a subclass naming the first violated condition.
    """
    p = params
    for name in PARAM_KEYS:
        value = getattr(p, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise NonFiniteParameter(f"{name} must be a finite number, got {value!r}", **{name: value})
    if p.sigma == 0:
        raise ZeroVolatility("sigma must be non-zero", sigma=p.sigma)
    if p.gamma <= 0:
        raise NonPositiveImpact(f"gamma must be positive, got {p.gamma}", gamma=p.gamma)
    if p.cost_sell <= 0:
        raise NonPositiveCost(f"cost_sell must be positive, got {p.cost_sell}", cost_sell=p.cost_sell)
    if p.default_penalty < 0:
        raise NegativePenalty(
            f"default_penalty must be >= 0, got {p.default_penalty}", default_penalty=p.default_penalty
        )
    if p.default_rate < 0:
        raise NegativeDefaultRate(
            f"default_rate must be >= 0, got {p.default_rate}", default_rate=p.default_rate
        )
    if not -1.0 <= p.rho <= 1.0:
        raise CorrelationOutOfRange(f"rho must lie in [-1, 1], got {p.rho}", rho=p.rho)
    if p.delta <= p.mu:
        raise DriftDominance(
            f"discount rate must exceed drift (delta={p.delta}, mu={p.mu})", delta=p.delta, mu=p.mu
        )
    # implied by the checks above; kept as a guard against future edits
    if p.delta + p.default_rate - p.mu <= 0:
        raise DriftDominance(
            "delta + default_rate - mu must be positive",
            delta=p.delta,
            default_rate=p.default_rate,
            mu=p.mu,
        )
    return params


def params_from_mapping(data: Mapping[str, Any]) -> ModelParams:
    """Strictly build parameters from a mapping with exactly the known keys."""
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a JSON object")
    missing = [k for k in PARAM_KEYS if k not in data]
    unknown = sorted(k for k in data if k not in PARAM_KEYS)
    if missing:
        raise ConfigError(f"missing key(s): {', '.join(missing)}")
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    values = {}
    for k in PARAM_KEYS:
        v = data[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{k} must be a number, got {v!r}")
        values[k] = float(v)
    return ModelParams(**values)


def params_from_json(text: str) -> ModelParams:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return params_from_mapping(data)


def load_params(path: str) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        return params_from_json(fh.read())


@dataclass(frozen=True)
class State:
    """A point (x, y, w): impacted price, remaining inventory, credit index."""

    x: float
    y: float
    w: float

    def __post_init__(self) -> None:
        if not (self.x > 0) or not math.isfinite(self.x):
            raise InvalidState(f"price must be positive and finite, got x={self.x}")
        if not (self.y >= 0) or not math.isfinite(self.y):
            raise InvalidState(f"inventory must be non-negative and finite, got y={self.y}")
        if not math.isfinite(self.w):
            raise InvalidState(f"credit index must be finite, got w={self.w}")


class RegionLabel(str, Enum):
    WAIT_ABOVE = "WaitAbove"
    SELL2_ABOVE = "Sell2Above"
    SELL1_ABOVE = "Sell1Above"
    WAIT_BELOW = "WaitBelow"
    SELL2_BELOW = "Sell2Below"
    SELL1_BELOW = "Sell1Below"
    LIQUIDATED = "Liquidated"

    @property
    def above(self) -> bool:
        return self in (RegionLabel.WAIT_ABOVE, RegionLabel.SELL2_ABOVE, RegionLabel.SELL1_ABOVE)

    @property
    def waiting(self) -> bool:
        return self in (RegionLabel.WAIT_ABOVE, RegionLabel.WAIT_BELOW)

    @property
    def selling(self) -> bool:
        return not self.waiting and self is not RegionLabel.LIQUIDATED
