import json
import math

import pytest

from optliq import model as m
from optliq.model import ModelParams, RegionLabel, State


def test_reference_params_are_valid():
    p = ModelParams.reference()
    assert m.validate(p) is p
    assert (p.barrier, p.rho) == (0.0, 0.0)


@pytest.mark.parametrize(
    "change, exc",
    [
        (dict(delta=0.5), m.DriftDominance),
        (dict(delta=0.4), m.DriftDominance),
        (dict(sigma=0.0), m.ZeroVolatility),
        (dict(gamma=0.0), m.NonPositiveImpact),
        (dict(cost_sell=-1.0), m.NonPositiveCost),
        (dict(default_penalty=-0.1), m.NegativePenalty),
        (dict(default_rate=-0.1), m.NegativeDefaultRate),
        (dict(rho=1.5), m.CorrelationOutOfRange),
        (dict(mu=math.nan), m.NonFiniteParameter),
        (dict(sigma=math.inf), m.NonFiniteParameter),
    ],
)
def test_validate_rejects(change, exc):
    with pytest.raises(exc) as info:
        m.validate(ModelParams.reference(**change))
    assert set(change) <= set(info.value.values) or isinstance(info.value, m.NonFiniteParameter)


def test_zero_rate_and_edge_correlations_are_valid():
    m.validate(ModelParams.reference(default_rate=0.0))
    m.validate(ModelParams.reference(rho=-1.0))
    m.validate(ModelParams.reference(default_penalty=0.0))


def test_config_roundtrip(tmp_path):
    p = ModelParams.reference(barrier=0.25, rho=-0.3)
    f = tmp_path / "c.json"
    f.write_text(json.dumps(p.to_dict()))
    assert m.load_params(str(f)) == p


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("rho"),
        lambda d: d.update(extra=1.0),
        lambda d: d.update(mu="0.5"),
        lambda d: d.update(mu=True),
        lambda d: d.update(mu=None),
    ],
)
def test_config_is_strict(mutate):
    d = ModelParams.reference().to_dict()
    mutate(d)
    with pytest.raises(m.ConfigError):
        m.params_from_mapping(d)


def test_config_bad_json():
    with pytest.raises(m.ConfigError):
        m.params_from_json("{nope")
    with pytest.raises(m.ConfigError):
        m.params_from_json("[1, 2]")


@pytest.mark.parametrize("x, y, w", [(0.0, 1.0, 0.0), (-1.0, 1.0, 0.0), (1.0, -0.1, 0.0), (1.0, 1.0, math.nan), (math.inf, 1, 0)])
def test_invalid_state(x, y, w):
    with pytest.raises(m.InvalidState):
        State(x, y, w)


def test_region_label_properties():
    assert RegionLabel.WAIT_ABOVE.above and RegionLabel.WAIT_ABOVE.waiting
    assert RegionLabel.SELL2_BELOW.selling and not RegionLabel.SELL2_BELOW.above
    assert not RegionLabel.LIQUIDATED.selling and not RegionLabel.LIQUIDATED.waiting
    assert RegionLabel("Sell1Below") is RegionLabel.SELL1_BELOW
