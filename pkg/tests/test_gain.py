import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contrarian.gain import (
    ConfigError,
    DelaySpec,
    GainFunction,
    ModelConfig,
    eval_gain,
    gain_derivative_at_half,
    load_config,
)

TANH_GAIN = GainFunction.tanh(0.5, 4.0, 3.0)
COMPETITIVE = GainFunction.linear(-2.0, 3.0)


def test_linear_value_at_half():
    assert eval_gain(COMPETITIVE, 0.5) == 2.0


def test_tanh_value_at_half():
    assert eval_gain(TANH_GAIN, 0.5) == 3.0


def test_constant_table():
    g = GainFunction.table([(0, 1), (1, 1)])
    assert eval_gain(g, 0.37) == 1.0
    assert gain_derivative_at_half(g) == 0.0
    assert g.monotonicity == "none"


def test_domain_error():
    with pytest.raises(ValueError):
        eval_gain(COMPETITIVE, 1.1)
    with pytest.raises(ValueError):
        eval_gain(COMPETITIVE, -1e-9)
    assert eval_gain(COMPETITIVE, 1 + 1e-13) == pytest.approx(1.0)


def test_derivatives():
    assert gain_derivative_at_half(COMPETITIVE) == -2.0
    assert gain_derivative_at_half(TANH_GAIN) == -2.0
    h = 1e-6
    fd = (TANH_GAIN(0.5 + h) - TANH_GAIN(0.5 - h)) / (2 * h)
    assert fd == pytest.approx(-2.0, rel=1e-8)


def test_monotonicity_flags():
    assert COMPETITIVE.monotonicity == "decreasing"
    assert GainFunction.linear(2.0, 1.0).monotonicity == "increasing"
    assert TANH_GAIN.monotonicity == "decreasing"
    assert GainFunction.constant(2.0).monotonicity == "none"


def test_positivity_rejected():
    with pytest.raises(ConfigError) as e:
        GainFunction.linear(-2.0, 1.5)
    assert e.value.field == "gain"
    with pytest.raises(ConfigError):
        GainFunction.linear(-2.0, 2.0)  # phi(1) = 0
    with pytest.raises(ConfigError):
        GainFunction.tanh(2.0, 4.0, 1.0)
    with pytest.raises(ConfigError):
        GainFunction.table([(0, 1), (0.5, -0.1), (1, 1)])


def test_table_validation():
    with pytest.raises(ConfigError):
        GainFunction.table([(0, 1)])
    with pytest.raises(ConfigError):
        GainFunction.table([(0, 1), (0.6, 2), (0.5, 1), (1, 1)])
    with pytest.raises(ConfigError):
        GainFunction.table([(0.1, 1), (1, 1)])


def test_table_kink_at_half_rejected_for_bifurcation():
    g = GainFunction.table([(0, 3), (0.5, 2), (1, 2)])
    with pytest.raises(ConfigError) as e:
        g.require_smooth_at_half()
    assert e.value.field == "gain.knots"
    GainFunction.table([(0, 3), (1, 1)]).require_smooth_at_half()


def test_sup():
    assert COMPETITIVE.sup() == 3.0
    assert TANH_GAIN.sup() == pytest.approx(3.0 + 0.5 * math.tanh(2.0))
    assert GainFunction.table([(0, 1), (0.3, 5), (1, 2)]).sup() == 5.0


@settings(max_examples=60, deadline=None)
@given(
    slope=st.one_of(st.just(0.0), st.floats(1e-3, 10), st.floats(-10, -1e-3)),
    margin=st.floats(0.01, 5),
)
def test_linear_positive_on_grid(slope, margin):
    g = GainFunction.linear(slope, max(0.0, -slope) + margin)
    x = np.linspace(0, 1, 10_000)
    vals = g(x)
    assert np.all(vals > 0)
    steps = np.diff(vals)
    if g.monotonicity == "decreasing":
        assert np.all(steps < 0)
    elif g.monotonicity == "increasing":
        assert np.all(steps > 0)


@settings(max_examples=40, deadline=None)
@given(amp=st.floats(0.01, 2), slope=st.floats(-8, 8), shift_margin=st.floats(0.01, 3))
def test_tanh_c_matches_analytic(amp, slope, shift_margin):
    g = GainFunction.tanh(amp, slope, amp + shift_margin)
    h = 1e-6
    fd = float((g(0.5 + h) - g(0.5 - h)) / (2 * h))
    assert abs(g.derivative_at_half() / 4 - fd / 4) < 1e-8 * max(1, abs(fd))
    assert g.derivative_at_half() == -amp * slope


def test_gain_dict_roundtrip():
    for g in (COMPETITIVE, TANH_GAIN, GainFunction.table([(0, 1), (0.5, 2), (1, 1.5)])):
        assert GainFunction.from_dict(json.loads(json.dumps(g.to_dict()))) == g


def test_gain_dict_errors():
    with pytest.raises(ConfigError) as e:
        GainFunction.from_dict({"kind": "cubic"})
    assert e.value.field == "gain.kind"
    with pytest.raises(ConfigError) as e:
        GainFunction.from_dict({"kind": "linear", "slope": 1})
    assert e.value.field == "gain.intercept"
    with pytest.raises(ConfigError) as e:
        GainFunction.from_dict({"kind": "linear", "slope": "x", "intercept": 1})
    assert e.value.field == "gain.slope"
    with pytest.raises(ConfigError) as e:
        GainFunction.from_dict({"kind": "linear", "slope": 1, "intercept": 2, "b": 1})
    assert e.value.field == "gain.b"


def test_config_validation():
    with pytest.raises(ConfigError) as e:
        ModelConfig(0, COMPETITIVE)
    assert e.value.field == "n_agents"
    with pytest.raises(ConfigError) as e:
        ModelConfig(10, COMPETITIVE, horizon=-1.0)
    assert e.value.field == "horizon"
    with pytest.raises(ConfigError) as e:
        ModelConfig(10, COMPETITIVE, sample_dt=0.0)
    assert e.value.field == "sample_dt"
    with pytest.raises(ConfigError) as e:
        ModelConfig(10, COMPETITIVE, seed=2**64)
    assert e.value.field == "seed"
    with pytest.raises(ConfigError) as e:
        DelaySpec(2, 0.0)
    assert e.value.field == "delay.k"
    with pytest.raises(ConfigError) as e:
        DelaySpec(-1, 1.0)
    assert e.value.field == "delay.n"


def test_config_roundtrip_and_hash(tmp_path):
    cfg = ModelConfig(100, TANH_GAIN, DelaySpec(2, 0.9), horizon=50.0, seed=7, sample_dt=0.05)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = load_config(path)
    assert back == cfg
    assert back.config_hash() == cfg.config_hash()
    assert cfg.replace(seed=8).config_hash() != cfg.config_hash()


def test_config_unknown_key():
    d = ModelConfig(10, COMPETITIVE).to_dict()
    d["colour"] = "red"
    with pytest.raises(ConfigError) as e:
        ModelConfig.from_dict(d)
    assert e.value.field == "colour"
    d = ModelConfig(10, COMPETITIVE).to_dict()
    d["delay"] = {"n": 2, "k": 1.0, "shape": 3}
    with pytest.raises(ConfigError) as e:
        ModelConfig.from_dict(d)
    assert e.value.field == "delay.shape"
