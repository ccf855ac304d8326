"""Shipped determinism fixtures: each case maps a recorded seed to CSV text.

Shared by tools/make_fixtures.py (which writes the golden files) and the
determinism tests (which regenerate and compare byte for byte).
"""
from pathlib import Path

from contrarian import experiments, meanfield, microsim
from contrarian.gain import DelaySpec, GainFunction, ModelConfig

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"

COMPETITIVE = GainFunction.linear(-2.0, 3.0)


def no_delay_path(seed):
    cfg = ModelConfig(100, COMPETITIVE, horizon=10.0, seed=seed)
    return microsim.simulate_no_delay(cfg, 0.2).to_csv()


def delay_path(seed):
    cfg = ModelConfig(200, COMPETITIVE, DelaySpec(2, 0.9), horizon=20.0, seed=seed)
    return microsim.simulate_delay(cfg, 0.3).to_csv()


def tanh_delay_path(seed):
    cfg = ModelConfig(500, GainFunction.tanh(0.5, 4.0, 3.0), DelaySpec(3, 1.2), horizon=20.0, seed=seed, sample_dt=0.05)
    return microsim.simulate_delay(cfg, 0.4, replica=3, burn_in=5.0).to_csv()


def macro_path(seed):
    return meanfield.solve(COMPETITIVE, 0.3, 20.0, n=2, k=0.9).to_csv()


def kurtz_sweep(seed):
    cfg = ModelConfig(100, COMPETITIVE, horizon=5.0, seed=seed)
    return experiments.kurtz_error(cfg, 0.1, 5.0, [50, 100, 200], 8).to_csv()


def absorption_sweep(seed):
    return experiments.absorption_scaling(GainFunction.constant(1.0), [4, 8, 16], 20, 1e3, seed=seed).result.to_csv()


CASES = {
    "no_delay_path": (no_delay_path, 11),
    "delay_path": (delay_path, 12),
    "tanh_delay_path": (tanh_delay_path, 13),
    "macro_path": (macro_path, 0),
    "kurtz_sweep": (kurtz_sweep, 14),
    "absorption_sweep": (absorption_sweep, 15),
}
