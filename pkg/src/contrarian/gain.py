"""Group-pressure (gain) functions and the validated model configuration.

A gain function ``phi`` maps the magnetization ``x`` in [0, 1] to a strictly
positive rate multiplier. Three shapes are supported:

* ``linear``: ``phi(x) = slope * x + intercept`` (signed slope; a negative
  slope is the competitive / contrarian case),
* ``tanh``: ``phi(x) = -amp * tanh(slope * (x - 1/2)) + shift``,
* ``table``: piecewise-linear interpolation through ``(x, phi(x))`` knots.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "ConfigError",
    "GainFunction",
    "DelaySpec",
    "ModelConfig",
    "eval_gain",
    "gain_derivative_at_half",
    "load_config",
]

DOMAIN_TOL = 1e-12
GRID_STEP = 1e-3
TABLE_FD_STEP = 1e-6
KIND_CODES = {"linear": 0, "tanh": 1, "table": 2}


class ConfigError(ValueError):
    """Invalid gain or model configuration. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class GainFunction:
    kind: str
    params: tuple = ()
    knots: tuple = ()
    monotonicity: str = field(init=False)

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ConfigError("gain.kind", f"unknown gain kind {self.kind!r}")
        if self.kind == "table":
            xs = np.array([k[0] for k in self.knots], dtype=float)
            ys = np.array([k[1] for k in self.knots], dtype=float)
            if xs.size < 2:
                raise ConfigError("gain.knots", "need at least two knots")
            if not np.all(np.isfinite(xs)) or not np.all(np.isfinite(ys)):
                raise ConfigError("gain.knots", "knots must be finite")
            if np.any(np.diff(xs) <= 0):
                raise ConfigError("gain.knots", "knot abscissae must be strictly increasing")
            if abs(xs[0]) > DOMAIN_TOL or abs(xs[-1] - 1.0) > DOMAIN_TOL:
                raise ConfigError("gain.knots", "knots must span exactly [0, 1]")
        else:
            expected = 2 if self.kind == "linear" else 3
            if len(self.params) != expected or not all(math.isfinite(p) for p in self.params):
                raise ConfigError("gain", f"{self.kind} gain needs {expected} finite parameters")

        grid = np.linspace(0.0, 1.0, int(round(1.0 / GRID_STEP)) + 1)
        values = self(grid)
        if self.kind == "linear":
            slope, intercept = self.params
            positive = min(intercept, slope + intercept) > 0
        else:
            positive = bool(np.all(values > 0))
            if self.kind == "table":
                positive = positive and min(k[1] for k in self.knots) > 0
        if not positive:
            raise ConfigError("gain", "phi must be strictly positive on [0, 1]")

        if self.kind == "table":
            steps = np.diff(values)
            sign = 1 if np.all(steps > 0) else (-1 if np.all(steps < 0) else 0)
        elif self.kind == "linear":
            sign = np.sign(self.params[0])
        else:
            sign = -np.sign(self.params[0] * self.params[1])
        mono = {1: "increasing", -1: "decreasing"}.get(int(sign), "none")
        object.__setattr__(self, "monotonicity", mono)

    # -- constructors -------------------------------------------------
    @classmethod
    def linear(cls, slope: float, intercept: float) -> "GainFunction":
        return cls("linear", (float(slope), float(intercept)))

    @classmethod
    def tanh(cls, amp: float, slope: float, shift: float) -> "GainFunction":
        return cls("tanh", (float(amp), float(slope), float(shift)))

    @classmethod
    def table(cls, knots) -> "GainFunction":
        return cls("table", knots=tuple((float(x), float(y)) for x, y in knots))

    @classmethod
    def constant(cls, value: float = 1.0) -> "GainFunction":
        return cls.linear(0.0, value)

    @classmethod
    def from_dict(cls, d: dict) -> "GainFunction":
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("gain", "expected an object with a 'kind' tag")
        kind = d["kind"]
        names = {
            "linear": ("slope", "intercept"),
            "tanh": ("amp", "slope", "shift"),
            "table": ("knots",),
        }.get(kind)
        if names is None:
            raise ConfigError("gain.kind", f"unknown gain kind {kind!r}")
        extra = set(d) - set(names) - {"kind"}
        if extra:
            raise ConfigError(f"gain.{sorted(extra)[0]}", "unknown key")
        missing = [n for n in names if n not in d]
        if missing:
            raise ConfigError(f"gain.{missing[0]}", "missing")
        if kind == "table":
            try:
                return cls.table(d["knots"])
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError("gain.knots", "expected a list of [x, y] pairs") from exc
        values = []
        for n in names:
            v = d[n]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"gain.{n}", "expected a number")
            values.append(float(v))
        return cls(kind, tuple(values))

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear", "slope": self.params[0], "intercept": self.params[1]}
        if self.kind == "tanh":
            amp, slope, shift = self.params
            return {"kind": "tanh", "amp": amp, "slope": slope, "shift": shift}
        return {"kind": "table", "knots": [list(k) for k in self.knots]}

    # -- evaluation ---------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            slope, intercept = self.params
            return slope * x + intercept
        if self.kind == "tanh":
            amp, slope, shift = self.params
            return -amp * np.tanh(slope * (x - 0.5)) + shift
        xs, ys = self.table_arrays()
        return np.interp(x, xs, ys)

    def table_arrays(self):
        if self.kind != "table":
            return np.zeros(2), np.zeros(2)
        return (np.array([k[0] for k in self.knots]), np.array([k[1] for k in self.knots]))

    def kernel_args(self):
        """Flat representation consumed by the compiled simulation kernels."""
        xs, ys = self.table_arrays()
        params = np.zeros(3)
        params[: len(self.params)] = self.params
        return KIND_CODES[self.kind], params, xs, ys

    def sup(self) -> float:
        """Exact maximum of phi on [0, 1]."""
        if self.kind == "table":
            return max(k[1] for k in self.knots)
        # linear and tanh are monotone, so the max sits at an endpoint
        return float(max(self(0.0), self(1.0)))

    def derivative_at_half(self) -> float:
        if self.kind == "linear":
            return self.params[0]
        if self.kind == "tanh":
            amp, slope, _ = self.params
            return -amp * slope
        h = TABLE_FD_STEP
        return float((self(0.5 + h) - self(0.5 - h)) / (2 * h))

    def require_smooth_at_half(self, tol: float = 1e-6):
        """Reject tables with a kink at x = 1/2 (bifurcation analysis needs phi'(1/2))."""
        if self.kind != "table":
            return
        h = TABLE_FD_STEP
        left = float((self(0.5) - self(0.5 - h)) / h)
        right = float((self(0.5 + h) - self(0.5)) / h)
        if abs(left - right) > tol:
            raise ConfigError("gain.knots", f"phi is not differentiable at 1/2 (slopes {left} vs {right})")


def eval_gain(g: GainFunction, x: float) -> float:
    if not (-DOMAIN_TOL <= x <= 1.0 + DOMAIN_TOL):
        raise ValueError(f"x={x} outside [0, 1]")
    return float(g(min(max(x, 0.0), 1.0)))


def gain_derivative_at_half(g: GainFunction) -> float:
    return g.derivative_at_half()


@dataclass(frozen=True)
class DelaySpec:
    n: int
    k: float

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise ConfigError("delay.n", "must be a nonnegative integer")
        if not (isinstance(self.k, (int, float)) and math.isfinite(self.k) and self.k > 0):
            raise ConfigError("delay.k", "must be a positive real")


CONFIG_KEYS = ("n_agents", "gain", "delay", "horizon", "seed", "sample_dt")


@dataclass(frozen=True)
class ModelConfig:
    """Model parameters shared by the simulators and the mean-field solvers.

    ``run`` holds free-form per-command settings (initial magnetization,
    replica counts, sweep lists) so a recorded ``run.json`` can be fed back
    verbatim.
    """

    n_agents: int
    gain: GainFunction
    delay: Optional[DelaySpec] = None
    horizon: float = 100.0
    seed: int = 0
    sample_dt: float = 0.1
    run: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.n_agents
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
            raise ConfigError("n_agents", "must be an integer >= 2")
        if not isinstance(self.gain, GainFunction):
            raise ConfigError("gain", "expected a GainFunction")
        for name in ("horizon", "sample_dt"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise ConfigError(name, "must be a positive real")
        s = self.seed
        if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or not 0 <= s < 2**64:
            raise ConfigError("seed", "must be an integer in [0, 2**64)")

    @property
    def N(self) -> int:
        return self.n_agents

    def replace(self, **changes) -> "ModelConfig":
        d = {name: getattr(self, name) for name in CONFIG_KEYS}
        d["run"] = dict(self.run)
        d.update(changes)
        return ModelConfig(**d)

    def to_dict(self) -> dict:
        d = {
            "n_agents": int(self.n_agents),
            "gain": self.gain.to_dict(),
            "delay": None if self.delay is None else {"n": int(self.delay.n), "k": float(self.delay.k)},
            "horizon": float(self.horizon),
            "seed": int(self.seed),
            "sample_dt": float(self.sample_dt),
        }
        if self.run:
            d["run"] = dict(self.run)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        allowed = set(CONFIG_KEYS) | {"run", "meta"}
        extra = sorted(set(d) - allowed)
        if extra:
            raise ConfigError(extra[0], "unknown key")
        for key in ("n_agents", "gain"):
            if key not in d:
                raise ConfigError(key, "missing")
        delay = d.get("delay")
        if delay is not None:
            if not isinstance(delay, dict):
                raise ConfigError("delay", "expected {n, k} or null")
            extra = sorted(set(delay) - {"n", "k"})
            if extra:
                raise ConfigError(f"delay.{extra[0]}", "unknown key")
            if "n" not in delay or "k" not in delay:
                raise ConfigError("delay", "needs both n and k")
            delay = DelaySpec(delay["n"], delay["k"])
        run = d.get("run") or {}
        if not isinstance(run, dict):
            raise ConfigError("run", "expected an object")
        kwargs = {k: d[k] for k in ("horizon", "seed", "sample_dt") if k in d}
        return cls(
            n_agents=d["n_agents"],
            gain=GainFunction.from_dict(d["gain"]),
            delay=delay,
            run=dict(run),
            **kwargs,
        )

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> ModelConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    return ModelConfig.from_dict(data)

