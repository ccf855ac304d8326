"""Macroscopic (N -> infinity) dynamics.

State vectors use the layout ``[m, gamma_0..gamma_n, eta_0..eta_n]``; the
undelayed system is the one-component vector ``[m]``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .gain import GainFunction

__all__ = [
    "IntegrationError",
    "MacroState",
    "MacroPath",
    "EquilibriumReport",
    "CycleMetrics",
    "rhs_no_delay",
    "rhs_delay",
    "integrate",
    "solve",
    "default_dt",
    "initial_state",
    "equilibria_no_delay",
    "equilibria_delay",
    "cycle_metrics",
    "AMPLITUDE_THRESHOLD",
]

AMPLITUDE_THRESHOLD = 1e-3
EQ_GRID = 10_000
EQ_TOL = 1e-12
FD_STEP = 1e-6
HYPERBOLIC_TOL = 1e-9


class IntegrationError(RuntimeError):
    pass


@dataclass
class MacroState:
    m: float
    gamma: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None

    @property
    def n(self) -> Optional[int]:
        return None if self.gamma is None else len(self.gamma) - 1

    def to_vector(self) -> np.ndarray:
        if self.gamma is None:
            return np.array([self.m], dtype=float)
        return np.concatenate([[self.m], self.gamma, self.eta]).astype(float)

    @classmethod
    def from_vector(cls, y) -> "MacroState":
        y = np.asarray(y, dtype=float)
        if y.size == 1:
            return cls(float(y[0]))
        n1 = (y.size - 1) // 2
        return cls(float(y[0]), y[1 : n1 + 1].copy(), y[n1 + 1 :].copy())


def initial_state(m0: float, n: Optional[int] = None, gamma=None, eta=None) -> MacroState:
    """Initial macro state; the delayed default is an empty history (gamma = eta = 0)."""
    if n is None:
        return MacroState(float(m0))
    g = np.zeros(n + 1) if gamma is None else np.asarray(gamma, dtype=float)
    e = np.zeros(n + 1) if eta is None else np.asarray(eta, dtype=float)
    return MacroState(float(m0), g, e)


@dataclass
class MacroPath:
    times: np.ndarray
    states: np.ndarray
    dt: float
    method: str = "rk4"

    @property
    def m(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def n(self) -> Optional[int]:
        dim = self.states.shape[1]
        return None if dim == 1 else (dim - 3) // 2

    @property
    def gamma(self) -> np.ndarray:
        n = self.n
        return self.states[:, 1 : n + 2]

    @property
    def eta(self) -> np.ndarray:
        n = self.n
        return self.states[:, n + 2 :]

    def state(self, i: int) -> MacroState:
        return MacroState.from_vector(self.states[i])

    def to_csv(self, fh=None) -> str:
        n = self.n
        cols = ["t", "m"]
        if n is not None:
            cols += [f"gamma_{j}" for j in range(n + 1)] + [f"eta_{j}" for j in range(n + 1)]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        data = np.column_stack([self.times, self.states])
        for row in data:
            buf.write(",".join(format(v, ".17g") for v in row) + "\n")
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def rhs_no_delay(g: GainFunction, m: float) -> float:
    return float(m * (1.0 - m) * (g(m) - g(1.0 - m)))


def rhs_delay(g: GainFunction, n: int, k: float, s) -> np.ndarray:
    """Vector field of the delayed system; accepts a MacroState or a flat vector."""
    y = s.to_vector() if isinstance(s, MacroState) else np.asarray(s, dtype=float)
    m = y[0]
    gamma = y[1 : n + 2]
    eta = y[n + 2 :]
    d = np.empty_like(y)
    d[0] = m * (1.0 - m) * (g(gamma[n]) - g(eta[n]))
    d[1 : n + 2] = k * (np.concatenate([[m], gamma[:-1]]) - gamma)
    d[n + 2 :] = k * (np.concatenate([[1.0 - m], eta[:-1]]) - eta)
    return d


def default_dt(k: Optional[float] = None) -> float:
    if k is None:
        return 1e-2
    return min(1e-2, 0.1 / k)


def _n_steps(T: float, dt: float) -> int:
    if dt <= 0 or T <= 0:
        raise ValueError("T and dt must be positive")
    return int(math.ceil(T / dt - 1e-9))


def _clamp(y: np.ndarray) -> np.ndarray:
    lo, hi = -_kernels.BLOWUP_TOL, 1.0 + _kernels.BLOWUP_TOL
    if not np.all(np.isfinite(y)) or np.any(y < lo) or np.any(y > hi):
        raise IntegrationError(f"state left [0, 1]: {y}")
    y = np.where((y < 0) & (y > -_kernels.CLAMP_TOL), 0.0, y)
    return np.where((y > 1) & (y < 1 + _kernels.CLAMP_TOL), 1.0, y)


def integrate(rhs: Callable, initial, T: float, dt: float) -> MacroPath:
    """Classical fixed-step RK4 for an arbitrary vector field ``rhs(y)``.

    Components overshooting [0, 1] by less than 1e-9 are clamped back;
    leaving [-1e-6, 1 + 1e-6] raises IntegrationError.
    """
    y = initial.to_vector() if isinstance(initial, MacroState) else np.atleast_1d(np.asarray(initial, dtype=float))
    steps = _n_steps(T, dt)
    out = np.empty((steps + 1, y.size))
    out[0] = y
    for i in range(steps):
        k1 = np.asarray(rhs(y), dtype=float)
        k2 = np.asarray(rhs(y + 0.5 * dt * k1), dtype=float)
        k3 = np.asarray(rhs(y + 0.5 * dt * k2), dtype=float)
        k4 = np.asarray(rhs(y + dt * k3), dtype=float)
        y = _clamp(y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        out[i + 1] = y
    return MacroPath(np.arange(steps + 1) * dt, out, dt, "rk4")


def solve(
    g: GainFunction,
    initial,
    T: float,
    dt: Optional[float] = None,
    n: Optional[int] = None,
    k: Optional[float] = None,
) -> MacroPath:
    """Compiled RK4 for the undelayed (n is None) or delayed system.

    ``initial`` may be a scalar m0 (delayed runs then start from an empty
    history), a MacroState or a flat vector.
    """
    if np.isscalar(initial):
        initial = initial_state(initial, n)
    y0 = initial.to_vector() if isinstance(initial, MacroState) else np.asarray(initial, dtype=float)
    expected = 1 if n is None else 2 * n + 3
    if y0.size != expected:
        raise ValueError(f"initial state has {y0.size} components, expected {expected}")
    if n is not None and (k is None or k <= 0):
        raise ValueError("delayed system needs k > 0")
    if dt is None:
        dt = default_dt(k)
    steps = _n_steps(T, dt)
    kind, p, xs, ys = g.kernel_args()
    states, status = _kernels.rk4_path(
        kind, p, xs, ys, -1 if n is None else int(n), 0.0 if k is None else float(k), y0.copy(), float(dt), steps
    )
    if status != _kernels.STATUS_OK:
        raise IntegrationError(f"integration left [0, 1] near t={(len(states)) * dt:.6g}")
    return MacroPath(np.arange(steps + 1) * dt, states, dt, "rk4")


# ------------------------------------------------------------- equilibria

@dataclass
class EquilibriumReport:
    points: list = field(default_factory=list)  # (state, classification, leading real part)
    degenerate: bool = False

    def classification(self) -> dict:
        return {round(float(np.atleast_1d(s)[0]), 12): c for s, c, _ in self.points}


def _classify(re: float) -> str:
    if re < -HYPERBOLIC_TOL:
        return "stable"
    if re > HYPERBOLIC_TOL:
        return "unstable"
    return "nonhyperbolic"


def _bisect(f, lo: float, hi: float, tol: float = EQ_TOL) -> float:
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def equilibria_no_delay(g: GainFunction) -> EquilibriumReport:
    diff = lambda x: float(g(x) - g(1.0 - x))  # noqa: E731
    xs = np.linspace(0.0, 1.0, EQ_GRID + 1)
    vals = g(xs) - g(1.0 - xs)
    if np.all(np.abs(vals) <= 1e-15):
        pts = [(0.0, "nonhyperbolic", 0.0), (1.0, "nonhyperbolic", 0.0)]
        return EquilibriumReport(pts, degenerate=True)

    roots = []
    for i in range(EQ_GRID):
        if i > 0 and vals[i] == 0.0:
            roots.append(float(xs[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(_bisect(diff, float(xs[i]), float(xs[i + 1])))

    def slope(x):
        h = FD_STEP
        lo, hi = max(x - h, 0.0), min(x + h, 1.0)
        return (rhs_no_delay(g, hi) - rhs_no_delay(g, lo)) / (hi - lo)

    points = []
    for x in [0.0] + roots + [1.0]:
        s = slope(x)
        points.append((x, _classify(s), s))
    return EquilibriumReport(points)


def _fd_jacobian(f, y, h=FD_STEP):
    dim = y.size
    J = np.empty((dim, dim))
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        J[:, i] = (f(y + e) - f(y - e)) / (2 * h)
    return J


def equilibria_delay(g: GainFunction, n: int, k: float) -> EquilibriumReport:
    """The three equilibria x0, x1, x* of the delayed system (strictly monotone phi)."""
    x0 = np.concatenate([[0.0], np.zeros(n + 1), np.ones(n + 1)])
    x1 = np.concatenate([[1.0], np.ones(n + 1), np.zeros(n + 1)])
    xs = np.full(2 * n + 3, 0.5)
    f = lambda y: rhs_delay(g, n, k, y)  # noqa: E731
    points = []
    for y in (x0, xs, x1):
        lead = float(np.max(np.linalg.eigvals(_fd_jacobian(f, y)).real))
        points.append((y, _classify(lead), lead))
    return EquilibriumReport(points)


# --------------------------------------------------------------- cycles

@dataclass
class CycleMetrics:
    amplitude: float
    period: Optional[float]
    oscillating: bool
    mean: float = 0.5


def cycle_metrics(
    path,
    transient_fraction: float = 0.5,
    threshold: float = AMPLITUDE_THRESHOLD,
    times=None,
) -> CycleMetrics:
    """Amplitude and period of the magnetization after discarding a transient.

    ``path`` is a MacroPath, or a plain array of m samples with ``times``.
    """
    if isinstance(path, MacroPath):
        t, m = path.times, path.m
    else:
        m = np.asarray(path, dtype=float)
        t = np.arange(m.size, dtype=float) if times is None else np.asarray(times, dtype=float)
    start = int(math.floor(transient_fraction * m.size))
    t, m = t[start:], m[start:]
    if m.size < 100:
        raise ValueError(f"path too short after transient cut ({m.size} < 100 samples)")
    amplitude = 0.5 * float(m.max() - m.min())
    mean = float(m.mean())
    above = m >= mean
    ups = np.nonzero(~above[:-1] & above[1:])[0]
    period = None
    if ups.size >= 2:
        # linear interpolation of the crossing instants
        frac = (mean - m[ups]) / (m[ups + 1] - m[ups])
        tc = t[ups] + frac * (t[ups + 1] - t[ups])
        period = float(np.mean(np.diff(tc)))
    return CycleMetrics(amplitude, period, amplitude > threshold, mean)
