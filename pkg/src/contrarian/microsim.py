"""Exact stochastic simulation of the N-agent process.

Three simulators share one random-stream convention: replica ``r`` of a run
with seed ``s`` draws from a Philox generator keyed by ``SeedSequence([s, r])``,
so replicas are independent, reproducible and order-free.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .gain import ConfigError, ModelConfig

__all__ = [
    "AGENT_CAP",
    "MicroState",
    "JumpLog",
    "AgentRun",
    "replica_rng",
    "sample_grid",
    "simulate_no_delay",
    "simulate_delay",
    "simulate",
    "advance_cascade",
    "simulate_agents",
    "absorption_time",
    "AbsorptionOutcome",
]

AGENT_CAP = 200


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replica)])))


def sample_grid(horizon: float, dt: float, start: float = 0.0) -> np.ndarray:
    """Output times start, start+dt, ... up to and including start+horizon."""
    n = int(math.floor(horizon / dt + 1e-9))
    grid = start + dt * np.arange(n + 1)
    if grid[-1] < start + horizon - 1e-9 * max(1.0, horizon):
        grid = np.append(grid, start + horizon)
    return grid


def _count_from_m(m0: float, N: int) -> int:
    j = round(m0 * N)
    if abs(m0 * N - j) > 1e-9 * N or not 0 <= j <= N:
        raise ValueError(f"m0={m0} is not on the grid {{0, 1/N, ..., 1}} for N={N}")
    return int(j)


@dataclass
class MicroState:
    count: int
    N: int
    gamma: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        if not 0 <= self.count <= self.N:
            raise ValueError("count must lie in 0..N")

    @property
    def m(self) -> float:
        return self.count / self.N

    @classmethod
    def empty_history(cls, m0: float, N: int, n: int) -> "MicroState":
        return cls(_count_from_m(m0, N), N, np.zeros(n + 1), np.zeros(n + 1))


@dataclass
class JumpLog:
    t: np.ndarray
    m: np.ndarray
    gamma_n: Optional[np.ndarray] = None
    eta_n: Optional[np.ndarray] = None
    jumps: int = 0
    proposed: int = 0
    absorbed: bool = False
    absorption_time: Optional[float] = None
    seed: int = 0
    replica: int = 0
    config_hash: str = ""
    final: Optional[MicroState] = None
    event_times: Optional[np.ndarray] = None
    event_counts: Optional[np.ndarray] = None
    stats: dict = field(default_factory=dict)

    @property
    def acceptance_ratio(self) -> float:
        return 1.0 if self.proposed == 0 else self.jumps / self.proposed

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        if self.gamma_n is None:
            buf.write("t,m\n")
            for row in zip(self.t, self.m):
                buf.write(",".join(format(v, ".17g") for v in row) + "\n")
        else:
            buf.write("t,m,gamma_n,eta_n\n")
            for row in zip(self.t, self.m, self.gamma_n, self.eta_n):
                buf.write(",".join(format(v, ".17g") for v in row) + "\n")
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def sidecar(self) -> dict:
        return {
            "jumps": int(self.jumps),
            "proposed": int(self.proposed),
            "acceptance_ratio": self.acceptance_ratio,
            "absorbed": bool(self.absorbed),
            "absorption_time": self.absorption_time,
            "seed": int(self.seed),
            "replica": int(self.replica),
            "config_hash": self.config_hash,
        }

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n"


def simulate_no_delay(
    cfg: ModelConfig,
    m0: float,
    replica: int = 0,
    window: Optional[tuple] = None,
    t_watch: float = math.inf,
    horizon: Optional[float] = None,
    grid: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> JumpLog:
    """Gillespie simulation of the magnetization birth-death chain.

    ``window=(lo, hi)`` additionally records the first entry time into
    [lo, hi] and the time spent inside afterwards (``stats``); ``t_watch``
    records the extreme values of m from that time on.
    """
    N = cfg.n_agents
    count = _count_from_m(m0, N)
    T = cfg.horizon if horizon is None else horizon
    if grid is None:
        grid = sample_grid(T, cfg.sample_dt) if math.isfinite(T) else np.zeros(1)
    lo, hi = window if window is not None else (math.inf, -math.inf)
    if rng is None:
        rng = replica_rng(cfg.seed, replica)
    kind, p, xs, ys = cfg.gain.kernel_args()
    out, jumps, t_abs, entry, occ, mx, mn = _kernels.birth_death(
        rng, count, N, kind, p, xs, ys, float(T), np.asarray(grid, float), float(lo), float(hi), float(t_watch)
    )
    stats = {"entry_time": None if entry < 0 else entry, "occupied_time": occ, "max_after": mx, "min_after": mn}
    return JumpLog(
        t=np.asarray(grid, float),
        m=out,
        jumps=jumps,
        proposed=jumps,
        absorbed=t_abs >= 0,
        absorption_time=None if t_abs < 0 else t_abs,
        seed=cfg.seed,
        replica=replica,
        config_hash=cfg.config_hash(),
        stats=stats,
    )


def _dominating_rate(cfg: ModelConfig) -> float:
    sup = cfg.gain.sup()
    if not (math.isfinite(sup) and sup > 0):
        raise ConfigError("gain", "sup phi must be finite and positive")
    # m(1-m) <= 1/4 for each of the two directions
    return 2.0 * cfg.n_agents * 0.25 * sup


def simulate_delay(
    cfg: ModelConfig,
    init: MicroState | float,
    replica: int = 0,
    burn_in: float = 0.0,
    log_events: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> JumpLog:
    """Thinning simulation of the delayed process.

    The output grid covers ``[burn_in, burn_in + horizon]`` in absolute time.
    """
    if cfg.delay is None:
        raise ConfigError("delay", "simulate_delay needs a delay block")
    n, k = cfg.delay.n, cfg.delay.k
    N = cfg.n_agents
    if not isinstance(init, MicroState):
        init = MicroState.empty_history(init, N, n)
    if init.N != N or init.gamma is None or len(init.gamma) != n + 1 or len(init.eta) != n + 1:
        raise ValueError("initial state does not match the configuration")
    gamma = np.array(init.gamma, dtype=float)
    eta = np.array(init.eta, dtype=float)
    if np.any((gamma < 0) | (gamma > 1) | (eta < 0) | (eta > 1)):
        raise ValueError("cascade components must lie in [0, 1]")
    lam = _dominating_rate(cfg)
    grid = sample_grid(cfg.horizon, cfg.sample_dt, start=burn_in)
    T = float(grid[-1])
    if rng is None:
        rng = replica_rng(cfg.seed, replica)
    kind, p, xs, ys = cfg.gain.kernel_args()
    m_out, g_out, e_out, proposed, accepted, t_abs, ev_t, ev_c = _kernels.thinning(
        rng, init.count, gamma, eta, N, float(k), kind, p, xs, ys, lam, T, grid, log_events
    )
    final_count = int(round(m_out[-1] * N))
    return JumpLog(
        t=grid,
        m=m_out,
        gamma_n=g_out,
        eta_n=e_out,
        jumps=accepted,
        proposed=proposed,
        absorbed=t_abs >= 0,
        absorption_time=None if t_abs < 0 else t_abs,
        seed=cfg.seed,
        replica=replica,
        config_hash=cfg.config_hash(),
        final=MicroState(final_count, N, gamma, eta, T),
        event_times=ev_t if log_events else None,
        event_counts=ev_c if log_events else None,
    )


def simulate(cfg: ModelConfig, m0: float, replica: int = 0, burn_in: float = 0.0) -> JumpLog:
    """Dispatch on the presence of a delay block."""
    if cfg.delay is None:
        return simulate_no_delay(cfg, m0, replica)
    return simulate_delay(cfg, m0, replica, burn_in=burn_in)


def advance_cascade(gamma, eta, m: float, k: float, dt: float):
    """Exact update of the Erlang cascade over ``dt`` with the input frozen at ``m``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    g = np.array(gamma, dtype=float)
    e = np.array(eta, dtype=float)
    _kernels.advance_cascade_inplace(g, e, float(m), float(k), float(dt))
    return g, e


@dataclass
class AgentRun:
    t: np.ndarray
    sigma: np.ndarray  # (grid points, N) snapshots
    event_times: np.ndarray
    event_agents: np.ndarray
    proposed: int
    absorption_time: Optional[float]

    @property
    def m(self) -> np.ndarray:
        return self.sigma.mean(axis=1)

    def jump_times(self, agent: int) -> np.ndarray:
        return self.event_times[self.event_agents == agent]


def simulate_agents(
    cfg: ModelConfig,
    sigma0,
    replica: int = 0,
    cap: int = AGENT_CAP,
    rng: Optional[np.random.Generator] = None,
    grid: Optional[np.ndarray] = None,
) -> AgentRun:
    """Agent-resolved simulation (small N) for propagation-of-chaos studies."""
    sigma = np.array(sigma0, dtype=np.int8)
    N = sigma.size
    if N > cap:
        raise ValueError(f"agent mode is capped at N={cap}, got {N}")
    if N != cfg.n_agents:
        raise ValueError("sigma0 length does not match n_agents")
    if np.any((sigma != 0) & (sigma != 1)):
        raise ValueError("sigma0 must be a 0/1 vector")
    if grid is None:
        grid = sample_grid(cfg.horizon, cfg.sample_dt)
    if rng is None:
        rng = replica_rng(cfg.seed, replica)
    kind, p, xs, ys = cfg.gain.kernel_args()
    if cfg.delay is None:
        n_delay, k, lam = -1, 0.0, 0.0
        gamma = np.zeros(1)
        eta = np.zeros(1)
    else:
        n_delay, k, lam = cfg.delay.n, float(cfg.delay.k), _dominating_rate(cfg)
        gamma = np.zeros(n_delay + 1)
        eta = np.zeros(n_delay + 1)
    snaps, ev_t, ev_a, proposed, t_abs = _kernels.agents(
        rng, sigma, n_delay, k, kind, p, xs, ys, lam, float(grid[-1]), np.asarray(grid, float), gamma, eta
    )
    return AgentRun(np.asarray(grid, float), snaps, ev_t, ev_a, proposed, None if t_abs < 0 else t_abs)


@dataclass
class AbsorptionOutcome:
    time: float
    censored: bool
    final_m: float


def absorption_time(cfg: ModelConfig, m0: float, t_max: float, replica: int = 0) -> AbsorptionOutcome:
    """Time to consensus, or censored at ``t_max``."""
    if cfg.delay is not None:
        raise ConfigError("delay", "absorption_time runs the undelayed chain")
    log = simulate_no_delay(cfg, m0, replica, horizon=t_max, grid=np.array([t_max]))
    if log.absorbed:
        return AbsorptionOutcome(log.absorption_time, False, float(log.m[-1]))
    return AbsorptionOutcome(t_max, True, float(log.m[-1]))
