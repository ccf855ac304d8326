"""Replica ensembles and the statistical studies built on them.

Replica ``r`` of swept value number ``v`` draws from the stream keyed by
``(seed, v, r)``, so every summary is a deterministic function of the
configuration and the seed regardless of how the work is scheduled.
"""
from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import meanfield, microsim
from .bifurcation import find_hopf_k, slope_to_c
from .gain import GainFunction, ModelConfig

__all__ = [
    "STATISTICS",
    "SweepSpec",
    "SweepResult",
    "stream",
    "parallel_map",
    "summarize",
    "kurtz_error",
    "Occupation",
    "occupation",
    "occupation_near_half",
    "AbsorptionScaling",
    "absorption_scaling",
    "ChaosStats",
    "chaos_correlation",
    "frozen_rate_control",
    "BifurcationSweep",
    "k_sweep_bifurcation",
    "moving_average",
    "micro_threshold",
    "run_sweep",
    "occupation_study",
]

STATISTICS = ("kurtz_error", "cycle_amplitude", "absorption_time", "occupation", "pair_correlation")
SWEEPABLE = ("k", "N", "m0", "a")


def stream(seed: int, value_index: int, replica: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed), int(value_index), int(replica)]))
    )


def default_jobs() -> int:
    return os.cpu_count() or 1


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Ordered map; ``jobs > 1`` fans out to worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


@dataclass
class SweepSpec:
    base: ModelConfig
    parameter: str
    values: list
    replicas: int
    horizon: float
    statistic: str

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.parameter!r}")
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")
        if not self.values or list(self.values) != sorted(self.values):
            raise ValueError("sweep values must be nonempty and sorted")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")


def summarize(values, censored=None) -> dict:
    v = np.asarray(values, dtype=float)
    c = np.zeros(v.size, bool) if censored is None else np.asarray(censored, bool)
    n = v.size
    return {
        "n": int(n),
        "mean": float(v.mean()) if n else math.nan,
        "median": float(np.median(v)) if n else math.nan,
        "se": float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
        "censor_rate": float(c.mean()) if n else math.nan,
        # a mean over censored observations only bounds the true mean from below
        "lower_bound": bool(c.any()),
    }


@dataclass
class SweepResult:
    parameter: str
    statistic: str
    values: list
    summaries: list
    raw: Optional[list] = None
    censored: Optional[list] = None
    config_hash: str = ""
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def column(self, key: str) -> np.ndarray:
        return np.array([s[key] for s in self.summaries], dtype=float)

    def recompute(self) -> list:
        if self.raw is None:
            raise ValueError("raw values were not retained")
        cens = self.censored or [None] * len(self.raw)
        return [summarize(r, c) for r, c in zip(self.raw, cens)]

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        keys = ["n", "mean", "median", "se", "censor_rate", "lower_bound"]
        buf.write(",".join([self.parameter] + keys) + "\n")
        for v, s in zip(self.values, self.summaries):
            cells = [format(v, ".17g")] + [
                str(int(s[k])) if k in ("n", "lower_bound") else format(s[k], ".17g") for k in keys
            ]
            buf.write(",".join(cells) + "\n")
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def sidecar(self) -> dict:
        d = {
            "parameter": self.parameter,
            "statistic": self.statistic,
            "values": list(self.values),
            "summaries": self.summaries,
            "config_hash": self.config_hash,
            "seed": int(self.seed),
            "extra": self.extra,
        }
        if self.raw is not None:
            d["raw"] = [list(map(float, r)) for r in self.raw]
        if self.censored is not None:
            d["censored"] = [list(map(bool, c)) for c in self.censored]
        return d

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n"


def _grid_m0(m0: float, N: int) -> float:
    """Nearest point of {0, 1/N, ..., 1}."""
    return round(m0 * N) / N


# ------------------------------------------------------------------ Kurtz

def _reference_path(cfg: ModelConfig, m0: float, T: float, grid: np.ndarray) -> np.ndarray:
    sub = max(1, math.ceil(cfg.sample_dt / meanfield.default_dt(None if cfg.delay is None else cfg.delay.k)))
    dt = cfg.sample_dt / sub
    if cfg.delay is None:
        path = meanfield.solve(cfg.gain, m0, T, dt=dt)
    else:
        path = meanfield.solve(cfg.gain, m0, T, dt=dt, n=cfg.delay.n, k=cfg.delay.k)
    return np.interp(grid, path.times, path.m)


def _kurtz_task(item):
    cfg, m0, ref, vi, r = item
    rng = stream(cfg.seed, vi, r)
    if cfg.delay is None:
        log = microsim.simulate_no_delay(cfg, m0, rng=rng)
    else:
        log = microsim.simulate_delay(cfg, m0, rng=rng)
    return float(np.max(np.abs(log.m - ref)))


def kurtz_error(cfg: ModelConfig, m0: float, T: float, N_list, replicas: int, jobs: int = 1) -> SweepResult:
    """Per N, the replica distribution of sup_t |m^N(t) - m(t)| on the sample grid."""
    N_list = sorted(N_list)
    raw = []
    for vi, N in enumerate(N_list):
        c = cfg.replace(n_agents=int(N), horizon=float(T))
        m0N = _grid_m0(m0, N)
        grid = microsim.sample_grid(T, c.sample_dt)
        ref = _reference_path(c, m0N, T, grid)
        raw.append(parallel_map(_kurtz_task, [(c, m0N, ref, vi, r) for r in range(replicas)], jobs))
    return SweepResult(
        "N", "kurtz_error", list(N_list), [summarize(r) for r in raw], raw=raw,
        config_hash=cfg.config_hash(), seed=cfg.seed, extra={"m0": m0, "T": T},
    )


# ------------------------------------------------------------- occupation

@dataclass
class Occupation:
    entered: bool
    entry_time: Optional[float]
    fraction: float
    max_after: float
    min_after: float
    absorbed: bool = False
    final_m: float = math.nan


def occupation(cfg: ModelConfig, m0: float, window, T: float, replica: int = 0,
               t_watch: float = math.inf, rng=None) -> Occupation:
    """First entry into ``window`` and the fraction of the remaining time spent inside."""
    if cfg.delay is not None:
        raise ValueError("occupation statistics use the undelayed chain")
    lo, hi = window
    log = microsim.simulate_no_delay(
        cfg, _grid_m0(m0, cfg.n_agents), replica, window=(lo, hi), t_watch=t_watch,
        horizon=T, grid=np.array([T]), rng=rng,
    )
    entry = log.stats["entry_time"]
    tail = (log.stats["max_after"], log.stats["min_after"], log.absorbed, float(log.m[-1]))
    if entry is None:
        return Occupation(False, None, 0.0, *tail)
    span = T - entry
    frac = 1.0 if span <= 0 else log.stats["occupied_time"] / span
    return Occupation(True, entry, frac, *tail)


def occupation_near_half(cfg: ModelConfig, m0: float, eps: float, T: float, replica: int = 0,
                         rng=None) -> Occupation:
    if cfg.gain.monotonicity != "decreasing":
        raise ValueError("occupation near 1/2 needs a decreasing phi")
    return occupation(cfg, m0, (0.5 - eps, 0.5 + eps), T, replica, rng=rng)


def _occ_task(item):
    cfg, m0, window, T, t_watch, r = item
    return occupation(cfg, m0, window, T, t_watch=t_watch, rng=stream(cfg.seed, 0, r))


def occupation_study(cfg: ModelConfig, m0: float, window, T: float, replicas: int,
                     t_watch: float = math.inf, jobs: int = 1) -> list:
    items = [(cfg, m0, tuple(window), T, t_watch, r) for r in range(replicas)]
    return parallel_map(_occ_task, items, jobs)


# -------------------------------------------------------------- absorption

@dataclass
class AbsorptionScaling:
    result: SweepResult
    exp_slope: float
    exp_rss: float
    power_slope: float
    power_rss: float
    preferred: str
    all_censored: list


def _abs_task(item):
    cfg, m0, t_max, vi, r = item
    log = microsim.simulate_no_delay(cfg, m0, horizon=t_max, grid=np.array([t_max]), rng=stream(cfg.seed, vi, r))
    if log.absorbed:
        return log.absorption_time, False, float(log.m[-1])
    return t_max, True, float(log.m[-1])


def absorption_scaling(gain: GainFunction, N_list, replicas: int, t_max: float, m0: float = 0.5,
                       seed: int = 0, jobs: int = 1) -> AbsorptionScaling:
    """Mean absorption time versus N with exponential and power-law fits of log tau."""
    N_list = sorted(int(N) for N in N_list)
    raw, cens, finals = [], [], []
    for vi, N in enumerate(N_list):
        cfg = ModelConfig(N, gain, horizon=float(t_max), seed=seed, sample_dt=float(t_max))
        out = parallel_map(_abs_task, [(cfg, _grid_m0(m0, N), t_max, vi, r) for r in range(replicas)], jobs)
        raw.append([o[0] for o in out])
        cens.append([o[1] for o in out])
        finals.append([o[2] for o in out])
    summaries = [summarize(r, c) for r, c in zip(raw, cens)]
    N_arr = np.array(N_list, float)
    y = np.log([s["mean"] for s in summaries])
    exp_fit = np.polyfit(N_arr, y, 1, full=True)
    pow_fit = np.polyfit(np.log(N_arr), y, 1, full=True)
    exp_rss = float(exp_fit[1][0]) if exp_fit[1].size else 0.0
    pow_rss = float(pow_fit[1][0]) if pow_fit[1].size else 0.0
    res = SweepResult(
        "N", "absorption_time", N_list, summaries, raw=raw, censored=cens,
        config_hash=ModelConfig(N_list[0], gain, seed=seed).config_hash(), seed=seed,
        extra={"m0": m0, "t_max": t_max, "final_m": finals},
    )
    return AbsorptionScaling(
        result=res,
        exp_slope=float(exp_fit[0][0]),
        exp_rss=exp_rss,
        power_slope=float(pow_fit[0][0]),
        power_rss=pow_rss,
        preferred="exponential" if exp_rss < pow_rss else "power",
        all_censored=[bool(all(c)) for c in cens],
    )


# ------------------------------------------------------------------ chaos

@dataclass
class ChaosStats:
    N: int
    times: tuple
    tagged_cov: tuple  # agents 0 and 1, at each time
    pair_covs: np.ndarray  # disjoint pairs (2i, 2i+1) at the final time
    pair_cov_median: float
    pair_cov_se: float
    tv_distance: float
    replicas: int


def _initial_sigma(rng, N, m0, init):
    if init == "bernoulli":
        return (rng.random(N) < m0).astype(np.int8)
    sigma = np.zeros(N, np.int8)
    sigma[: round(m0 * N)] = 1
    return rng.permutation(sigma)


def _chaos_task(item):
    cfg, m0, grid, init, r = item
    rng = stream(cfg.seed, cfg.n_agents, r)
    sigma0 = _initial_sigma(rng, cfg.n_agents, m0, init)
    run = microsim.simulate_agents(cfg, sigma0, rng=rng, grid=grid)
    return run.sigma[1:]


def _tv_to_product(states: np.ndarray) -> float:
    """TV distance between the empirical law of the rows and the product of its marginals."""
    R, h = states.shape
    codes = states.astype(np.int64) @ (1 << np.arange(h))
    joint = np.bincount(codes, minlength=2 ** h) / R
    p1 = states.mean(axis=0)
    tv = 0.0
    for code in range(2 ** h):
        bits = (code >> np.arange(h)) & 1
        prod = np.prod(np.where(bits == 1, p1, 1 - p1))
        tv += abs(joint[code] - prod)
    return 0.5 * tv


def chaos_correlation(cfg: ModelConfig, h: int, T: float, replicas: int, m0: float = 0.5,
                      init: str = "bernoulli", jobs: int = 1) -> ChaosStats:
    """Pair covariances and h-marginal dependence of tagged agents at T/2 and T.

    ``init="bernoulli"`` starts agents i.i.d.; ``"exact"`` places round(m0 N)
    ones at uniformly random positions.
    """
    N = cfg.n_agents
    if not 1 <= h <= 4 or h > N:
        raise ValueError("need 1 <= h <= min(4, N)")
    grid = np.array([0.0, T / 2, T])
    c = cfg.replace(horizon=float(T))
    snaps = np.array(parallel_map(_chaos_task, [(c, m0, grid, init, r) for r in range(replicas)], jobs))
    # snaps: (replicas, 2 times, N)
    def cov(x, y):
        return float(np.mean(x * y) - np.mean(x) * np.mean(y))

    tagged = tuple(cov(snaps[:, t, 0].astype(float), snaps[:, t, 1].astype(float)) for t in range(2))
    final = snaps[:, 1, :].astype(float)
    pairs = np.array([cov(final[:, 2 * i], final[:, 2 * i + 1]) for i in range(N // 2)])
    med = float(np.median(pairs))
    se = float(1.2533 * pairs.std(ddof=1) / math.sqrt(pairs.size)) if pairs.size > 1 else math.nan
    tv = _tv_to_product(snaps[:, 1, :h])
    return ChaosStats(N, (T / 2, T), tagged, pairs, med, se, tv, replicas)


def frozen_rate_control(N: int, gain: GainFunction, T: float, replicas: int, m_frozen: float = 0.5,
                        seed: int = 0) -> tuple:
    """Covariance of two agents flipping independently at rates frozen at ``m_frozen``.

    Returns (covariance, standard error); a sanity baseline with no interaction.
    """
    up = m_frozen * float(gain(m_frozen))
    down = (1 - m_frozen) * float(gain(1 - m_frozen))
    total = up + down
    pi1 = up / total
    rng = stream(seed, N, 0)
    sigma0 = (rng.random((replicas, 2)) < 0.5).astype(float)
    # two-state chain: P(sigma_T = 1 | sigma_0) = pi1 + (sigma_0 - pi1) e^{-total T}
    p1 = pi1 + (sigma0 - pi1) * math.exp(-total * T)
    sigma = (rng.random((replicas, 2)) < p1).astype(float)
    x, y = sigma[:, 0], sigma[:, 1]
    cov = float(np.mean(x * y) - x.mean() * y.mean())
    se = float(np.std((x - x.mean()) * (y - y.mean()), ddof=1) / math.sqrt(replicas))
    return cov, se


# ------------------------------------------------------------ k sweeps

@dataclass
class BifurcationSweep:
    k: list
    amplitude: list
    period: list
    oscillating: list
    onset: Optional[float]
    bracket: Optional[tuple]
    k_star: Optional[float]
    contains_k_star: bool
    mode: str
    threshold: float
    paths: list = field(default_factory=list, repr=False)

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        buf.write("k,amplitude,period,oscillating\n")
        for k, a, p, o in zip(self.k, self.amplitude, self.period, self.oscillating):
            ps = "" if p is None else format(p, ".17g")
            buf.write(f"{format(k, '.17g')},{format(a, '.17g')},{ps},{int(o)}\n")
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def micro_threshold(N: int) -> float:
    """Amplitude threshold for smoothed finite-N paths.

    Fluctuations around x* scale like N^{-1/2}; at N = 10^4 a pilot gave
    smoothed amplitudes near 0.05 on the stable side of k* and 0.4 on the
    oscillating side, so 10/sqrt(N) = 0.1 separates them.
    """
    return 10.0 / math.sqrt(N)


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 samples average what is available."""
    x = np.asarray(x, dtype=float)
    if window <= 1:
        return x.copy()
    c = np.cumsum(np.concatenate([[0.0], x]))
    out = np.empty_like(x)
    idx = np.arange(x.size)
    lo = np.maximum(0, idx - window + 1)
    out[:] = (c[idx + 1] - c[lo]) / (idx + 1 - lo)
    return out


def _sweep_task(item):
    cfg, k, mode, m0, transient, threshold, vi, burn_in = item
    c = cfg.replace(delay=type(cfg.delay)(cfg.delay.n, float(k)))
    if mode == "macro":
        path = meanfield.solve(c.gain, m0, c.horizon, n=c.delay.n, k=float(k))
        metrics = meanfield.cycle_metrics(path, transient, threshold)
        return metrics, (path.times, path.m)
    log = microsim.simulate_delay(c, _grid_m0(m0, c.n_agents), burn_in=burn_in, rng=stream(c.seed, vi, 0))
    w = max(1, round(1.0 / (k * c.sample_dt)))
    smooth = moving_average(log.m, w)
    metrics = meanfield.cycle_metrics(smooth, transient, threshold, times=log.t)
    return metrics, (log.t, log.m)


def k_sweep_bifurcation(cfg: ModelConfig, k_list, mode: str = "macro", m0: float = 0.3,
                        transient_fraction: float = 0.5, threshold: Optional[float] = None,
                        burn_in: float = 0.0, jobs: int = 1, keep_paths: bool = False) -> BifurcationSweep:
    """Cycle amplitude of m versus the kernel rate k, and the empirical onset.

    In micro mode the magnetization is smoothed by a moving average over 1/k
    time units before the amplitude is measured. The default threshold is
    1e-3 in macro mode and ``micro_threshold(N)`` in micro mode, because
    finite-N jitter survives the smoothing.
    """
    if cfg.delay is None:
        raise ValueError("k sweep needs a delay block")
    if mode not in ("macro", "micro"):
        raise ValueError("mode must be 'macro' or 'micro'")
    if cfg.gain.monotonicity != "decreasing":
        raise ValueError("k sweep is defined for decreasing phi")
    k_list = sorted(float(k) for k in k_list)
    if threshold is None:
        threshold = meanfield.AMPLITUDE_THRESHOLD if mode == "macro" else micro_threshold(cfg.n_agents)
    items = [(cfg, k, mode, m0, transient_fraction, threshold, vi, burn_in) for vi, k in enumerate(k_list)]
    out = parallel_map(_sweep_task, items, jobs)
    metrics = [o[0] for o in out]
    osc = [m.oscillating for m in metrics]
    onset = max((k for k, o in zip(k_list, osc) if o), default=None)
    bracket = None
    if onset is not None:
        i = k_list.index(onset)
        bracket = (onset, k_list[i + 1] if i + 1 < len(k_list) else math.inf)
    cfg.gain.require_smooth_at_half()
    c = slope_to_c(cfg.gain.derivative_at_half())
    k_star = find_hopf_k(c, cfg.delay.n).k_star if c < 0 else None
    contains = bool(bracket is not None and k_star is not None and bracket[0] < k_star <= bracket[1])
    return BifurcationSweep(
        k=k_list,
        amplitude=[m.amplitude for m in metrics],
        period=[m.period for m in metrics],
        oscillating=osc,
        onset=onset,
        bracket=bracket,
        k_star=k_star,
        contains_k_star=contains,
        mode=mode,
        threshold=threshold,
        paths=[o[1] for o in out] if keep_paths else [],
    )


# ------------------------------------------------------- generic sweeps

def _apply(base: ModelConfig, parameter: str, value):
    """Config and initial magnetization for one swept value."""
    m0 = float(base.run.get("m0", 0.5))
    if parameter == "k":
        if base.delay is None:
            raise ValueError("sweeping k needs a delay block")
        return base.replace(delay=type(base.delay)(base.delay.n, float(value))), m0
    if parameter == "N":
        return base.replace(n_agents=int(value)), m0
    if parameter == "m0":
        return base, float(value)
    if base.gain.kind != "linear":
        raise ValueError("sweeping a needs a linear gain")
    gain = GainFunction.linear(-float(value), base.gain.params[1])
    return base.replace(gain=gain), m0


def _replica_value(item):
    """One replica of one swept value: (value, censored)."""
    spec_stat, cfg, m0, horizon, vi, r = item
    rng = stream(cfg.seed, vi, r)
    m0 = _grid_m0(m0, cfg.n_agents)
    if spec_stat == "kurtz_error":
        c = cfg.replace(horizon=horizon)
        grid = microsim.sample_grid(horizon, c.sample_dt)
        ref = _reference_path(c, m0, horizon, grid)
        log = (microsim.simulate_no_delay(c, m0, rng=rng) if c.delay is None
               else microsim.simulate_delay(c, m0, rng=rng))
        return float(np.max(np.abs(log.m - ref))), False
    if spec_stat == "absorption_time":
        log = microsim.simulate_no_delay(cfg, m0, horizon=horizon, grid=np.array([horizon]), rng=rng)
        return (log.absorption_time, False) if log.absorbed else (horizon, True)
    if spec_stat == "occupation":
        eps = float(cfg.run.get("eps", 0.1))
        occ = occupation(cfg, m0, (0.5 - eps, 0.5 + eps), horizon, rng=rng)
        return occ.fraction, not occ.entered
    if spec_stat == "cycle_amplitude":
        c = cfg.replace(horizon=horizon)
        log = microsim.simulate_delay(c, m0, rng=rng)
        w = max(1, round(1.0 / (c.delay.k * c.sample_dt)))
        metrics = meanfield.cycle_metrics(moving_average(log.m, w), times=log.t)
        return metrics.amplitude, False
    # pair_correlation: product of the two tagged agents' states centred at 1/2,
    # an unbiased covariance estimate whenever the ensemble mean is 1/2
    sigma0 = _initial_sigma(rng, cfg.n_agents, m0, "bernoulli")
    run = microsim.simulate_agents(cfg, sigma0, rng=rng, grid=np.array([0.0, horizon]))
    s = run.sigma[-1].astype(float)
    return float((s[0] - 0.5) * (s[1] - 0.5)), False


def run_sweep(spec: SweepSpec, jobs: int = 1, keep_raw: bool = True) -> SweepResult:
    """Evaluate ``spec.statistic`` over every swept value and replica."""
    raw, cens = [], []
    for vi, value in enumerate(spec.values):
        cfg, m0 = _apply(spec.base, spec.parameter, value)
        items = [(spec.statistic, cfg, m0, float(spec.horizon), vi, r) for r in range(spec.replicas)]
        out = parallel_map(_replica_value, items, jobs)
        raw.append([o[0] for o in out])
        cens.append([o[1] for o in out])
    summaries = [summarize(r, c) for r, c in zip(raw, cens)]
    return SweepResult(
        spec.parameter, spec.statistic, list(spec.values), summaries,
        raw=raw if keep_raw else None, censored=cens if keep_raw else None,
        config_hash=spec.base.config_hash(), seed=spec.base.seed,
        extra={"replicas": spec.replicas, "horizon": spec.horizon},
    )
