"""Compiled inner loops. Gains arrive flattened as (kind, params, xs, ys)."""
import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BLOWUP = 1

CLAMP_TOL = 1e-9
BLOWUP_TOL = 1e-6


@njit(cache=True)
def phi_eval(kind, p, xs, ys, x):
    if kind == 0:
        return p[0] * x + p[1]
    if kind == 1:
        return -p[0] * math.tanh(p[1] * (x - 0.5)) + p[2]
    return np.interp(x, xs, ys)


# ---------------------------------------------------------------- mean field

@njit(cache=True)
def rhs_delay_into(kind, p, xs, ys, n, k, y, out):
    m = y[0]
    gn = y[n + 1]
    en = y[2 * n + 2]
    out[0] = m * (1.0 - m) * (phi_eval(kind, p, xs, ys, gn) - phi_eval(kind, p, xs, ys, en))
    out[1] = k * (m - y[1])
    out[n + 2] = k * (1.0 - m - y[n + 2])
    for j in range(1, n + 1):
        out[1 + j] = k * (y[j] - y[1 + j])
        out[n + 2 + j] = k * (y[n + 1 + j] - y[n + 2 + j])


@njit(cache=True)
def rhs_plain_into(kind, p, xs, ys, y, out):
    m = y[0]
    out[0] = m * (1.0 - m) * (phi_eval(kind, p, xs, ys, m) - phi_eval(kind, p, xs, ys, 1.0 - m))


@njit(cache=True)
def _clamp_row(y):
    for i in range(y.size):
        v = y[i]
        if v < -BLOWUP_TOL or v > 1.0 + BLOWUP_TOL or v != v:
            return False
        if v < 0.0 and v > -CLAMP_TOL:
            y[i] = 0.0
        elif v > 1.0 and v < 1.0 + CLAMP_TOL:
            y[i] = 1.0
    return True


@njit(cache=True)
def rk4_path(kind, p, xs, ys, n, k, y0, dt, nsteps):
    """Fixed-step RK4 for the plain (n < 0) or delayed system."""
    dim = y0.size
    out = np.empty((nsteps + 1, dim))
    out[0] = y0
    y = y0.copy()
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    for step in range(nsteps):
        if n < 0:
            rhs_plain_into(kind, p, xs, ys, y, k1)
        else:
            rhs_delay_into(kind, p, xs, ys, n, k, y, k1)
        for i in range(dim):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        if n < 0:
            rhs_plain_into(kind, p, xs, ys, tmp, k2)
        else:
            rhs_delay_into(kind, p, xs, ys, n, k, tmp, k2)
        for i in range(dim):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        if n < 0:
            rhs_plain_into(kind, p, xs, ys, tmp, k3)
        else:
            rhs_delay_into(kind, p, xs, ys, n, k, tmp, k3)
        for i in range(dim):
            tmp[i] = y[i] + dt * k3[i]
        if n < 0:
            rhs_plain_into(kind, p, xs, ys, tmp, k4)
        else:
            rhs_delay_into(kind, p, xs, ys, n, k, tmp, k4)
        for i in range(dim):
            y[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not _clamp_row(y):
            return out[: step + 1], STATUS_BLOWUP
        out[step + 1] = y
    return out, STATUS_OK


# ----------------------------------------------------------------- cascade

@njit(cache=True)
def advance_cascade_inplace(gamma, eta, m, k, dt):
    if dt <= 0.0:
        return
    n1 = gamma.size
    x = k * dt
    w = np.empty(n1)
    w[0] = math.exp(-x)
    for r in range(1, n1):
        w[r] = w[r - 1] * x / r
    # descending j keeps the lower deviations untouched until used
    for j in range(n1 - 1, -1, -1):
        dg = 0.0
        de = 0.0
        for i in range(j + 1):
            dg += w[j - i] * (gamma[i] - m)
            de += w[j - i] * (eta[i] - (1.0 - m))
        g = m + dg
        e = 1.0 - m + de
        gamma[j] = min(max(g, 0.0), 1.0)
        eta[j] = min(max(e, 0.0), 1.0)


# ------------------------------------------------- aggregate birth-death chain

@njit(cache=True)
def birth_death(rng, count, N, kind, p, xs, ys, horizon, grid, lo, hi, t_watch):
    """Exact Gillespie run of the magnetization chain.

    Returns (sampled m, jumps, absorption time or -1, entry time into [lo, hi]
    or -1, occupied time after entry, max m after t_watch, min m after t_watch).
    """
    out = np.empty(grid.size)
    t = 0.0
    gi = 0
    jumps = 0
    t_abs = -1.0
    if count == 0 or count == N:
        t_abs = 0.0
    entry = -1.0
    occ = 0.0
    mx = -1.0
    mn = 2.0
    while True:
        x = count / N
        up = 0.0
        rate = 0.0
        if 0 < count < N:
            base = N * x * (1.0 - x)
            up = base * phi_eval(kind, p, xs, ys, x)
            rate = up + base * phi_eval(kind, p, xs, ys, 1.0 - x)
        t_next = math.inf
        if rate > 0.0:
            t_next = t + rng.exponential() / rate
        t_end = min(t_next, horizon)
        while gi < grid.size and grid[gi] < t_next and grid[gi] <= horizon:
            out[gi] = x
            gi += 1
        inside = lo <= x <= hi
        if entry < 0.0 and inside:
            entry = t
        if entry >= 0.0 and inside:
            occ += t_end - t
        if t_end >= t_watch:
            mx = max(mx, x)
            mn = min(mn, x)
        if t_next >= horizon:
            break
        t = t_next
        if rng.random() * rate < up:
            count += 1
        else:
            count -= 1
        jumps += 1
        if count == 0 or count == N:
            t_abs = t
    return out, jumps, t_abs, entry, occ, mx, mn


# ---------------------------------------------- delayed process by thinning

@njit(cache=True)
def _grow(a):
    b = np.empty(a.size * 2, a.dtype)
    b[: a.size] = a
    return b


@njit(cache=True)
def thinning(rng, count, gamma, eta, N, k, kind, p, xs, ys, lam, horizon, grid, log_events):
    """Exact simulation of the delayed PDMP by thinning at dominating rate lam.

    gamma/eta are advanced in place. Returns (m, gamma_n, eta_n samples,
    proposed, accepted, absorption time or -1, event times, event counts).
    """
    n = gamma.size - 1
    m_out = np.empty(grid.size)
    g_out = np.empty(grid.size)
    e_out = np.empty(grid.size)
    ev_t = np.empty(64 if log_events else 1)
    ev_c = np.empty(64 if log_events else 1, np.int64)
    nev = 0
    t = 0.0
    gi = 0
    proposed = 0
    accepted = 0
    t_abs = -1.0
    if count == 0 or count == N:
        t_abs = 0.0
    while True:
        absorbed = count == 0 or count == N
        x = count / N
        t_next = math.inf if absorbed else t + rng.exponential() / lam
        while gi < grid.size and grid[gi] < t_next and grid[gi] <= horizon:
            advance_cascade_inplace(gamma, eta, x, k, grid[gi] - t)
            t = grid[gi]
            m_out[gi] = x
            g_out[gi] = gamma[n]
            e_out[gi] = eta[n]
            gi += 1
        if t_next >= horizon:
            break
        advance_cascade_inplace(gamma, eta, x, k, t_next - t)
        t = t_next
        proposed += 1
        base = N * x * (1.0 - x)
        up = base * phi_eval(kind, p, xs, ys, gamma[n])
        down = base * phi_eval(kind, p, xs, ys, eta[n])
        u = rng.random() * lam
        if u < up:
            count += 1
        elif u < up + down:
            count -= 1
        else:
            continue
        accepted += 1
        if log_events:
            if nev == ev_t.size:
                ev_t = _grow(ev_t)
                ev_c = _grow(ev_c)
            ev_t[nev] = t
            ev_c[nev] = count
            nev += 1
        if count == 0 or count == N:
            t_abs = t
    return m_out, g_out, e_out, proposed, accepted, t_abs, ev_t[:nev], ev_c[:nev]


# ------------------------------------------------------------ agent level

@njit(cache=True)
def agents(rng, sigma, n_delay, k, kind, p, xs, ys, lam, horizon, grid, gamma, eta):
    """Configuration-level simulation; n_delay < 0 selects the undelayed rates.

    Agents are kept in ``order`` with the ones first so a uniform pick from
    either state is O(1). Returns (sampled configurations, event times,
    event agents, proposals, absorption time or -1).
    """
    N = sigma.size
    order = np.empty(N, np.int64)
    where = np.empty(N, np.int64)
    count = 0
    for i in range(N):
        if sigma[i] == 1:
            order[count] = i
            where[i] = count
            count += 1
    z = count
    for i in range(N):
        if sigma[i] == 0:
            order[z] = i
            where[i] = z
            z += 1
    snaps = np.empty((grid.size, N), np.int8)
    ev_t = np.empty(64)
    ev_a = np.empty(64, np.int64)
    nev = 0
    proposed = 0
    t = 0.0
    gi = 0
    t_abs = -1.0
    if count == 0 or count == N:
        t_abs = 0.0
    delayed = n_delay >= 0
    while True:
        x = count / N
        absorbed = count == 0 or count == N
        up = 0.0
        down = 0.0
        if not delayed and not absorbed:
            base = N * x * (1.0 - x)
            up = base * phi_eval(kind, p, xs, ys, x)
            down = base * phi_eval(kind, p, xs, ys, 1.0 - x)
        if absorbed:
            t_next = math.inf
        elif delayed:
            t_next = t + rng.exponential() / lam
        else:
            t_next = t + rng.exponential() / (up + down)
        while gi < grid.size and grid[gi] < t_next and grid[gi] <= horizon:
            if delayed:
                advance_cascade_inplace(gamma, eta, x, k, grid[gi] - t)
                t = grid[gi]
            snaps[gi] = sigma
            gi += 1
        if t_next >= horizon:
            break
        if delayed:
            advance_cascade_inplace(gamma, eta, x, k, t_next - t)
        t = t_next
        proposed += 1
        if delayed:
            base = N * x * (1.0 - x)
            up = base * phi_eval(kind, p, xs, ys, gamma[n_delay])
            down = base * phi_eval(kind, p, xs, ys, eta[n_delay])
            u = rng.random() * lam
        else:
            u = rng.random() * (up + down)
        if u < up:
            # a zero becomes one
            pos = count + int(rng.random() * (N - count))
            agent = order[pos]
            other = order[count]
            order[count] = agent
            order[pos] = other
            where[agent] = count
            where[other] = pos
            sigma[agent] = 1
            count += 1
        elif u < up + down:
            pos = int(rng.random() * count)
            agent = order[pos]
            other = order[count - 1]
            order[count - 1] = agent
            order[pos] = other
            where[agent] = count - 1
            where[other] = pos
            sigma[agent] = 0
            count -= 1
        else:
            continue
        if nev == ev_t.size:
            ev_t = _grow(ev_t)
            ev_a = _grow(ev_a)
        ev_t[nev] = t
        ev_a[nev] = agent
        nev += 1
        if count == 0 or count == N:
            t_abs = t
    return snaps, ev_t[:nev], ev_a[:nev], proposed, t_abs
