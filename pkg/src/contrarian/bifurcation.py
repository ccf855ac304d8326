"""Linear stability of the mixed equilibrium and the delay-induced Hopf point.

Everything is expressed through ``c = phi'(1/2) / 4`` (negative for a
competitive population). Polynomials are stored with ascending coefficients.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import mpmath
import numpy as np
from scipy.linalg import hessenberg

from .gain import GainFunction

__all__ = [
    "PolyCoeffs",
    "HopfReport",
    "NoHopfError",
    "PRINTED_N2_RATIO",
    "char_poly_general",
    "char_poly_linear",
    "jacobian_at_star",
    "hessenberg_char_poly",
    "liu_determinants",
    "find_hopf_k",
    "closed_form_kstar",
    "imaginary_crossing_oracle",
    "eigen_crossing_check",
    "companion_roots",
    "slope_to_c",
]

# printed root of the n = 2 general-phi quartic, as a multiple of c
PRINTED_N2_RATIO = -2.21457
MAX_RELIABLE_N = 12
SCAN_POINTS = 400
BISECT_RTOL = 1e-12
# Hurwitz matrices of the full system reach condition numbers ~1e17 by n = 6
CHECK_DPS = 50


class NoHopfError(ValueError):
    def __init__(self, message: str, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


@dataclass(frozen=True)
class PolyCoeffs:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1 or c[-1] != 1.0:
            raise ValueError("PolyCoeffs must be monic (leading coefficient 1)")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __getitem__(self, i: int) -> float:
        return float(self.coeffs[i]) if 0 <= i <= self.degree else 0.0

    def __call__(self, lam):
        return np.polynomial.polynomial.polyval(lam, self.coeffs)

    def __len__(self):
        return self.coeffs.size


def slope_to_c(phi_prime_half: float) -> float:
    return phi_prime_half / 4.0


def _shift_power(k: float, e: int) -> np.ndarray:
    """Ascending coefficients of (lambda + k)**e."""
    return np.array([math.comb(e, i) * k ** (e - i) for i in range(e + 1)], dtype=float)


def char_poly_general(c: float, k: float, n: int) -> PolyCoeffs:
    """(l + k)^(n+1) * (l (l + k)^(n+1) - 2 c k^(n+1)), degree 2n + 3."""
    if k <= 0:
        raise ValueError("k must be positive")
    shift = _shift_power(k, n + 1)
    inner = np.concatenate([[0.0], shift])
    inner[0] -= 2.0 * c * k ** (n + 1)
    return PolyCoeffs(np.convolve(shift, inner))


def char_poly_linear(a: float, k: float, n: int) -> PolyCoeffs:
    """Reduced system for phi(z) = -a z + b: l (l + k)^(n+1) + (a/2) k^(n+1)."""
    if a <= 0 or k <= 0:
        raise ValueError("a and k must be positive")
    p = np.concatenate([[0.0], _shift_power(k, n + 1)])
    p[0] += 0.5 * a * k ** (n + 1)
    return PolyCoeffs(p)


def jacobian_at_star(g: GainFunction | float, n: int, k: float) -> np.ndarray:
    """Jacobian at x* = (1/2, ..., 1/2), ordering [m, gamma_0..gamma_n, eta_0..eta_n].

    ``g`` may be a GainFunction or directly the value of c.
    """
    if isinstance(g, GainFunction):
        g.require_smooth_at_half()
        c = slope_to_c(g.derivative_at_half())
    else:
        c = float(g)
    d = 2 * n + 3
    J = np.zeros((d, d))
    gi = lambda j: 1 + j  # noqa: E731
    ei = lambda j: n + 2 + j  # noqa: E731
    J[0, gi(n)] = c
    J[0, ei(n)] = -c
    J[gi(0), 0] = k
    J[ei(0), 0] = -k
    for j in range(n + 1):
        J[gi(j), gi(j)] = -k
        J[ei(j), ei(j)] = -k
        if j > 0:
            J[gi(j), gi(j - 1)] = k
            J[ei(j), ei(j - 1)] = k
    return J


def hessenberg_char_poly(A: np.ndarray) -> PolyCoeffs:
    """det(l I - A) via reduction to upper Hessenberg form and the column recurrence."""
    H = hessenberg(np.asarray(A, dtype=float))
    d = H.shape[0]
    P = np.polynomial.polynomial
    polys = [np.array([1.0])]
    for i in range(d):
        p = P.polymul([-H[i, i], 1.0], polys[i])
        prod = 1.0
        for j in range(i - 1, -1, -1):
            prod *= H[j + 1, j]
            p = P.polysub(p, H[j, i] * prod * polys[j])
        polys.append(np.asarray(p, dtype=float))
    out = polys[-1]
    out = np.concatenate([out, np.zeros(d + 1 - out.size)])
    out[-1] = 1.0
    return PolyCoeffs(out)


def liu_determinants(p: PolyCoeffs, dps: Optional[int] = None) -> list:
    """D_1 .. D_{d-1}: D_j = det L_j with L_j[r, s] = p_{2r - s} (1-based).

    Determinants come from LU with partial pivoting, in double precision or,
    with ``dps``, in ``dps``-digit arithmetic (returned as floats).
    """
    if dps is not None:
        return [float(v) for v in _mp_dets(list(p.coeffs), dps)]
    d = p.degree
    out = []
    for j in range(1, d):
        L = np.array([[p[2 * r - s] for s in range(1, j + 1)] for r in range(1, j + 1)])
        out.append(float(np.linalg.det(L)))
    return out


def _mp_dets(coeffs, dps: int, only_top: bool = False) -> list:
    d = len(coeffs) - 1
    with mpmath.workdps(dps):
        c = [mpmath.mpf(v) for v in coeffs]
        P = lambda i: c[i] if 0 <= i <= d else mpmath.mpf(0)  # noqa: E731
        out = []
        for j in (range(d - 1, d) if only_top else range(1, d)):
            L = mpmath.matrix(j, j)
            for r in range(1, j + 1):
                for s in range(1, j + 1):
                    L[r - 1, s - 1] = P(2 * r - s)
            out.append(mpmath.det(L))
        return out


def companion_roots(p: PolyCoeffs) -> np.ndarray:
    d = p.degree
    if d == 0:
        return np.array([], dtype=complex)
    C = np.zeros((d, d))
    C[1:, :-1] = np.eye(d - 1)
    C[:, -1] = -p.coeffs[:-1]
    return np.linalg.eigvals(C)


# ------------------------------------------------------------- Hopf search

def _poly(c: float, k: float, n: int, reduced: bool) -> PolyCoeffs:
    if reduced:
        return char_poly_linear(-4.0 * c, k, n)
    return char_poly_general(c, k, n)


def _scaled_poly(c: float, k: float, n: int, reduced: bool) -> PolyCoeffs:
    # l = k mu: the D_j of the mu-polynomial differ from the raw ones by a
    # positive power of k, so signs (and roots in k) are unchanged
    return _poly(c / k, 1.0, n, reduced)


def _top_det(c, k, n, reduced) -> float:
    q = _scaled_poly(c, k, n, reduced)
    j = q.degree - 1
    L = np.array([[q[2 * r - s] for s in range(1, j + 1)] for r in range(1, j + 1)])
    return float(np.linalg.det(L))


def _mp_scaled_coeffs(c, k, n, reduced, dps):
    """Scaled polynomial coefficients computed in extended precision."""
    with mpmath.workdps(dps):
        r = mpmath.mpf(c) / mpmath.mpf(k)
        shift = [mpmath.binomial(n + 1, i) for i in range(n + 2)]
        if reduced:
            out = [mpmath.mpf(0)] + shift
            out[0] -= 2 * r
            return out
        inner = [-2 * r] + shift
        out = [mpmath.mpf(0)] * (len(shift) + len(inner) - 1)
        for i, x in enumerate(shift):
            for j, y in enumerate(inner):
                out[i + j] += x * y
        return out


def _mp_top(c, k, n, reduced, dps=CHECK_DPS):
    return _mp_dets(_mp_scaled_coeffs(c, k, n, reduced, dps), dps, only_top=True)[0]


def _mp_refine(c, root, n, reduced):
    """Re-bracket a double-precision root in extended precision and bisect."""
    width = 1e-9
    while width < 1e-2:
        lo, hi = root * (1 - width), root * (1 + width)
        flo, fhi = _mp_top(c, lo, n, reduced), _mp_top(c, hi, n, reduced)
        if flo * fhi < 0:
            break
        width *= 10
    else:
        return root
    while hi - lo > BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        fm = _mp_top(c, mid, n, reduced)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _ch1(c, k, n, reduced):
    coeffs = _mp_scaled_coeffs(c, k, n, reduced, CHECK_DPS)
    D = _mp_dets(coeffs, CHECK_DPS)
    return coeffs[0] > 0 and all(v > 0 for v in D[:-1])


def _ch1_roots(c, k, n, tol=1e-8):
    """Root form of CH1: one pair on the imaginary axis, every other root in Re < 0."""
    coeffs = _mp_scaled_coeffs(c, k, n, True, CHECK_DPS)
    with mpmath.workdps(CHECK_DPS):
        roots = mpmath.polyroots(coeffs[::-1], maxsteps=200, extraprec=2 * CHECK_DPS)
    roots = sorted((complex(z) for z in roots), key=lambda z: -z.real)
    pair, rest = roots[:2], roots[2:]
    on_axis = all(abs(z.real) < tol and abs(z.imag) > tol for z in pair)
    return bool(on_axis and abs(pair[0] - pair[1].conjugate()) < tol and all(z.real < -tol for z in rest))


def _check_ch(c, k, n, reduced):
    # The (l + k)^(n+1) factor of the full polynomial is strictly stable, so
    # CH1 for the full system is equivalent to CH1 for the remaining factor.
    # For larger n several lower D_j pass through zero within ~1e-9 (relative)
    # of the crossing, which makes their sign at a refined root rounding noise;
    # the equivalent root-location statement decides CH1 in that case.
    basis = "determinants"
    ch1 = _ch1(c, k, n, reduced) or (not reduced and _ch1(c, k, n, True))
    if not ch1:
        ch1, basis = _ch1_roots(c, k, n), "roots"
    h = 1e-6 * k
    deriv = (_mp_top(c, k + h, n, reduced) - _mp_top(c, k - h, n, reduced)) / (2 * h)
    scale = max(abs(_mp_top(c, 0.99 * k, n, reduced)), abs(_mp_top(c, 1.01 * k, n, reduced))) / 0.01
    ch2 = abs(deriv * k) > 1e-8 * scale
    return bool(ch1), bool(ch2), float(deriv), basis


@dataclass
class HopfReport:
    n: int
    c: float
    k_star: float
    D: list
    ch1_ok: bool
    ch2_ok: bool
    omega: float
    transversality: float
    reduced: bool = False
    candidates: list = field(default_factory=list)
    printed_kstar: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        lines = [f"n = {self.n}   c = {self.c:.10g}   k* = {self.k_star:.12g}   omega = {self.omega:.12g}"]
        lines.append(f"CH1 {'ok' if self.ch1_ok else 'FAIL'}   CH2 {'ok' if self.ch2_ok else 'FAIL'}"
                     f"   dRe(lambda)/dk = {self.transversality:.6g}")
        if self.printed_kstar is not None:
            lines.append(f"printed reference root: {self.printed_kstar:.6g}")
        lines.append(f"{'j':>4}  {'D_j(k*)':>24}")
        for j, v in enumerate(self.D, start=1):
            lines.append(f"{j:>4}  {v:>24.15e}")
        return "\n".join(lines)


def _crossing_pair(c, k, n, reduced):
    roots = companion_roots(_poly(c, k, n, reduced))
    cplx = roots[roots.imag > 0]
    return cplx[np.argmax(cplx.real)]


def find_hopf_k(c: float, n: int, k_max: Optional[float] = None, reduced: bool = False) -> HopfReport:
    """Locate k* where the top Liu determinant changes sign with CH1 and CH2 holding.

    ``reduced=True`` uses the (n+2)-degree polynomial of the linear-gain
    reduction (with a = -4c) instead of the full 2n+3 system.
    """
    if not c < 0:
        raise ValueError("find_hopf_k needs c < 0 (decreasing phi); x* is unstable otherwise")
    if n > MAX_RELIABLE_N:
        warnings.warn(f"n={n} exceeds {MAX_RELIABLE_N}; determinant signs may be unreliable", RuntimeWarning)
    if k_max is None:
        k_max = 100.0 * abs(c)
    grid = np.geomspace(1e-3 * abs(c), k_max, SCAN_POINTS)
    vals = [_top_det(c, k, n, reduced) for k in grid]
    roots = []
    for i in range(len(grid) - 1):
        lo, hi, flo, fhi = grid[i], grid[i + 1], vals[i], vals[i + 1]
        if flo == 0.0:
            roots.append(lo)
            continue
        if flo * fhi >= 0:
            continue
        while hi - lo > BISECT_RTOL * hi:
            mid = 0.5 * (lo + hi)
            fm = _top_det(c, mid, n, reduced)
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(_mp_refine(c, 0.5 * (lo + hi), n, reduced))
    if not roots:
        raise NoHopfError(f"no sign change of D_(d-1) in (0, {k_max}]")
    candidates = []
    for r in roots:
        ch1, ch2, deriv, basis = _check_ch(c, r, n, reduced)
        candidates.append({"k": float(r), "ch1": ch1, "ch2": ch2, "dD_dk_scaled": deriv, "ch1_basis": basis})
    passing = [cand["k"] for cand in candidates if cand["ch1"] and cand["ch2"]]
    if not passing:
        raise NoHopfError("no root of D_(d-1) satisfies CH1 and CH2", candidates)
    k_star = max(passing)
    lam = _crossing_pair(c, k_star, n, reduced)
    h = 1e-5 * k_star
    trans = (_crossing_pair(c, k_star + h, n, reduced).real - _crossing_pair(c, k_star - h, n, reduced).real) / (2 * h)
    p = _poly(c, k_star, n, reduced)
    return HopfReport(
        n=n,
        c=c,
        k_star=k_star,
        D=liu_determinants(p, dps=CHECK_DPS),
        ch1_ok=True,
        ch2_ok=True,
        omega=float(abs(lam.imag)),
        transversality=float(trans),
        reduced=reduced,
        candidates=candidates,
        printed_kstar=PRINTED_N2_RATIO * c if (n == 2 and not reduced) else None,
    )


def closed_form_kstar(n: int, a: float) -> float:
    """Critical k for phi(z) = -a z + b, printed closed forms for n = 2..5."""
    forms = {
        2: 9.0 / 16.0,
        3: (5.0 * math.sqrt(2.0) + 7.0) / 16.0,
        4: 5.0 / 128.0 * (7.0 * math.sqrt(5.0) + 15.0),
        5: (56.0 * math.sqrt(3.0) + 97.0) / 128.0,
    }
    if n not in forms:
        raise ValueError(f"closed form available for n in 2..5, got {n}")
    return forms[n] * a


def imaginary_crossing_oracle(c: float, n: int):
    """(k*, omega) from l (l + k)^(n+1) = 2 c k^(n+1) at l = i omega."""
    if not c < 0:
        raise ValueError("c must be negative")
    theta = math.pi / (2 * (n + 1))
    k_star = 2.0 * abs(c) * math.cos(theta) ** (n + 1) / math.tan(theta)
    return k_star, k_star * math.tan(theta)


def eigen_crossing_check(c: float, n: int, k_star: float, delta: Optional[float] = None,
                         reduced: bool = False) -> bool:
    """True iff exactly one conjugate pair is unstable just below k* and none just above."""
    if delta is None:
        delta = 1e-3 * k_star
    below = companion_roots(_poly(c, k_star - delta, n, reduced))
    above = companion_roots(_poly(c, k_star + delta, n, reduced))
    unstable = below[below.real > 0]
    one_pair = (
        unstable.size == 2
        and abs(unstable[0].imag) > 0
        and np.isclose(unstable[0], np.conj(unstable[1]), rtol=1e-8, atol=1e-12)
    )
    return bool(one_pair and np.all(above.real < 0))
