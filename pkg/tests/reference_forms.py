"""Closed-form characteristic polynomials and Liu determinants used as fixtures.

``LINEAR_LADDERS`` and ``GENERAL_N2_LADDER`` hold the internally consistent
published forms; ``KNOWN_BAD`` holds the inconsistent ones as printed, so the
tests can assert that they really disagree with the numeric determinants.
"""
import numpy as np


def linear_poly(n, a, k):
    """Descending coefficients, as typeset."""
    forms = {
        2: [1, 3 * k, 3 * k**2, k**3, a / 2 * k**3],
        3: [1, 4 * k, 6 * k**2, 4 * k**3, k**4, a / 2 * k**4],
        # the n = 4, 5 displays are written with -2c, c = -a/4
        4: [1, 5 * k, 10 * k**2, 10 * k**3, 5 * k**4, k**5, a / 2 * k**5],
        # the n = 5 display repeats its 20k^3 l^4 term; binomial coefficients are meant
        5: [1, 6 * k, 15 * k**2, 20 * k**3, 15 * k**4, 6 * k**5, k**6, a / 2 * k**6],
    }
    return np.array(forms[n], dtype=float)


def general_n2_poly(c, k):
    return np.array([
        1, 6 * k, 15 * k**2, 20 * k**3, k**3 * (15 * k - 2 * c), 6 * k**4 * (k - c),
        k**5 * (k - 6 * c), -2 * c * k**6,
    ], dtype=float)


# (n, j) -> D_j(a, k), reduced linear system
LINEAR_LADDERS = {
    (2, 1): lambda a, k: k**3,
    (2, 2): lambda a, k: 1.5 * k**4 * (2 * k - a),
    (2, 3): lambda a, k: 0.5 * k**5 * (16 * k - 9 * a),
    (3, 1): lambda a, k: k**4,
    (3, 2): lambda a, k: k**6 * (4 * k - 3 * a),
    (3, 3): lambda a, k: 2.5 * k**8 * (8 * k - 7 * a),
    (3, 4): lambda a, k: 0.25 * k**8 * (256 * k**2 - 224 * a * k - a**2),
    (4, 1): lambda a, k: k**5,
    (4, 2): lambda a, k: 5 * k**8 * (k - a),
    (4, 3): lambda a, k: 2.5 * k**11 * (16 * k - 19 * a),
    (4, 5): lambda a, k: 0.25 * k**13 * (4096 * k**2 - 4800 * a * k - 125 * a**2),
    (5, 2): lambda a, k: 1.5 * k**10 * (4 * k - 5 * a),
    (5, 3): lambda a, k: 35 * k**14 * (2 * k - 3 * a),
}

# consistent as well, though not in the list the acceptance criterion names
LINEAR_LADDERS_EXTRA = {
    (4, 4): lambda a, k: 1.25 * k**12 * (224 * k**2 - 264 * a * k - 5 * a**2),
    (5, 1): lambda a, k: k**6,
    # with the missing opening parenthesis restored
    (5, 5): lambda a, k: 3.5 * k**18 * (2304 * k**2 - 3354 * a * k - 209 * a**2),
}

GENERAL_N2_LADDER = {
    1: lambda c, k: k**5 * (k - 6 * c),
    2: lambda c, k: 2 * k**9 * (3 * k**2 - 6 * c * k + 16 * c**2),
    3: lambda c, k: 2 * k**12 * (35 * k**3 + 9 * c * k**2 - 18 * c**2 * k - 32 * c**3),
    5: lambda c, k: 4 * k**16 * (2016 * k**4 + 2988 * c * k**3 - 3043 * c**2 * k**2 + 864 * c**3 * k - 96 * c**4),
}

# exact factorization of the top determinant of the general n = 2 system
GENERAL_N2_D6 = lambda c, k: 128 * k**17 * (4 * k - c) ** 3 * (9 * c + 4 * k)  # noqa: E731

KNOWN_BAD = {
    "linear n=5 D4": (5, 4, lambda a, k: 3.5 * k**16 * (256 * k**2 - 376 * a * k - 15 * a**2)),
    "linear n=5 D6": (5, 6, lambda a, k: 0.125 * k**18 * (4 * k + a) * (16384 * k**2 - 24832 * a * k + a**2)),
    "general n=2 D6": (2, 6, lambda c, k: 8 * k**17 * (4096 * k**4 + 6048 * c * k**3 - 6036 * c**2 * k**2
                                                      + 1393 * c**3 * k - 144 * c**4)),
}
