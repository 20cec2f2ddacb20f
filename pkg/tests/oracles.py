"""Independent reference implementations used by the tests.

Nothing here imports the numerical kernels under test: each oracle is either
a plain-Python brute force, a general-purpose LP, or a closed form.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog


def dist(p, q) -> float:
    """Euclidean distance, summing squared coordinate gaps left to right."""
    acc = 0.0
    for a, b in zip(p, q):
        acc = acc + (float(a) - float(b)) ** 2
    return math.sqrt(acc)


def hausdorff_loop(a, b) -> float:
    """O(|a| |b|) double loop."""
    a = [tuple(np.atleast_1d(p)) for p in np.asarray(a, dtype=float).reshape(len(a), -1)]
    b = [tuple(np.atleast_1d(p)) for p in np.asarray(b, dtype=float).reshape(len(b), -1)]

    def directed(x, y):
        worst = 0.0
        for p in x:
            worst = max(worst, min(dist(p, q) for q in y))
        return worst

    return max(directed(a, b), directed(b, a))


def diameter_loop(a) -> float:
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    best = 0.0
    for p, q in itertools.combinations(a, 2):
        best = max(best, dist(p, q))
    return best


def w1_linprog(x, a, y, b) -> float:
    """Wasserstein-1 distance as the transportation LP, solved by HiGHS."""
    x = np.asarray(x, dtype=float).reshape(len(a), -1)
    y = np.asarray(y, dtype=float).reshape(len(b), -1)
    n, m = len(a), len(b)
    cost = np.array([[dist(p, q) for q in y] for p in x]).ravel()
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A_eq[n + j, j::m] = 1.0
    res = linprog(cost, A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def cantor_reference(level: int) -> np.ndarray:
    """Left and right endpoints of the 2^level intervals of the middle-thirds
    construction at the given level, from ternary digits in {0, 2}."""
    pts = set()
    for digits in itertools.product((0, 2), repeat=level):
        left = sum(Fraction(d, 3 ** (k + 1)) for k, d in enumerate(digits))
        pts.add(left)
        pts.add(left + Fraction(1, 3**level))
    return np.array(sorted(float(p) for p in pts))[:, None]


def cantor_level(tol: float) -> int:
    return math.ceil(math.log(tol) / math.log(1 / 3))


# closed forms ---------------------------------------------------------------

def halving_diam(n: int) -> float:
    return 2.0**-n


def edalat_power(n: int, x: float) -> float:
    """n-fold composition of x/(1+x)."""
    return x / (1 + n * x)


def halving_birkhoff(n: int) -> float:
    """(1/n) sum_{j<n} 2^{-j} from x = 1."""
    return (2 - 2.0 ** (1 - n)) / n


# Cantor measure with p = (1/2, 1/2): E = 1/2 and E2 = E2/9 + 1/3
CANTOR_MEAN = 0.5
CANTOR_SECOND_MOMENT = 3 / 8

# (X + U)/2 with U uniform on [0, 1]: Var = (Var + 1/12)/4
BLEND_MEAN = 0.5
BLEND_VARIANCE = 1 / 36

SIERPINSKI_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
SIERPINSKI_MEAN = SIERPINSKI_VERTICES.mean(axis=0)


def corner_interval_fraction(delta: float, side: float) -> float:
    """Smallest share of [0, side] covered by a delta-ball centred inside it."""
    return min(delta, side) / side
