"""Chaos game: fair parameter measures and random orbits drawing the attractor."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NotFairError
from .ifs_core import IfsFamily, ParamMeasure, WordStream, derive_seed, run_forward
from .metric import PointCloud, as_point, hausdorff_distance, write_csv


@dataclass
class FairnessCertificate:
    delta_grid: list
    lower_bounds: list
    analytic_f: list | None = None

    def rows(self):
        analytic = self.analytic_f or [None] * len(self.delta_grid)
        return [(float(d), float(lb), "" if a is None else float(a))
                for d, lb, a in zip(self.delta_grid, self.lower_bounds, analytic)]


def _corner_ball_fraction(delta: float, sides: np.ndarray) -> float | None:
    """``vol(B(corner, delta) n box) / vol(box)`` where it has a closed form."""
    k = sides.size
    vol = float(np.prod(sides))
    if k == 1:
        return min(delta, float(sides[0])) / vol
    if k == 2:
        a, b = float(sides[0]), float(sides[1])
        # area of {x in [0,a], y in [0,b], x^2 + y^2 <= delta^2}
        def prim(x):  # antiderivative of sqrt(delta^2 - x^2)
            x = min(x, delta)
            return 0.5 * (x * math.sqrt(max(delta**2 - x**2, 0.0)) + delta**2 * math.asin(x / delta))

        x_hi = min(a, delta)
        x_cut = min(x_hi, math.sqrt(max(delta**2 - b**2, 0.0)))
        area = b * x_cut + prim(x_hi) - prim(x_cut)
        return area / vol
    if delta <= float(sides.min()):
        ball = math.pi ** (k / 2) / math.gamma(k / 2 + 1) * delta**k
        return ball / 2**k / vol
    return None


def fairness_certificate(p: ParamMeasure, delta_grid, sample: int = 256, seed: int = 0) -> FairnessCertificate:
    """Lower bounds ``f(delta) <= inf_lam p(B(lam, delta))``.

    A finite measure is fair with ``f = min_i p_i`` (each ball holds its centre
    label).  The uniform measure on a box attains the infimum at a corner; the
    analytic value is reported when available together with an empirical
    minimum over corners and ``sample`` random centres.
    """
    deltas = [float(d) for d in delta_grid]
    if any(not d > 0 for d in deltas):
        raise ValueError("delta grid must be positive")
    if p.is_finite:
        zero = [lab for lab, q in zip(p.space.labels, p.probs) if q <= 0]
        if zero:
            raise NotFairError(f"not fair: label {zero[0]!r} has probability 0")
        fmin = float(p.probs.min())
        return FairnessCertificate(deltas, [fmin] * len(deltas), [fmin] * len(deltas))

    sp = p.space
    sides = sp.hi - sp.lo
    rng = np.random.Generator(np.random.PCG64(seed))
    centres = np.vstack([sp.box.corners(), sp.lo + sides * rng.random((sample, sp.k))])
    probe = sp.lo + sides * rng.random((8192, sp.k)) if sp.k > 1 else None
    lower, analytic = [], []
    for d in deltas:
        if sp.k == 1:
            lo = np.maximum(centres[:, 0] - d, sp.lo[0])
            hi = np.minimum(centres[:, 0] + d, sp.hi[0])
            mass = (hi - lo) / sides[0]
        else:
            dist = np.sqrt(((centres[:, None, :] - probe[None, :, :]) ** 2).sum(-1))
            mass = (dist <= d).mean(axis=1)
        lower.append(float(mass.min()))
        analytic.append(_corner_ball_fraction(d, sides))
    return FairnessCertificate(deltas, lower, analytic)


@dataclass
class ChaosTrial:
    seed: int
    L: int
    M: int
    distance: float
    passed: bool
    tail: np.ndarray | None = field(default=None, repr=False)


def _tails(f: IfsFamily, p: ParamMeasure, x0: np.ndarray, L: int, M: int, seeds: list) -> np.ndarray:
    """Orbit points ``x_L..x_{L+M}`` for one orbit per seed; ``(W, M+1, d)``."""
    codes = np.stack([WordStream(p, s).take(L + M) for s in seeds], axis=1)
    W = len(seeds)
    out = np.empty((M + 1, W, f.dim))

    def keep(j, x):
        if j >= L:
            out[j - L] = x

    run_forward(f, codes, np.tile(x0, (W, 1)), keep)
    return out.transpose(1, 0, 2)


def chaos_game_trial(f: IfsFamily, p: ParamMeasure, x0, L: int, M: int, k: PointCloud, eps: float, seed: int,
                     keep_tail: bool = False) -> ChaosTrial:
    """Run ``L + M`` steps of the random orbit from ``x0`` and measure the
    Hausdorff distance between the tail ``{x_L, ..., x_{L+M}}`` and ``k``."""
    if L < 0 or M < 1:
        raise ValueError("need L >= 0 and M >= 1")
    x0 = as_point(x0, f.dim)
    tail = _tails(f, p, x0, L, M, [seed])[0]
    dist = hausdorff_distance(tail, k)
    return ChaosTrial(seed, L, M, dist, dist <= eps, tail if keep_tail else None)


@dataclass
class DrawReport:
    trials: list

    @property
    def pass_fraction(self) -> float:
        return sum(t.passed for t in self.trials) / len(self.trials)

    @property
    def worst(self) -> float:
        return max(t.distance for t in self.trials)

    def write(self, path) -> None:
        write_csv(path, ["trial", "seed", "L", "M", "hausdorff", "pass"],
                  [(i, t.seed, t.L, t.M, float(t.distance), int(t.passed)) for i, t in enumerate(self.trials)])

    def summary(self) -> dict:
        return {"trials": len(self.trials), "pass_fraction": self.pass_fraction, "worst_hausdorff": self.worst}


def chaos_game_suite(f: IfsFamily, p: ParamMeasure, x0, L: int, M: int, k: PointCloud, eps: float, trials: int,
                     seed: int, workers: int = 1, keep_tails: bool = False) -> DrawReport:
    """Independent trials with seeds derived from ``(seed, trial index)``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if L < 0 or M < 1:
        raise ValueError("need L >= 0 and M >= 1")
    x0 = as_point(x0, f.dim)
    seeds = [derive_seed(seed, t) for t in range(trials)]

    def run(idx):
        tails = _tails(f, p, x0, L, M, [seeds[i] for i in idx])
        out = []
        for i, tail in zip(idx, tails):
            dist = hausdorff_distance(tail, k)
            out.append(ChaosTrial(seeds[i], L, M, dist, dist <= eps, tail if keep_tails else None))
        return out

    workers = max(1, min(int(workers), trials))
    chunks = [list(c) for c in np.array_split(np.arange(trials), workers)]
    if workers == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, chunks))
    return DrawReport([t for part in parts for t in part])


def default_tail_length(ratio: float, labels: int, eps: float, margin: float = 10.0) -> int:
    """Tail size covering every cylinder of depth ``log_{1/ratio}(1/eps)``
    about ``margin`` times over (a heuristic for contractive systems)."""
    depth = math.ceil(math.log(1 / eps) / math.log(1 / ratio))
    return int(math.ceil(margin * labels**depth))
