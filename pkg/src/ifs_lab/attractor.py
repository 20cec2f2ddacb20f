"""Hutchinson-Barnsley iteration, attractors and fixed points of compositions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, NonConvergenceError
from .ifs_core import IfsFamily
from .metric import PointCloud, as_point, canonicalize, hausdorff_distance, write_csv

DEFAULT_POINT_BUDGET = 2_000_000
DEFAULT_WORD_BUDGET = 1_000_000
DEFAULT_SAMPLED_WORDS = 4096


def hutchinson_step(
    f: IfsFamily,
    a: PointCloud,
    lam_net=None,
    merge_radius: float = 1e-9,
    budget: int = DEFAULT_POINT_BUDGET,
) -> PointCloud:
    """``F(a)``: the union of ``w_lam(a)`` over the parameter net, canonicalized."""
    codes = f.space.net() if lam_net is None else np.asarray(lam_net)
    if len(codes) * len(a) > budget:
        raise BudgetError(
            f"Hutchinson step would produce {len(codes) * len(a)} points (budget {budget}); "
            "raise the merge radius"
        )
    images = f.image_all(codes, a.points)
    return PointCloud(canonicalize(images, merge_radius))


@dataclass
class AttractorResult:
    cloud: PointCloud
    trace: list
    iterations: int
    lam_net_eps: float | None
    merge_radius: float

    def write(self, points_path, trace_path) -> None:
        from .metric import write_points_csv

        write_points_csv(points_path, self.cloud)
        write_trace(trace_path, self.trace)


def write_trace(path, trace) -> None:
    write_csv(path, ["iteration", "gap", "points"], [(i, float(g), n) for i, g, n in trace])


def compute_attractor(
    f: IfsFamily,
    seed: PointCloud | None = None,
    lam_net=None,
    tol: float = 1e-3,
    n_max: int = 100,
    merge_radius: float | None = None,
    budget: int = DEFAULT_POINT_BUDGET,
) -> AttractorResult:
    """Iterate ``F`` from ``seed`` (default: the box centre) until
    ``d_H(F^n, F^{n+1}) < tol``; return ``F^{n+1}(seed)``.

    Trace rows are ``(n, d_H(F^{n-1}, F^n), |F^n|)``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    r = tol / 4 if merge_radius is None else merge_radius
    current = seed if seed is not None else PointCloud(f.domain.center[None, :])
    current = PointCloud(canonicalize(current.points, r))
    trace = []
    gap = np.inf
    for n in range(1, n_max + 1):
        nxt = hutchinson_step(f, current, lam_net, r, budget)
        gap = hausdorff_distance(current, nxt)
        trace.append((n, gap, len(nxt)))
        current = nxt
        if gap < tol:
            lam_eps = getattr(f.space, "net_spacing", None)
            return AttractorResult(current, trace, n, lam_eps, r)
    raise NonConvergenceError(
        f"Hutchinson iterates did not settle below {tol} within {n_max} steps (last gap {gap:.3g})",
        trace=trace,
        last_gap=gap,
    )


def _fixed_points_batch(f: IfsFamily, codes, words: np.ndarray, x0: np.ndarray, tol: float, n_max: int):
    """Fixed points of ``g_w = w_{w1} o ... o w_{wn}`` for every row ``w`` of
    ``words`` (indices into ``codes``), by plain iteration of ``g_w``."""
    W, L = words.shape
    x = np.tile(x0, (W, 1))
    for it in range(1, n_max + 1):
        y = x
        for k in range(L - 1, -1, -1):
            y = f.map_batch(codes[words[:, k]], y)
        step = np.sqrt(np.sum((y - x) ** 2, axis=1))
        x = y
        if step.max() < tol:
            return x, it
    raise NonConvergenceError(
        f"iteration of the composed map did not settle below {tol} within {n_max} steps "
        f"(worst step {step.max():.3g}); it may not be an asymptotic contraction",
        last_gap=float(step.max()),
    )


def partial_fixed_point(f: IfsFamily, word, tol: float = 1e-12, n_max: int = 100_000, x0=None) -> np.ndarray:
    """Fixed point ``q_w`` of ``w_{w1} o ... o w_{wn}``, iterated from the box centre."""
    word = list(word)
    if not word:
        raise ValueError("the word must be nonempty")
    codes = f.space.encode(word)
    start = f.domain.center if x0 is None else as_point(x0, f.dim)
    x, _ = _fixed_points_batch(f, codes, np.arange(len(word))[None, :], start, tol, n_max)
    return x[0]


@dataclass
class DensityResult:
    distance: float
    sampled: bool
    words_used: int
    fixed_points: PointCloud = field(repr=False)

    def __float__(self):
        return self.distance


def fixed_point_density(
    f: IfsFamily,
    attractor: PointCloud,
    max_len: int,
    lam_net=None,
    tol: float = 1e-12,
    budget: int = DEFAULT_WORD_BUDGET,
    sample: int = DEFAULT_SAMPLED_WORDS,
    seed: int = 0,
    n_max: int = 100_000,
) -> DensityResult:
    """``d_H(attractor, {q_w : |w| = max_len})``.

    Words are enumerated breadth-first in address order when there are at most
    ``budget`` of them; otherwise every constant word plus ``sample`` random
    words are used and the result is flagged as sampled.
    """
    codes = f.space.net() if lam_net is None else np.asarray(lam_net)
    m = len(codes)
    total = m**max_len
    if total <= budget:
        words = np.array(list(itertools.product(range(m), repeat=max_len)), dtype=np.int64).reshape(-1, max_len)
        sampled = False
    else:
        rng = np.random.Generator(np.random.PCG64(seed))
        const = np.repeat(np.arange(m)[:, None], max_len, axis=1)
        words = np.concatenate([const, rng.integers(0, m, size=(sample, max_len))])
        sampled = True
    qs, _ = _fixed_points_batch(f, codes, words, f.domain.center, tol, n_max)
    cloud = PointCloud(qs)
    return DensityResult(hausdorff_distance(attractor, cloud), sampled, len(words), cloud)
