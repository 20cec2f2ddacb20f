"""Discrete measures, the transfer operator and the Kantorovich metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, DimensionError, NonConvergenceError
from .ifs_core import IfsFamily, ParamMeasure
from .metric import (
    DEFAULT_MERGE_RADIUS,
    PointCloud,
    as_points,
    hausdorff_distance,
    lexsort_points,
    merge_clusters,
    write_csv,
)
from .transport import DEFAULT_SOLVER_BUDGET, TransportPlan, min_cost_transport

DEFAULT_ATOM_BUDGET = 4_000_000


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure with finitely many atoms.

    Atoms are stored sorted lexicographically with exact duplicates merged;
    weights are strictly positive and sum to one within 1e-12.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.size or w.size == 0:
            raise ValueError(f"{pts.shape[0]} atoms but {w.size} weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(pts)):
            raise ValueError("weights must be finite and nonnegative, atoms finite")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"total mass must be 1 (got {w.sum()!r})")
        keep = w > 0
        pts, w = pts[keep], w[keep]
        pts, w = _sum_duplicates(pts, w)
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, x) -> "DiscreteMeasure":
        return cls(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1), [1.0])

    @classmethod
    def uniform_on(cls, points) -> "DiscreteMeasure":
        pts = as_points(points)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @classmethod
    def normalized(cls, points, weights) -> "DiscreteMeasure":
        w = np.asarray(weights, dtype=float)
        return cls(points, w / w.sum())

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.weights.size

    def __repr__(self):
        return f"DiscreteMeasure(atoms={len(self)}, d={self.dim})"

    def integrate(self, fn) -> float:
        """``int fn d(mu)`` for ``fn`` mapping an ``(n, d)`` array to ``(n,)``."""
        return float(np.dot(self.weights, fn(self.points)))

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def second_moment(self) -> np.ndarray:
        return self.weights @ self.points**2

    def variance(self) -> np.ndarray:
        return self.second_moment() - self.mean() ** 2

    def support(self, weight_floor: float = 0.0) -> PointCloud:
        keep = self.weights >= weight_floor
        if not keep.any():
            raise ValueError(f"no atom has weight >= {weight_floor}")
        return PointCloud(self.points[keep])

    def canonical(self, merge_radius: float = DEFAULT_MERGE_RADIUS) -> "DiscreteMeasure":
        reps, labels = merge_clusters(self.points, merge_radius)
        w = np.bincount(labels, weights=self.weights, minlength=reps.shape[0])
        return DiscreteMeasure(reps, w / w.sum())


def _sum_duplicates(pts: np.ndarray, w: np.ndarray):
    order = lexsort_points(pts)
    pts, w = pts[order], w[order]
    if pts.shape[0] < 2:
        return pts.copy(), w.copy()
    new = np.ones(pts.shape[0], dtype=bool)
    new[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    group = np.cumsum(new) - 1
    return pts[new].copy(), np.bincount(group, weights=w)


def snap_to_grid(points: np.ndarray, weights: np.ndarray, origin: np.ndarray, h: float):
    """Move atoms to the nearest node of the grid ``origin + h Z^d`` and add up
    co-located weights.  Keyed on integer grid indices, so the result does not
    depend on the input order."""
    keys = np.rint((points - origin) / h).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    w = np.bincount(inverse.reshape(-1), weights=weights, minlength=uniq.shape[0])
    return origin + uniq * h, w


def transfer_step(
    f: IfsFamily,
    mu: DiscreteMeasure,
    p: ParamMeasure,
    lam_net: np.ndarray | None = None,
    grid_h: float | None = None,
    budget: int = DEFAULT_ATOM_BUDGET,
) -> DiscreteMeasure:
    """One application of the transfer operator: push ``mu`` forward under every
    net parameter and average with the parameter weights.

    With ``grid_h`` the result is consolidated on a grid anchored at the
    domain corner; otherwise only exact duplicates are merged.
    """
    if mu.dim != f.dim:
        raise DimensionError(f"measure has dimension {mu.dim}, system {f.dim}")
    codes = f.space.net() if lam_net is None else lam_net
    q = p.net_weights(codes)
    keep = q > 0
    codes, q = codes[keep], q[keep]
    if len(codes) * len(mu) > budget:
        raise BudgetError(
            f"transfer step would create {len(codes) * len(mu)} atoms (budget {budget}); use a coarser grid"
        )
    images = f.image_all(codes, mu.points)
    weights = np.repeat(q, len(mu)) * np.tile(mu.weights, len(codes))
    if grid_h is not None:
        images, weights = snap_to_grid(images, weights, f.domain.lo, grid_h)
    return DiscreteMeasure(images, weights / weights.sum())


def pushforward_mean(f: IfsFamily, mu: DiscreteMeasure, p: ParamMeasure, lam_net=None) -> np.ndarray:
    """``sum_lam p(lam) * mean((w_lam)_* mu)``, computed map by map."""
    codes = f.space.net() if lam_net is None else lam_net
    q = p.net_weights(codes)
    total = np.zeros(f.dim)
    for c, qc in zip(codes, q):
        img = f.map_batch(np.repeat(np.asarray(c)[None], len(mu), axis=0), mu.points)
        total = total + qc * (mu.weights @ img)
    return total


def _w1_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    xs = np.concatenate([mu.points[:, 0], nu.points[:, 0]])
    signed = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(xs, kind="stable")
    xs, signed = xs[order], signed[order]
    cdf_gap = np.cumsum(signed)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(xs)))


def cost_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    acc = (x[:, None, 0] - y[None, :, 0]) ** 2
    for k in range(1, x.shape[1]):
        acc = acc + (x[:, None, k] - y[None, :, k]) ** 2
    return np.sqrt(acc)


def optimal_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, budget: int = DEFAULT_SOLVER_BUDGET) -> TransportPlan:
    """Exact optimal coupling between two measures (any dimension)."""
    if mu.dim != nu.dim:
        raise DimensionError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    return min_cost_transport(mu.weights, nu.weights, cost_matrix(mu.points, nu.points), budget)


def kantorovich_distance(mu: DiscreteMeasure, nu: DiscreteMeasure, budget: int = DEFAULT_SOLVER_BUDGET) -> float:
    """Hutchinson (Wasserstein-1) distance.

    Exact in both routes: the CDF integral in one dimension, min-cost flow
    on the atom graph otherwise (at most ``budget`` atoms per side).
    """
    if mu.dim != nu.dim:
        raise DimensionError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if mu.dim == 1:
        return _w1_1d(mu, nu)
    return optimal_plan(mu, nu, budget).cost


def kantorovich_upper_bound(mu: DiscreteMeasure, nu: DiscreteMeasure, origin, side: float, depth: int) -> float:
    """Dyadic-tree upper bound on the Wasserstein-1 distance.

    Cells at level ``k`` are cubes of side ``side / 2^k`` anchored at
    ``origin``.  Mass that is unbalanced in a level-``k`` cell pays the
    diameter of that cell; within a leaf it pays the leaf diameter.
    """
    if mu.dim != nu.dim:
        raise DimensionError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    d = mu.dim
    pts = np.concatenate([mu.points, nu.points])
    signed = np.concatenate([mu.weights, -nu.weights])
    rel = (pts - np.asarray(origin, dtype=float)) / side
    diam0 = side * math.sqrt(d)
    total = 0.0
    for k in range(1, depth + 1):
        keys = np.floor(rel * 2**k).astype(np.int64)
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        net = np.bincount(inv.reshape(-1), weights=signed)
        total += diam0 / 2**k * float(np.abs(net).sum())
    # mass matched inside a leaf moves at most one leaf diameter
    total += diam0 / 2**depth
    return total


@dataclass
class MeasureTraceRow:
    iteration: int
    gap: float
    atoms: int
    grid_h: float
    method: str
    support_gap: float = 0.0


@dataclass
class InvariantMeasureResult:
    measure: DiscreteMeasure
    trace: list = field(default_factory=list)
    grid_h: float | None = None
    bias_bound: float = 0.0

    def __iter__(self):
        return iter((self.measure, self.trace))


def _gap(mu, nu, f: IfsFamily, grid_h, budget) -> tuple[float, str]:
    if mu.dim == 1 or max(len(mu), len(nu)) <= budget:
        return kantorovich_distance(mu, nu, budget), "exact"
    side = float(np.max(f.domain.sides)) or 1.0
    leaf = grid_h or side / 2**12
    depth = max(1, int(math.ceil(math.log2(side / leaf))) + 1)
    return kantorovich_upper_bound(mu, nu, f.domain.lo, side, depth), "tree_bound"


def compute_invariant_measure(
    f: IfsFamily,
    p: ParamMeasure,
    seed: DiscreteMeasure | None = None,
    lam_net: np.ndarray | None = None,
    tol: float = 1e-3,
    n_max: int = 200,
    grid_h: float | None = None,
    solver_budget: int = DEFAULT_SOLVER_BUDGET,
    atom_budget: int = DEFAULT_ATOM_BUDGET,
) -> InvariantMeasureResult:
    """Iterate the transfer operator from ``seed`` until successive iterates are
    within ``tol`` in the Kantorovich metric and their supports are within
    ``tol`` in the Hausdorff metric.

    The second condition matters when little mass sits near the edge of the
    attractor: the Kantorovich gap can be tiny while the support still lags.

    ``grid_h`` defaults to ``tol / 8``; pass ``0`` to disable snapping.  When
    the supports are too large for the exact solver (d >= 2), a dyadic-tree
    upper bound on the gap is used instead and the trace says so.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    h = tol / 8 if grid_h is None else (grid_h or None)
    mu = seed if seed is not None else DiscreteMeasure.dirac(f.domain.center)
    trace = []
    gap = math.inf
    for it in range(1, n_max + 1):
        nxt = transfer_step(f, mu, p, lam_net, h, atom_budget)
        gap, method = _gap(mu, nxt, f, h, solver_budget)
        support_gap = hausdorff_distance(mu.points, nxt.points)
        trace.append(MeasureTraceRow(it, gap, len(nxt), h or 0.0, method, support_gap))
        mu = nxt
        if gap < tol and support_gap < tol:
            bias = (math.sqrt(f.dim) / 2 * h) if h else 0.0
            ratio = f.contraction_ratio()
            if bias and ratio is not None and ratio < 1:
                bias = bias / (1 - ratio)
            return InvariantMeasureResult(mu, trace, h, bias)
    raise NonConvergenceError(
        f"transfer operator iterates did not settle below {tol} within {n_max} steps "
        f"(last gap {gap:.3g}, support gap {support_gap:.3g})",
        trace=trace,
        last_gap=gap,
    )


def seed_independence_check(
    f: IfsFamily, p: ParamMeasure, seeds: list, tol: float, **kwargs
) -> float:
    """Largest pairwise Kantorovich distance between the limits reached from
    each seed measure."""
    if len(seeds) < 2:
        raise ValueError("need at least two seed measures")
    limits = [compute_invariant_measure(f, p, s, tol=tol, **kwargs).measure for s in seeds]
    budget = kwargs.get("solver_budget", DEFAULT_SOLVER_BUDGET)
    worst = 0.0
    for i in range(len(limits)):
        for j in range(i + 1, len(limits)):
            worst = max(worst, kantorovich_distance(limits[i], limits[j], budget))
    return worst


def support_vs_attractor(nu: DiscreteMeasure, k, weight_floor: float = 0.0) -> float:
    """Hausdorff distance between the atoms of ``nu`` with weight at least
    ``weight_floor`` and the cloud ``k``."""
    if nu.dim != (k.dim if isinstance(k, PointCloud) else as_points(k).shape[1]):
        raise DimensionError("measure and attractor have different dimensions")
    keep = nu.weights >= weight_floor
    if not keep.any():
        raise ValueError(f"every atom is below the weight floor {weight_floor}")
    return hausdorff_distance(nu.points[keep], k)


def write_measure_csv(path, mu: DiscreteMeasure) -> None:
    header = [f"x{i}" for i in range(mu.dim)] + ["weight"]
    rows = np.column_stack([mu.points, mu.weights]).tolist()
    write_csv(path, header, rows)


def read_measure_csv(path) -> DiscreteMeasure:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return DiscreteMeasure.normalized(data[:, :-1], data[:, -1])


def write_trace_csv(path, trace: list) -> None:
    write_csv(
        path,
        ["iteration", "gap", "atoms", "grid_h", "method", "support_gap"],
        [(r.iteration, float(r.gap), r.atoms, float(r.grid_h), r.method, float(r.support_gap)) for r in trace],
    )
