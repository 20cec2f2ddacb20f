"""Phase-space geometry: point clouds, Hausdorff distance, diameters and grids.

The phase space is always a closed box in R^d (d <= 3) with the Euclidean
metric.  Points are plain ``numpy`` arrays of shape ``(d,)``; finite sets of
points are wrapped in :class:`PointCloud`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import BudgetError, DimensionError

#: Clouds are deduplicated at this radius unless the caller says otherwise.
DEFAULT_MERGE_RADIUS = 1e-9

#: Largest grid :func:`epsilon_net` will build.
DEFAULT_NET_BUDGET = 2_000_000

#: Pair count below which the Hausdorff distance is computed by brute force.
BRUTE_FORCE_PAIRS = 256 * 256

_CHUNK = 1 << 22


def as_points(data) -> np.ndarray:
    """Coerce ``data`` to a float array of shape ``(n, d)``; a flat sequence is
    read as ``n`` one-dimensional points."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"expected an (n, d) array of points, got shape {arr.shape}")
    return arr


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce a scalar or coordinate sequence to a point of shape ``(d,)``."""
    arr = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if dim is not None and arr.size != dim:
        raise DimensionError(f"point has dimension {arr.size}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point has non-finite coordinates: {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """A nonempty finite set of points of uniform dimension.

    The array is stored read-only; operations return new clouds.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        if pts.shape[0] == 0:
            raise ValueError("a point cloud must be nonempty")
        if not 1 <= pts.shape[1] <= 3:
            raise DimensionError(f"dimension must be 1, 2 or 3, got {pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud has non-finite coordinates")
        pts = np.array(pts, dtype=float, copy=True)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def of(cls, *points) -> "PointCloud":
        """Build a cloud from individual points (scalars for d = 1)."""
        return cls(np.array([np.atleast_1d(np.asarray(p, dtype=float)) for p in points]))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, d={self.dim})"

    def canonical(self, merge_radius: float = DEFAULT_MERGE_RADIUS) -> "PointCloud":
        return PointCloud(canonicalize(self.points, merge_radius))

    def same_set(self, other: "PointCloud", merge_radius: float = DEFAULT_MERGE_RADIUS) -> bool:
        """Set equality after canonicalization at ``merge_radius``."""
        a = canonicalize(self.points, merge_radius)
        b = canonicalize(other.points, merge_radius)
        return a.shape == b.shape and hausdorff_distance(a, b) <= merge_radius


@dataclass(frozen=True, eq=False)
class BoxDomain:
    """The compact working region ``[lo_1, hi_1] x ... x [lo_d, hi_d]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi, lo.size)
        if np.any(lo > hi):
            raise ValueError(f"box needs lo <= hi componentwise, got lo={lo}, hi={hi}")
        if not 1 <= lo.size <= 3:
            raise DimensionError(f"box dimension must be 1, 2 or 3, got {lo.size}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, dim: int = 1) -> "BoxDomain":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    @property
    def diameter(self) -> float:
        return float(np.sqrt(np.sum(self.sides**2)))

    def corners(self) -> np.ndarray:
        grids = np.meshgrid(*[(l, h) for l, h in zip(self.lo, self.hi)], indexing="ij")
        return np.unique(np.stack([g.ravel() for g in grids], axis=1), axis=0)

    def excess(self, points) -> float:
        """Largest distance by which any coordinate of ``points`` leaves the box."""
        pts = as_points(points)
        below = np.max(self.lo - pts, initial=0.0)
        above = np.max(pts - self.hi, initial=0.0)
        return float(max(below, above))

    def contains(self, points, tol: float = 0.0) -> bool:
        return self.excess(points) <= tol


def _points_of(a) -> np.ndarray:
    return a.points if isinstance(a, PointCloud) else as_points(a)


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Per-coordinate accumulation keeps the arithmetic identical in every code path.
    acc = (a[:, None, 0] - b[None, :, 0]) ** 2
    for k in range(1, a.shape[1]):
        acc = acc + (a[:, None, k] - b[None, :, k]) ** 2
    return np.sqrt(acc)


def _rowwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    acc = (a[..., 0] - b[..., 0]) ** 2
    for k in range(1, a.shape[-1]):
        acc = acc + (a[..., k] - b[..., k]) ** 2
    return np.sqrt(acc)


def _directed_brute(a: np.ndarray, b: np.ndarray) -> float:
    """sup_{x in a} d(x, b) by exhaustive search."""
    rows = max(1, _CHUNK // max(1, b.shape[0]))
    best = 0.0
    for start in range(0, a.shape[0], rows):
        d = _pairwise(a[start:start + rows], b)
        best = max(best, float(d.min(axis=1).max()))
    return best


def _directed_tree(a: np.ndarray, b: np.ndarray, tree: cKDTree) -> float:
    # The tree only proposes candidates; distances are recomputed with the
    # brute-force arithmetic so both paths give identical floats.
    k = min(4, b.shape[0])
    _, idx = tree.query(a, k=k)
    idx = idx.reshape(a.shape[0], k)
    d = _rowwise(a[:, None, :], b[idx])
    return float(d.min(axis=1).max())


def directed_hausdorff(a, b) -> float:
    """One-sided distance ``sup_{x in a} inf_{y in b} |x - y|``."""
    pa, pb = _points_of(a), _points_of(b)
    if pa.shape[1] != pb.shape[1]:
        raise DimensionError(f"dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    if pa.shape[0] * pb.shape[0] <= BRUTE_FORCE_PAIRS:
        return _directed_brute(pa, pb)
    return _directed_tree(pa, pb, cKDTree(pb))


def hausdorff_distance(a, b) -> float:
    """Hausdorff distance between two finite point sets.

    Exhaustive below ``BRUTE_FORCE_PAIRS`` point pairs, k-d tree accelerated
    above; both routes share the distance arithmetic.
    """
    pa, pb = _points_of(a), _points_of(b)
    if pa.shape[1] != pb.shape[1]:
        raise DimensionError(f"dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    return max(directed_hausdorff(pa, pb), directed_hausdorff(pb, pa))


def hausdorff_brute(a, b) -> float:
    """Reference double loop, used as a test oracle."""
    pa, pb = _points_of(a), _points_of(b)
    if pa.shape[1] != pb.shape[1]:
        raise DimensionError(f"dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    return max(_directed_brute(pa, pb), _directed_brute(pb, pa))


def diameter(a) -> float:
    """Largest pairwise distance; 0 for a singleton."""
    pts = _points_of(a)
    if pts.shape[0] == 0:
        raise ValueError("diameter of an empty cloud")
    if pts.shape[1] == 1:
        return float(pts.max() - pts.min())
    rows = max(1, _CHUNK // pts.shape[0])
    best = 0.0
    for start in range(0, pts.shape[0], rows):
        best = max(best, float(_pairwise(pts[start:start + rows], pts).max()))
    return best


def batch_diameter(clouds: np.ndarray) -> np.ndarray:
    """Diameters of a stack of equally sized clouds, shape ``(w, n, d)``."""
    if clouds.shape[-1] == 1:
        return clouds[..., 0].max(axis=1) - clouds[..., 0].min(axis=1)
    acc = (clouds[:, :, None, 0] - clouds[:, None, :, 0]) ** 2
    for k in range(1, clouds.shape[-1]):
        acc = acc + (clouds[:, :, None, k] - clouds[:, None, :, k]) ** 2
    return np.sqrt(acc.max(axis=(1, 2)))


def grid_counts(domain: BoxDomain, eps: float) -> np.ndarray:
    """Number of grid points per axis for spacing at most ``eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return np.array([int(math.ceil(s / eps - 1e-12)) + 1 if s > 0 else 1 for s in domain.sides])


def epsilon_net(domain: BoxDomain, eps: float, budget: int = DEFAULT_NET_BUDGET) -> PointCloud:
    """Regular grid over ``domain`` with spacing ``<= eps`` that includes both faces.

    Axis ``i`` is split into ``ceil(side_i / eps)`` equal intervals, so every
    point of the box is within ``sqrt(d)/2 * eps`` of the net.
    """
    counts = grid_counts(domain, eps)
    total = int(np.prod(counts))
    if total > budget:
        raise BudgetError(f"epsilon net with eps={eps} needs {total} points, over the point budget {budget}")
    axes = [np.linspace(l, h, c) for l, h, c in zip(domain.lo, domain.hi, counts)]
    grids = np.meshgrid(*axes, indexing="ij")
    return PointCloud(np.stack([g.ravel() for g in grids], axis=1))


def lexsort_points(points: np.ndarray) -> np.ndarray:
    """Indices sorting ``points`` lexicographically by coordinate."""
    return np.lexsort(points.T[::-1])


def canonicalize(points, merge_radius: float = DEFAULT_MERGE_RADIUS) -> np.ndarray:
    """Sort lexicographically and drop points within ``merge_radius`` of a kept one.

    Greedy in sorted order, hence deterministic.
    """
    return merge_clusters(points, merge_radius)[0]


def merge_clusters(points: np.ndarray, merge_radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`canonicalize` but also returns, for every input point, the
    index of the kept representative it was merged into."""
    pts = as_points(points)
    order = lexsort_points(pts)
    spts = pts[order]
    n = spts.shape[0]
    rep = np.arange(n)
    if n > 1 and merge_radius > 0 and spts.shape[1] == 1:
        # sorted line: each kept point absorbs everything up to x + r
        xs = spts[:, 0]
        i = 0
        while i < n:
            j = int(np.searchsorted(xs, xs[i] + merge_radius, side="right"))
            rep[i:j] = i
            i = j
    elif n > 1 and merge_radius > 0:
        pairs = cKDTree(spts).query_pairs(merge_radius, output_type="ndarray")
        if pairs.size:
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            starts = np.searchsorted(pairs[:, 0], np.arange(n + 1))
            for i in np.unique(pairs[:, 0]):
                if rep[i] == i:
                    js = pairs[starts[i]:starts[i + 1], 1]
                    free = js[rep[js] == js]
                    rep[free] = i
    elif n > 1:
        same = np.all(spts[1:] == spts[:-1], axis=1)
        for j in np.nonzero(same)[0] + 1:
            rep[j] = rep[j - 1]
    kept = np.nonzero(rep == np.arange(n))[0]
    slot = np.full(n, -1)
    slot[kept] = np.arange(kept.size)
    labels = np.empty(n, dtype=np.int64)
    labels[order] = slot[rep]
    return spts[kept], labels


def format_float(x: float) -> str:
    return repr(float(x))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV with a one-line header; floats use round-trip ``repr``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_points_csv(path, cloud) -> None:
    pts = _points_of(cloud)
    write_csv(path, [f"x{i}" for i in range(pts.shape[1])], pts.tolist())


def read_points_csv(path) -> PointCloud:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return PointCloud(data)
