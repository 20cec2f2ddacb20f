"""Birkhoff averages along random forward orbits."""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ifs_core import IfsFamily, ParamMeasure, WordStream, derive_seed, run_forward
from .measure import DiscreteMeasure
from .metric import as_point, write_csv

_COORD = re.compile(r"^x(\d)$")
_SQUARE = re.compile(r"^x(\d)\^2$")
_DIST = re.compile(r"^dist\(([^()]*)\)$")


def observable(name: str, dim: int):
    """Look up a named observable for points of dimension ``dim``.

    Recognised names: ``one``, ``x0``/``x1``/``x2`` (coordinates),
    ``x0^2`` etc. (squared coordinates) and ``dist(a,b,...)`` (distance to a
    fixed point).  The returned callable maps ``(n, d)`` arrays to ``(n,)``.
    """
    name = name.strip()
    if name == "one":
        return lambda x: np.ones(x.shape[0])
    m = _COORD.match(name)
    if m and int(m.group(1)) < dim:
        i = int(m.group(1))
        return lambda x: x[:, i].copy()
    m = _SQUARE.match(name)
    if m and int(m.group(1)) < dim:
        i = int(m.group(1))
        return lambda x: x[:, i] ** 2
    m = _DIST.match(name)
    if m:
        try:
            c = as_point([float(v) for v in m.group(1).split(",")], dim)
        except ValueError:
            c = None
        if c is not None:
            return lambda x: np.sqrt(np.sum((x - c) ** 2, axis=1))
    raise ValueError(f"unknown observable {name!r} for dimension {dim} (try one, x0, x0^2, dist(0.5,...))")


def _averages(f: IfsFamily, codes: np.ndarray, x0: np.ndarray, fns: list, n: int) -> np.ndarray:
    """Time averages over ``j = 0..n-1`` of ``fns[i]`` along orbit ``i``."""
    acc = np.zeros(x0.shape[0])
    groups = {}
    for i, fn in enumerate(fns):
        groups.setdefault(id(fn), (fn, []))[1].append(i)
    groups = [(fn, np.array(idx)) for fn, idx in groups.values()]

    def visit(j, x):
        if j < n:
            for fn, idx in groups:
                acc[idx] += fn(x[idx])

    run_forward(f, codes[: n - 1], x0, visit)
    return acc / n


def birkhoff_average(f: IfsFamily, stream, x, observable_name: str, n: int) -> float:
    """``(1/n) sum_{j=0}^{n-1} phi(x_j)`` along the forward orbit of ``x``
    (the ``j = 0`` term is ``phi(x)`` itself)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    fn = observable(observable_name, f.dim)
    codes = stream.take(n - 1)
    codes = codes[:, None] if codes.ndim == 1 else codes[:, None, :]
    return float(_averages(f, codes, as_point(x, f.dim)[None, :], [fn], n)[0])


@dataclass
class ErgodicRow:
    observable: str
    start: int
    trial: int
    seed: int
    average: float
    reference: float
    error: float
    passed: bool


@dataclass
class ErgodicReport:
    rows: list
    n: int
    tol: float
    starts: list = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(r.passed for r in self.rows)

    @property
    def total(self) -> int:
        return len(self.rows)

    @property
    def pass_fraction(self) -> float:
        return self.passed / self.total if self.rows else 0.0

    def fraction_for(self, observable_name: str) -> float:
        rows = [r for r in self.rows if r.observable == observable_name]
        return sum(r.passed for r in rows) / len(rows)

    def write(self, path) -> None:
        write_csv(
            path,
            ["observable", "start", "trial", "average", "reference", "error", "pass"],
            [(r.observable, r.start, r.trial, r.average, r.reference, r.error, int(r.passed)) for r in self.rows],
        )

    def summary(self) -> dict:
        out = {"n": self.n, "tol": self.tol, "trials_passed": self.passed, "trials_total": self.total,
               "pass_fraction": self.pass_fraction}
        for name in dict.fromkeys(r.observable for r in self.rows):
            rows = [r for r in self.rows if r.observable == name]
            out[f"mean_average[{name}]"] = float(np.mean([r.average for r in rows]))
            out[f"reference[{name}]"] = rows[0].reference
        return out


def default_tol(f: IfsFamily, n: int, measure_tol: float = 0.0) -> float:
    return max(10 * f.domain.diameter / math.sqrt(n), measure_tol)


def ergodicity_test(
    f: IfsFamily,
    p: ParamMeasure,
    observables: list,
    starts: list,
    n: int,
    trials: int,
    seed: int,
    nu: DiscreteMeasure,
    tol: float | None = None,
    workers: int = 1,
) -> ErgodicReport:
    """Compare time averages with space averages against ``nu``.

    Every ``(observable, start, trial)`` triple gets its own stream, seeded
    from ``(seed, observable index, start index, trial)``; a triple passes when
    ``|average - int phi d(nu)| <= tol``.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    tol = default_tol(f, n) if tol is None else tol
    fns = [observable(o, f.dim) for o in observables]
    refs = [nu.integrate(fn) for fn in fns]
    pts = [as_point(s, f.dim) for s in starts]
    jobs = [(oi, si, t) for oi in range(len(fns)) for si in range(len(pts)) for t in range(trials)]
    seeds = [derive_seed(seed, oi, si, t) for oi, si, t in jobs]

    def run(chunk):
        codes = np.stack([WordStream(p, seeds[j]).take(n - 1) for j in chunk], axis=1)
        x0 = np.stack([pts[jobs[j][1]] for j in chunk])
        per = [fns[jobs[j][0]] for j in chunk]
        return _averages(f, codes, x0, per, n)

    workers = max(1, min(int(workers), len(jobs)))
    chunks = [list(c) for c in np.array_split(np.arange(len(jobs)), workers)]
    if workers == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, chunks))
    averages = np.concatenate(parts)

    rows = []
    for (oi, si, t), s, avg in zip(jobs, seeds, averages):
        err = abs(float(avg) - refs[oi])
        rows.append(ErgodicRow(observables[oi], si, t, s, float(avg), refs[oi], err, err <= tol))
    return ErgodicReport(rows, n, tol, [p.tolist() for p in pts])
