"""Exact discrete optimal transport by successive shortest paths.

The transportation problem between supplies ``a`` and demands ``b`` with cost
matrix ``C >= 0`` is solved as a min-cost flow on the bipartite graph.  Each
round runs a dense Dijkstra on reduced costs (Johnson potentials) from all
rows with remaining supply and augments along the cheapest path to a column
with remaining demand.  Masses are floats, so "zero" means below ``_EPS``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError

DEFAULT_SOLVER_BUDGET = 512

_EPS = 1e-15


@dataclass(frozen=True)
class TransportPlan:
    """Optimal coupling as a list of ``(source, target, mass)`` flows."""

    flows: list
    cost: float

    def as_matrix(self, n: int, m: int) -> np.ndarray:
        out = np.zeros((n, m))
        for i, j, mass in self.flows:
            out[i, j] += mass
        return out


def min_cost_transport(a, b, C, budget: int = DEFAULT_SOLVER_BUDGET) -> TransportPlan:
    """Minimize ``sum F_ij C_ij`` over couplings ``F`` of ``a`` and ``b``.

    ``a`` and ``b`` must have (numerically) equal totals.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    n, m = C.shape
    if a.shape != (n,) or b.shape != (m,):
        raise ValueError(f"shape mismatch: a{a.shape}, b{b.shape}, C{C.shape}")
    if max(n, m) > budget:
        raise BudgetError(f"transport problem {n}x{m} exceeds the solver budget of {budget} atoms per side")
    if np.any(C < 0):
        raise ValueError("costs must be nonnegative")
    if abs(a.sum() - b.sum()) > 1e-9 * max(1.0, a.sum()):
        raise ValueError(f"unbalanced problem: {a.sum()!r} vs {b.sum()!r}")

    supply = a.copy()
    demand = b.copy() * (a.sum() / b.sum())
    flow = np.zeros((n, m))
    pot_r = np.zeros(n)
    pot_c = np.zeros(m)
    inf = np.inf

    for _ in range(100 * (n + m) + 100):
        if supply.max(initial=0.0) <= _EPS or demand.max(initial=0.0) <= _EPS:
            break
        dist_r = np.where(supply > _EPS, 0.0, inf)
        dist_c = np.full(m, inf)
        done_r = np.zeros(n, dtype=bool)
        done_c = np.zeros(m, dtype=bool)
        pred_c = np.full(m, -1)  # row that reached each column
        pred_r = np.full(n, -1)  # column that reached each row (backward edge)
        target = -1
        while True:
            rr = np.where(done_r, inf, dist_r)
            cc = np.where(done_c, inf, dist_c)
            i = int(np.argmin(rr)) if n else -1
            j = int(np.argmin(cc)) if m else -1
            dr = rr[i] if n else inf
            dc = cc[j] if m else inf
            if dr == inf and dc == inf:
                break
            if dr <= dc:
                done_r[i] = True
                red = np.maximum(C[i] + pot_r[i] - pot_c, 0.0)
                cand = dr + red
                better = (cand < dist_c) & ~done_c
                dist_c[better] = cand[better]
                pred_c[better] = i
            else:
                done_c[j] = True
                if demand[j] > _EPS:
                    target = j
                    break
                back = (flow[:, j] > _EPS) & ~done_r
                if back.any():
                    red = np.maximum(-C[:, j] + pot_c[j] - pot_r, 0.0)
                    cand = dc + red
                    better = back & (cand < dist_r)
                    dist_r[better] = cand[better]
                    pred_r[better] = j
        if target < 0:
            raise RuntimeError("no augmenting path although supply remains")

        dt = dist_c[target]
        pot_r += np.minimum(np.where(np.isinf(dist_r), dt, dist_r), dt)
        pot_c += np.minimum(np.where(np.isinf(dist_c), dt, dist_c), dt)

        # walk back: column <- row (forward edge) <- column (backward edge) ...
        path = []
        j = target
        while True:
            i = pred_c[j]
            path.append((i, j))
            if pred_r[i] < 0:
                break
            j = pred_r[i]
        source = path[-1][0]
        delta = min(supply[source], demand[target])
        for k in range(len(path) - 1):
            i_back, j_back = path[k][0], path[k + 1][1]
            delta = min(delta, flow[i_back, j_back])
        for k, (i, j) in enumerate(path):
            flow[i, j] += delta
            if k + 1 < len(path):
                flow[i, path[k + 1][1]] -= delta
        supply[source] -= delta
        demand[target] -= delta

    if supply.max(initial=0.0) > 1e-12:
        raise RuntimeError("augmentation limit reached before all mass was shipped")
    flow[flow < 0] = 0.0
    idx = np.argwhere(flow > 0)
    flows = [(int(i), int(j), float(flow[i, j])) for i, j in idx]
    cost = float(np.sum(flow * C))
    return TransportPlan(flows, cost)
