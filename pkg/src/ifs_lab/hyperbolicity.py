"""Sampling diagnostics for weak and weak* hyperbolicity.

Both quantities are limits over all infinite words, so a finite tool can only
collect evidence: random words drawn uniformly from the parameter net plus
every constant word.  Compositions are evaluated in address order,
``w_{s1} o ... o w_{sn}``, so every prefix length needs its own pass over the
letters; all words are pushed through together as one batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .ifs_core import IfsFamily
from .metric import PointCloud, as_points, batch_diameter

DEFAULT_VERDICT_EPS = 1e-4


def _word_sample(f: IfsFamily, lam_net, n_max: int, words: int, seed: int):
    """Encoded words of length ``n_max``: every constant word, then ``words``
    random words with letters uniform on ``lam_net``."""
    codes = f.space.net() if lam_net is None else np.asarray(lam_net)
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.integers(0, len(codes), size=(words, n_max))
    const = np.repeat(np.arange(len(codes))[:, None], n_max, axis=1)
    idx = np.concatenate([const, picks], axis=0)
    return codes, idx


def _address_images(f: IfsFamily, codes, idx, points: np.ndarray, n: int) -> np.ndarray:
    """``w_{s1...sn}(points)`` for every word; shape ``(words, len(points), d)``."""
    W, P = idx.shape[0], points.shape[0]
    x = np.tile(points, (W, 1))
    for k in range(n - 1, -1, -1):
        letter = codes[np.repeat(idx[:, k], P)]
        x = f.map_batch(letter, x)
    return x.reshape(W, P, -1)


@dataclass
class DiameterProfile:
    n_values: np.ndarray
    sup_diam: np.ndarray
    words_sampled: int
    net_eps: float
    witness: list = field(default_factory=list)
    discretization: np.ndarray | None = None

    def rows(self):
        return [(int(n), float(d)) for n, d in zip(self.n_values, self.sup_diam)]


def _net_spacing(points: np.ndarray) -> float:
    if points.shape[0] < 2:
        return 0.0
    d, _ = cKDTree(points).query(points, k=2)
    return float(d[:, 1].max())


def diameter_profile(
    f: IfsFamily,
    x_net,
    lam_net=None,
    n_max: int = 60,
    words: int = 64,
    seed: int = 0,
) -> DiameterProfile:
    """Per prefix length ``n``, the largest sampled ``Diam(w_{s1...sn}(x_net))``.

    Also records, per ``n``, the largest image distance between net
    neighbours, an estimate of the discretization error of using the net in
    place of the whole box.
    """
    pts = x_net.points if isinstance(x_net, PointCloud) else as_points(x_net)
    codes, idx = _word_sample(f, lam_net, n_max, words, seed)
    eps = _net_spacing(pts)
    pairs = cKDTree(pts).query_pairs(eps * (1 + 1e-9), output_type="ndarray") if eps > 0 else np.zeros((0, 2), int)
    sup = np.empty(n_max)
    disc = np.empty(n_max)
    witness_idx = 0
    for n in range(1, n_max + 1):
        img = _address_images(f, codes, idx, pts, n)
        diams = batch_diameter(img)
        sup[n - 1] = diams.max()
        witness_idx = int(np.argmax(diams))
        if len(pairs):
            gaps = np.sqrt(np.sum((img[:, pairs[:, 0]] - img[:, pairs[:, 1]]) ** 2, axis=-1))
            disc[n - 1] = 2 * gaps.max()
        else:
            disc[n - 1] = 0.0
    witness = f.space.decode(codes[idx[witness_idx]])
    return DiameterProfile(np.arange(1, n_max + 1), sup, idx.shape[0], eps, witness, disc)


@dataclass
class HyperbolicityVerdict:
    verdict: str
    witness: list | None
    achieved_eps: float

    def text(self) -> str:
        lines = [f"verdict: {self.verdict}", f"achieved_eps: {self.achieved_eps!r}"]
        if self.witness is not None:
            lines.append("witness: " + " ".join(str(l) for l in self.witness))
        return "\n".join(lines) + "\n"


def hyperbolicity_verdict(profile: DiameterProfile, eps: float = DEFAULT_VERDICT_EPS) -> HyperbolicityVerdict:
    """Classify a profile.

    ``weakly_hyperbolic_evidence`` when the sup diameter ends below ``eps``;
    ``counterexample`` when it ends above ``eps`` and stopped decreasing over
    the second half of the run (the witness word is the maximizer at
    ``n_max``); ``inconclusive`` otherwise.
    """
    final = float(profile.sup_diam[-1])
    if final < eps:
        return HyperbolicityVerdict("weakly_hyperbolic_evidence", None, final)
    half = float(profile.sup_diam[len(profile.sup_diam) // 2])
    if final >= half * (1 - 1e-9):
        return HyperbolicityVerdict("counterexample", profile.witness, final)
    return HyperbolicityVerdict("inconclusive", None, final)


@dataclass
class ProbeTable:
    """Largest sampled pair distance after ``n`` letters, plus ``n_0`` per eps."""

    eta: float
    n_values: np.ndarray
    max_dist: np.ndarray
    eps_list: list
    n0: list

    def n0_for(self, eps: float) -> int | None:
        below = self.max_dist < eps
        if not below[-1]:
            return None
        # last n at which the bound still fails; n_0 is the next one
        fails = np.nonzero(~below)[0]
        return int(self.n_values[fails[-1] + 1]) if fails.size else int(self.n_values[0])

    def rows(self):
        return [(float(e), "" if n is None else int(n)) for e, n in zip(self.eps_list, self.n0)]


def _probe_pairs(f: IfsFamily, eta: float, pairs: int, rng: np.random.Generator):
    dom = f.domain
    d = dom.dim
    x = dom.lo + dom.sides * rng.random((pairs, d))
    direction = rng.normal(size=(pairs, d))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    radius = eta * rng.random((pairs, 1))
    y = np.clip(x + radius * direction, dom.lo, dom.hi)
    # one nearly maximal pair along every axis from the low corner
    extra_x, extra_y = [], []
    for axis in range(d):
        reach = min(eta, float(dom.sides[axis])) * (1 - 1e-12)
        a = dom.lo.copy()
        b = dom.lo.copy()
        b[axis] += reach
        extra_x.append(a)
        extra_y.append(b)
    return np.vstack([x, extra_x]), np.vstack([y, extra_y])


def weak_star_probe(
    f: IfsFamily,
    eta: float,
    eps_list,
    n_max: int = 60,
    pairs: int = 64,
    words: int = 32,
    seed: int = 0,
    lam_net=None,
) -> ProbeTable:
    """Estimate ``n_0(eps)``: the least ``n`` after which every sampled pair at
    distance below ``eta`` is mapped to within ``eps`` by every sampled word.
    ``None`` marks eps values not reached by ``n_max``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    xs, ys = _probe_pairs(f, eta, pairs, rng)
    codes, idx = _word_sample(f, lam_net, n_max, words, int(rng.integers(2**63)))
    both = np.vstack([xs, ys])
    P = xs.shape[0]
    out = np.empty(n_max)
    for n in range(1, n_max + 1):
        img = _address_images(f, codes, idx, both, n)
        dist = np.sqrt(np.sum((img[:, :P] - img[:, P:]) ** 2, axis=-1))
        out[n - 1] = dist.max()
    table = ProbeTable(eta, np.arange(1, n_max + 1), out, [float(e) for e in eps_list], [])
    table.n0 = [table.n0_for(e) for e in table.eps_list]
    return table


@dataclass
class EquivalenceReport:
    eps: float
    weak: bool
    weak_star: bool

    @property
    def agree(self) -> bool:
        return self.weak == self.weak_star

    def text(self) -> str:
        status = "agree" if self.agree else "DISAGREE (sampling artifact: the two notions coincide on compact spaces)"
        return f"eps: {self.eps!r}\nweak: {self.weak}\nweak_star: {self.weak_star}\nstatus: {status}\n"


def equivalence_check(profile: DiameterProfile, probe: ProbeTable, eps: float) -> EquivalenceReport:
    """Do the diameter profile and the pair probe both reach ``eps`` (or both
    fail to) within their horizons?"""
    weak = bool(profile.sup_diam[-1] < eps)
    weak_star = probe.n0_for(eps) is not None
    return EquivalenceReport(float(eps), weak, weak_star)


def diameter_sensitivity(f: IfsFamily, x_net, word_codes: np.ndarray, delta: float, samples: int = 16, seed: int = 0) -> float:
    """Largest change of ``Diam(w_word(x_net))`` when every letter of a box-space
    word moves by at most ``delta`` (per coordinate, clipped to the box)."""
    pts = x_net.points if isinstance(x_net, PointCloud) else as_points(x_net)
    space = f.space
    base = np.asarray(word_codes, dtype=float).reshape(len(word_codes), -1)
    rng = np.random.Generator(np.random.PCG64(seed))
    perturbed = base[None] + delta * (2 * rng.random((samples,) + base.shape) - 1)
    perturbed = np.clip(perturbed, space.lo, space.hi)
    allw = np.concatenate([base[None], perturbed], axis=0)
    W, n = allw.shape[0], allw.shape[1]
    P = pts.shape[0]
    x = np.tile(pts, (W, 1))
    for k in range(n - 1, -1, -1):
        x = f.map_batch(np.repeat(allw[:, k], P, axis=0), x)
    diams = batch_diameter(x.reshape(W, P, -1))
    return float(np.max(np.abs(diams[1:] - diams[0])))


def n_for_eps(profile: DiameterProfile, eps: float) -> int | None:
    """Smallest ``n`` with ``sup_diam(m) < eps`` for all ``m >= n`` in the profile."""
    below = profile.sup_diam < eps
    if not below[-1]:
        return None
    fails = np.nonzero(~below)[0]
    return int(profile.n_values[fails[-1] + 1]) if fails.size else int(profile.n_values[0])


def expected_cylinder_depth(ratio: float, eps: float) -> int:
    return int(math.ceil(math.log(1 / eps) / math.log(1 / ratio)))
