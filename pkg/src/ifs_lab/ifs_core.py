"""Parameter spaces, parameter measures, words, and the map ``w : Lambda x X -> X``.

Two composition orders appear throughout and are kept apart on purpose:

* address order, ``compose_apply(f, (s1, ..., sn), x) = w_s1(w_s2(... w_sn(x)))``,
  where the *last* letter acts first;
* orbit order, ``x_{k+1} = w_{s_{k+1}}(x_k)``, where the *first* letter acts first.

Internally a parameter value is "encoded": an integer index for finite
spaces, a length-``k`` float vector for box spaces.  Batched maps take one
encoded parameter per point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvarianceError, NonConvergenceError
from .metric import BoxDomain, as_point, as_points, epsilon_net

INVARIANCE_TOL = 1e-9


# -- parameter spaces ---------------------------------------------------------


@dataclass(frozen=True)
class FiniteSpace:
    """Finite alphabet of labels (1-based integers by default)."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise ValueError("a finite parameter space needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be distinct: {labels}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of_size(cls, m: int) -> "FiniteSpace":
        return cls(tuple(range(1, m + 1)))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"{label!r} is not a label of {self.labels}") from None

    def encode(self, letters: Sequence) -> np.ndarray:
        return np.array([self.index(l) for l in letters], dtype=np.int64)

    def encode_one(self, letter) -> np.ndarray:
        return np.array([self.index(letter)], dtype=np.int64)

    def decode(self, codes) -> list:
        return [self.labels[int(c)] for c in np.asarray(codes).reshape(-1)]

    def net(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class BoxSpace:
    """Parameter box ``[lo, hi]`` in R^k with a net of the given spacing."""

    lo: np.ndarray
    hi: np.ndarray
    net_spacing: float

    def __post_init__(self):
        box = BoxDomain(self.lo, self.hi)
        if not self.net_spacing > 0:
            raise ValueError(f"net_spacing must be positive, got {self.net_spacing}")
        object.__setattr__(self, "lo", box.lo)
        object.__setattr__(self, "hi", box.hi)

    @property
    def box(self) -> BoxDomain:
        return BoxDomain(self.lo, self.hi)

    @property
    def k(self) -> int:
        return self.lo.size

    @property
    def size(self) -> int:
        return len(self.net())

    def _check(self, arr: np.ndarray) -> np.ndarray:
        if arr.shape[1] != self.k:
            raise ValueError(f"parameter has dimension {arr.shape[1]}, expected {self.k}")
        if not self.box.contains(arr, INVARIANCE_TOL):
            raise ValueError(f"parameter outside the box [{self.lo}, {self.hi}]")
        return arr

    def encode(self, letters: Sequence) -> np.ndarray:
        if len(letters) == 0:
            return np.zeros((0, self.k))
        arr = np.array([as_point(l) for l in letters], dtype=float)
        return self._check(arr)

    def encode_one(self, letter) -> np.ndarray:
        return self._check(as_point(letter, self.k)[None, :])

    def decode(self, codes) -> list:
        arr = np.asarray(codes, dtype=float).reshape(-1, self.k)
        return [row.copy() if self.k > 1 else float(row[0]) for row in arr]

    def net(self) -> np.ndarray:
        return epsilon_net(self.box, self.net_spacing).points


ParameterSpace = FiniteSpace | BoxSpace


@dataclass(frozen=True, eq=False)
class ParamMeasure:
    """Probability on the parameter space.

    Finite spaces carry a probability vector; box spaces only support the
    normalized Lebesgue measure.
    """

    space: ParameterSpace
    probs: np.ndarray | None = None

    def __post_init__(self):
        if isinstance(self.space, FiniteSpace):
            probs = np.full(self.space.size, 1.0 / self.space.size) if self.probs is None else np.asarray(self.probs, float)
            if probs.shape != (self.space.size,):
                raise ValueError(f"need {self.space.size} probabilities, got {probs.shape}")
            if np.any(probs < 0) or not np.all(np.isfinite(probs)):
                raise ValueError(f"probabilities must be nonnegative: {probs}")
            if abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError(f"probabilities must sum to 1 (got {probs.sum()!r})")
            probs = probs.copy()
            probs.setflags(write=False)
            object.__setattr__(self, "probs", probs)
        elif self.probs is not None:
            raise ValueError("box parameter measures are uniform; do not pass probabilities")

    @classmethod
    def uniform(cls, space: ParameterSpace) -> "ParamMeasure":
        return cls(space)

    @property
    def is_finite(self) -> bool:
        return isinstance(self.space, FiniteSpace)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` i.i.d. encoded letters.  Consumes exactly ``n`` (finite) or
        ``n * k`` (box) uniforms so the stream is prefix-consistent."""
        if self.is_finite:
            u = rng.random(n)
            cdf = np.cumsum(self.probs)
            cdf[-1] = 1.0
            return np.minimum(np.searchsorted(cdf, u, side="right"), self.space.size - 1).astype(np.int64)
        sp = self.space
        return sp.lo + (sp.hi - sp.lo) * rng.random((n, sp.k))

    def net_weights(self, codes: np.ndarray) -> np.ndarray:
        """Quadrature weights of the measure on a parameter net."""
        if self.is_finite:
            return self.probs[np.asarray(codes, dtype=np.int64)]
        n = len(codes)
        return np.full(n, 1.0 / n)


# -- words and streams --------------------------------------------------------


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, *keys)``."""
    state = np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(k) for k in keys]]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


@dataclass(frozen=True)
class WordStream:
    """Seeded i.i.d. infinite word with law ``law``.

    ``take(n)`` always replays the same letters for the same ``(seed, law,
    offset)``; ``shifted()`` drops the first letter.
    """

    law: ParamMeasure
    seed: int
    offset: int = 0

    @property
    def space(self) -> ParameterSpace:
        return self.law.space

    def take(self, n: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(self.seed))
        codes = self.law.draw(rng, self.offset + n)
        return codes[self.offset:]

    def letters(self, n: int) -> list:
        return self.space.decode(self.take(n))

    def shifted(self, k: int = 1) -> "WordStream":
        return WordStream(self.law, self.seed, self.offset + k)


@dataclass(frozen=True)
class ConstantStream:
    """The infinite word ``(letter, letter, ...)``."""

    space: ParameterSpace
    letter: object

    def take(self, n: int) -> np.ndarray:
        code = self.space.encode_one(self.letter)
        return np.repeat(code, n, axis=0)

    def letters(self, n: int) -> list:
        return [self.letter] * n

    def shifted(self, k: int = 1) -> "ConstantStream":
        return self


# -- map families -------------------------------------------------------------


class IfsFamily:
    """A continuous map ``w : Lambda x X -> X`` on a box ``X``.

    Subclasses implement :meth:`map_batch`.  Construction checks numerically
    that the parameter net maps a grid of ``X`` back into ``X``.
    """

    kind = "abstract"

    def __init__(self, space: ParameterSpace, domain: BoxDomain, name: str = ""):
        self.space = space
        self.domain = domain
        self.name = name or self.kind

    @property
    def dim(self) -> int:
        return self.domain.dim

    def map_batch(self, codes: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Apply ``w(codes[i], points[i])`` row by row."""
        raise NotImplementedError

    def contraction_ratio(self) -> float | None:
        """A global Lipschitz bound when one is known in closed form."""
        return None

    def image_all(self, codes: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Images of every point under every parameter, parameter-major."""
        n = points.shape[0]
        rep_codes = np.repeat(codes, n, axis=0)
        rep_pts = np.tile(points, (len(codes), 1))
        return self.map_batch(rep_codes, rep_pts)

    def check_invariance(self, max_evals: int = 200_000) -> None:
        lam = self.space.net()
        side = float(np.max(self.domain.sides)) or 1.0
        eps = side / 16
        while True:
            xs = epsilon_net(self.domain, eps).points if side > 0 else self.domain.lo[None, :]
            if len(xs) * len(lam) <= max_evals or eps >= side:
                break
            eps *= 2
        images = self.image_all(lam, xs)
        excess = self.domain.excess(images)
        if excess > INVARIANCE_TOL:
            raise InvarianceError(f"{self.name}: the map leaves the box by {excess:.3g} on the test grids")

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, d={self.dim})"


class AffineList(IfsFamily):
    """One affine map ``x -> A x + b`` per label of a finite space."""

    kind = "affine_list"

    def __init__(self, A, b, domain: BoxDomain, space: FiniteSpace | None = None, name: str = "", check: bool = True):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        d = domain.dim
        A = A.reshape(-1, d, d)
        b = b.reshape(-1, d)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"{A.shape[0]} matrices but {b.shape[0]} offsets")
        space = space or FiniteSpace.of_size(A.shape[0])
        if space.size != A.shape[0]:
            raise ValueError(f"{space.size} labels but {A.shape[0]} maps")
        super().__init__(space, domain, name)
        self.A, self.b = A, b
        if check:
            self.check_invariance()

    def map_batch(self, codes, points):
        codes = np.asarray(codes, dtype=np.int64).reshape(-1)
        A, out = self.A[codes], self.b[codes].copy()
        for j in range(points.shape[1]):
            out += A[:, :, j] * points[:, j:j + 1]
        return out

    def contraction_ratio(self) -> float:
        return float(max(np.linalg.norm(a, 2) for a in self.A))


def monomial_exponents(k: int) -> list[tuple[int, ...]]:
    """Exponent tuples of all monomials of degree <= 2 in ``k`` variables."""
    exps = [tuple([0] * k)]
    for i in range(k):
        e = [0] * k
        e[i] = 1
        exps.append(tuple(e))
    for i in range(k):
        for j in range(i, k):
            e = [0] * k
            e[i] += 1
            e[j] += 1
            exps.append(tuple(e))
    return exps


def monomial_name(exp: tuple[int, ...]) -> str:
    parts = []
    for i, e in enumerate(exp):
        parts += [f"l{i + 1}"] * e
    return "*".join(parts) or "1"


class PolyAffineBox(IfsFamily):
    """Affine maps ``x -> A(lam) x + b(lam)`` over a parameter box, where every
    entry of ``A`` and ``b`` is a polynomial of degree <= 2 in ``lam``.

    Polynomials are given as ``{monomial: coefficient}`` mappings with
    monomials named ``"1"``, ``"l1"``, ``"l1*l2"``, ``"l2*l2"`` and so on.
    """

    kind = "poly_affine_box"

    def __init__(self, A_terms, b_terms, domain: BoxDomain, space: BoxSpace, name: str = "", check: bool = True):
        super().__init__(space, domain, name)
        self.monomials = monomial_exponents(space.k)
        index = {monomial_name(e): i for i, e in enumerate(self.monomials)}
        d = domain.dim
        M = len(self.monomials)

        def poly(terms, where):
            coef = np.zeros(M)
            if isinstance(terms, (int, float)):
                terms = {"1": terms}
            for key, value in dict(terms).items():
                canon = monomial_name(_parse_monomial(str(key), space.k, where))
                coef[index[canon]] += float(value)
            return coef

        if len(A_terms) != d or any(len(row) != d for row in A_terms):
            raise ValueError(f"A must be {d}x{d}")
        if len(b_terms) != d:
            raise ValueError(f"b must have {d} entries")
        self.A_coef = np.array([[poly(A_terms[i][j], f"A[{i}][{j}]") for j in range(d)] for i in range(d)])
        self.b_coef = np.array([poly(b_terms[i], f"b[{i}]") for i in range(d)])
        if check:
            self.check_invariance()

    def _features(self, lam: np.ndarray) -> np.ndarray:
        cols = []
        for e in self.monomials:
            col = np.ones(lam.shape[0])
            for i, p in enumerate(e):
                for _ in range(p):
                    col = col * lam[:, i]
            cols.append(col)
        return np.stack(cols, axis=1)

    def map_batch(self, codes, points):
        lam = np.asarray(codes, dtype=float).reshape(-1, self.space.k)
        phi = self._features(lam)
        d = self.dim
        out = np.zeros((points.shape[0], d))
        for i in range(d):
            bi = np.zeros(points.shape[0])
            for m in range(phi.shape[1]):
                bi = bi + self.b_coef[i, m] * phi[:, m]
            acc = bi
            for j in range(d):
                aij = np.zeros(points.shape[0])
                for m in range(phi.shape[1]):
                    aij = aij + self.A_coef[i, j, m] * phi[:, m]
                acc = acc + aij * points[:, j]
            out[:, i] = acc
        return out


def _parse_monomial(key: str, k: int, where: str) -> tuple[int, ...]:
    exp = [0] * k
    if key.strip() == "1":
        return tuple(exp)
    for part in key.split("*"):
        part = part.strip()
        if not (part.startswith("l") and part[1:].isdigit() and 1 <= int(part[1:]) <= k):
            raise ValueError(f"{where}: bad monomial {key!r} (use '1', 'l1', 'l1*l2', ... up to l{k})")
        exp[int(part[1:]) - 1] += 1
    if sum(exp) > 2:
        raise ValueError(f"{where}: monomial {key!r} has degree > 2")
    return tuple(exp)


ANALYTIC_1D = {
    "edalat": lambda x: x / (1.0 + x),
    "halving": lambda x: x / 2.0,
}


class Analytic1D(IfsFamily):
    """Named closed-form single maps on ``[0, 1]``."""

    kind = "analytic_1d"

    def __init__(self, which: str, domain: BoxDomain | None = None, check: bool = True):
        if which not in ANALYTIC_1D:
            raise ValueError(f"unknown analytic family {which!r}; choose from {sorted(ANALYTIC_1D)}")
        domain = domain or BoxDomain.unit(1)
        if domain.dim != 1:
            raise ValueError("analytic families are one-dimensional")
        super().__init__(FiniteSpace((1,)), domain, which)
        self.which = which
        self._fn = ANALYTIC_1D[which]
        if check:
            self.check_invariance()

    def map_batch(self, codes, points):
        return self._fn(points)

    def contraction_ratio(self):
        return 0.5 if self.which == "halving" else None


# -- operations ---------------------------------------------------------------


def _step(f: IfsFamily, code: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = f.map_batch(code, x[None, :])[0]
    excess = f.domain.excess(y[None, :])
    if excess > INVARIANCE_TOL:
        raise InvarianceError(f"{f.name}: w(lam, {x}) = {y} leaves the box by {excess:.3g}")
    return y


def apply(f: IfsFamily, lam, x) -> np.ndarray:
    """``w(lam, x)`` for a single parameter value and point."""
    return _step(f, f.space.encode_one(lam), as_point(x, f.dim))


def _compose_codes(f: IfsFamily, codes: np.ndarray, x: np.ndarray) -> np.ndarray:
    for i in range(len(codes) - 1, -1, -1):
        x = _step(f, codes[i:i + 1], x)
    return x


def compose_apply(f: IfsFamily, word: Sequence, x) -> np.ndarray:
    """Address order: ``w_{s1}(w_{s2}(... w_{sn}(x)))``; the empty word gives ``x``."""
    return _compose_codes(f, f.space.encode(list(word)), as_point(x, f.dim))


def run_forward(f: IfsFamily, codes: np.ndarray, x0: np.ndarray, visit=None) -> np.ndarray:
    """Advance a batch of forward orbits in lockstep.

    ``codes[k]`` holds the ``(k+1)``-th letter of every orbit (shape ``(n, W)``
    or ``(n, W, k)``), ``x0`` the ``(W, d)`` starting points.  ``visit(j, x)``
    is called on ``x_j`` for ``j = 0..n``.  Returns ``x_n``.
    """
    x = np.array(x0, dtype=float)
    if visit is not None:
        visit(0, x)
    for k in range(len(codes)):
        x = f.map_batch(codes[k], x)
        excess = f.domain.excess(x)
        if excess > INVARIANCE_TOL:
            raise InvarianceError(f"{f.name}: orbit left the box by {excess:.3g} at step {k + 1}")
        if visit is not None:
            visit(k + 1, x)
    return x


def orbit(f: IfsFamily, stream, x0, n: int) -> np.ndarray:
    """Forward orbit ``(x_0, ..., x_n)`` with ``x_{k+1} = w(s_{k+1}, x_k)``."""
    if n < 0:
        raise ValueError("orbit length must be >= 0")
    x = as_point(x0, f.dim)
    codes = stream.take(n)
    out = np.empty((n + 1, f.dim))

    def keep(j, pts):
        out[j] = pts[0]

    run_forward(f, codes[:, None] if codes.ndim == 1 else codes[:, None, :], x[None, :], keep)
    return out


@dataclass
class GammaResult:
    point: np.ndarray
    n_used: int
    gaps: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.point, self.n_used))


def _compose_points(f: IfsFamily, codes: np.ndarray, pts: np.ndarray) -> np.ndarray:
    for i in range(len(codes) - 1, -1, -1):
        pts = f.map_batch(np.repeat(codes[i:i + 1], len(pts), axis=0), pts)
        excess = f.domain.excess(pts)
        if excess > INVARIANCE_TOL:
            raise InvarianceError(f"{f.name}: composition left the box by {excess:.3g}")
    return pts


def gamma_limit(f: IfsFamily, stream, x, tol: float, n_max: int) -> GammaResult:
    """Limit of ``w_{s1...sn}(x)`` as ``n`` grows.

    ``n`` doubles until ``Gamma(2n, y)`` lies within ``tol`` of
    ``Gamma(n, x)`` for ``y = x`` and for every corner ``y`` of the box; returns
    ``Gamma(2n, x)`` with ``n_used = 2n``.  Tracking the corners keeps a start
    point that happens to be fixed by the first letters from stopping early.
    Raises :class:`NonConvergenceError` if ``2n`` would exceed ``n_max``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = as_point(x, f.dim)
    probes = np.vstack([x[None, :], f.domain.corners()])
    n = 1
    current = _compose_points(f, stream.take(1), x[None, :])[0]
    gaps = []
    while 2 * n <= n_max:
        nxt = _compose_points(f, stream.take(2 * n), probes)
        gap = float(np.sqrt(np.sum((nxt - current) ** 2, axis=1)).max())
        gaps.append((n, gap))
        if gap < tol:
            return GammaResult(nxt[0], 2 * n, gaps)
        n *= 2
        current = nxt[0]
    last = gaps[-1][1] if gaps else math.inf
    raise NonConvergenceError(
        f"Gamma(sigma, n, x) did not settle below {tol} by n_max={n_max} (last gap {last:.3g}); "
        "the system may not be weakly hyperbolic",
        trace=gaps,
        last_gap=last,
    )


# -- built-in systems ---------------------------------------------------------

SQRT3_2 = math.sqrt(3.0) / 2.0
SIERPINSKI_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3_2]])


def cantor() -> AffineList:
    """Middle-thirds Cantor system ``x/3`` and ``x/3 + 2/3`` on ``[0, 1]``."""
    return AffineList([[[1 / 3]], [[1 / 3]]], [[0.0], [2 / 3]], BoxDomain.unit(1), name="cantor")


def sierpinski() -> AffineList:
    A = np.repeat(0.5 * np.eye(2)[None], 3, axis=0)
    domain = BoxDomain([0.0, 0.0], [1.0, SQRT3_2])
    return AffineList(A, SIERPINSKI_VERTICES / 2, domain, name="sierpinski")


def halving() -> Analytic1D:
    return Analytic1D("halving")


def edalat() -> Analytic1D:
    return Analytic1D("edalat")


def identity(dim: int = 1) -> AffineList:
    return AffineList(np.eye(dim)[None], np.zeros((1, dim)), BoxDomain.unit(dim), name="identity")


def blend(net_spacing: float = 1 / 64) -> PolyAffineBox:
    """``w_lam(x) = (x + lam) / 2`` with ``lam`` in ``[0, 1]``."""
    space = BoxSpace([0.0], [1.0], net_spacing)
    return PolyAffineBox([[{"1": 0.5}]], [{"l1": 0.5}], BoxDomain.unit(1), space, name="blend")


BUILTINS = {
    "cantor": cantor,
    "sierpinski": sierpinski,
    "halving": halving,
    "edalat": edalat,
    "identity": identity,
    "blend": blend,
}


def builtin(name: str) -> IfsFamily:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown built-in system {name!r}; choose from {sorted(BUILTINS)}") from None


def default_measure(f: IfsFamily) -> ParamMeasure:
    return ParamMeasure.uniform(f.space)
