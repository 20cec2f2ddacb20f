"""Experiment configuration files (YAML).

Every section and key is checked against a fixed schema: unknown keys are
errors, and messages point at the offending line.  See ``docs/config.md`` for
the full schema.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import IfsLabError, InvarianceError
from .ifs_core import (
    AffineList,
    Analytic1D,
    BoxSpace,
    FiniteSpace,
    IfsFamily,
    ParamMeasure,
    PolyAffineBox,
)
from .metric import BoxDomain


class ConfigError(IfsLabError):
    """Malformed or inconsistent configuration."""


# section -> key -> (kind, default); kind is one of
# "pos" (positive real), "posint", "int", "bool", "str", "any"
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "system": {
        "kind": ("str", None),
        "name": ("str", ""),
        "maps": ("any", None),
        "labels": ("any", None),
        "A": ("any", None),
        "b": ("any", None),
        "family": ("str", None),
    },
    "domain": {"lo": ("any", None), "hi": ("any", None)},
    "parameters": {
        "kind": ("str", "finite"),
        "probs": ("any", None),
        "lo": ("any", None),
        "hi": ("any", None),
        "net_spacing": ("pos", None),
    },
    "nets": {"phase_eps": ("pos", None)},
    "output": {"dir": ("str", None), "figures": ("bool", True)},
    "budgets": {
        "points": ("posint", 2_000_000),
        "atoms": ("posint", 4_000_000),
        "solver": ("posint", 512),
        "words": ("posint", 1_000_000),
    },
    "attractor": {
        "tol": ("pos", 1e-3),
        "n_max": ("posint", 100),
        "merge_radius": ("pos", None),
        "render": ("bool", True),
        "width": ("posint", 1024),
        "height": ("posint", None),
        "density_len": ("posint", None),
        "seed_check": ("bool", True),
    },
    "measure": {
        "tol": ("pos", 1e-3),
        "n_max": ("posint", 200),
        "grid_h": ("pos", None),
        "support_check": ("bool", False),
        "seed_check": ("bool", False),
        "weight_floor": ("nonneg", 0.0),
        "render": ("bool", True),
        "width": ("posint", 1024),
        "height": ("posint", None),
    },
    "ergodic": {
        "observables": ("any", ["x0"]),
        "starts": ("any", None),
        "n": ("posint", 100_000),
        "trials": ("posint", 20),
        "tol": ("pos", None),
    },
    "chaos": {
        "x0": ("any", None),
        "L": ("nonnegint", 100),
        "M": ("posint", 50_000),
        "eps": ("pos", 0.02),
        "trials": ("posint", 20),
        "delta_grid": ("any", [0.01, 0.1, 0.5]),
        "keep_tails": ("bool", False),
        "render": ("bool", True),
        "width": ("posint", 1024),
        "height": ("posint", None),
    },
    "diagnose": {
        "n_max": ("posint", 60),
        "words": ("posint", 64),
        "eta": ("pos", 1.0),
        "eps": ("pos", 1e-2),
        "eps_list": ("any", None),
        "pairs": ("posint", 64),
        "verdict_eps": ("pos", 1e-4),
    },
    "render": {
        "input": ("str", None),
        "kind": ("str", "auto"),
        "width": ("posint", 1024),
        "height": ("posint", None),
        "lo": ("any", None),
        "hi": ("any", None),
    },
}

TOP_LEVEL = {"seed": ("nonnegint", 0), "threads": ("posint", 1)}


@dataclass
class ExperimentConfig:
    path: Path
    raw: dict
    sha256: str
    seed: int
    threads: int
    sections: dict = field(default_factory=dict)
    family: IfsFamily | None = None
    measure: ParamMeasure | None = None
    domain: BoxDomain | None = None

    def section(self, name: str) -> dict:
        return self.sections[name]

    def require_system(self) -> IfsFamily:
        if self.family is None:
            raise ConfigError(f"{self.path}: this command needs a 'system' section")
        return self.family

    def resolve(self, relative: str) -> Path:
        p = Path(relative)
        return p if p.is_absolute() else self.path.parent / p


class _Lines:
    """Maps key paths like ``("attractor", "tol")`` to 1-based source lines."""

    def __init__(self, text: str):
        self.lines: dict[tuple, int] = {}
        try:
            node = yaml.compose(text)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                self.lines[path + (key,)] = k.start_mark.line + 1
                self._walk(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def get(self, path) -> int | None:
        path = tuple(path)
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)


class _Ctx:
    def __init__(self, path: Path, lines: _Lines):
        self.path = path
        self.lines = lines

    def fail(self, where, msg):
        where = tuple(where)
        line = self.lines.get(where)
        loc = f"{self.path}:{line}" if line else str(self.path)
        field_name = ".".join(str(w) for w in where) or "<root>"
        raise ConfigError(f"{loc}: {field_name}: {msg}")


def _coerce(ctx: _Ctx, where, kind: str, value):
    if value is None:
        return None
    if kind == "any":
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            ctx.fail(where, f"expected true/false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            ctx.fail(where, f"expected a string, got {value!r}")
        return value
    if kind in ("posint", "nonnegint", "int"):
        if isinstance(value, bool) or not isinstance(value, int):
            ctx.fail(where, f"expected an integer, got {value!r}")
        if kind == "posint" and value <= 0:
            ctx.fail(where, f"must be positive, got {value}")
        if kind == "nonnegint" and value < 0:
            ctx.fail(where, f"must be nonnegative, got {value}")
        return value
    if kind in ("pos", "nonneg"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            try:
                value = float(value)
            except (TypeError, ValueError):
                ctx.fail(where, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            ctx.fail(where, f"must be finite, got {value}")
        if kind == "pos" and value <= 0:
            ctx.fail(where, f"must be positive, got {value}")
        if kind == "nonneg" and value < 0:
            ctx.fail(where, f"must be nonnegative, got {value}")
        return value
    raise AssertionError(kind)


def _vector(ctx: _Ctx, where, value, dim: int | None = None) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        ctx.fail(where, f"expected a list of numbers, got {value!r}")
    if dim is not None and arr.size != dim:
        ctx.fail(where, f"expected {dim} numbers, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        ctx.fail(where, "numbers must be finite")
    return arr


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file; builds the map family if present."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{path}{line}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    raw = {} if raw is None else raw
    ctx = _Ctx(path, _Lines(text))
    if not isinstance(raw, dict):
        ctx.fail((), "top level must be a mapping of sections")

    sections = {}
    top = {}
    for key, value in raw.items():
        if key in TOP_LEVEL:
            top[key] = _coerce(ctx, (key,), TOP_LEVEL[key][0], value)
        elif key in SCHEMA:
            if value is None:
                value = {}
            if not isinstance(value, dict):
                ctx.fail((key,), "section must be a mapping")
            unknown = [k for k in value if k not in SCHEMA[key]]
            if unknown:
                ctx.fail((key, unknown[0]), f"unknown key (allowed: {', '.join(SCHEMA[key])})")
        else:
            ctx.fail((key,), f"unknown section (allowed: {', '.join(list(TOP_LEVEL) + list(SCHEMA))})")
    for name, schema in SCHEMA.items():
        given = raw.get(name) or {}
        sections[name] = {
            key: _coerce(ctx, (name, key), kind, given.get(key, default)) for key, (kind, default) in schema.items()
        }
        sections[name]["_given"] = name in raw
    digest = hashlib.sha256(text.encode()).hexdigest()
    cfg = ExperimentConfig(
        path=path,
        raw=raw,
        sha256=digest,
        seed=top.get("seed", TOP_LEVEL["seed"][1]),
        threads=top.get("threads", TOP_LEVEL["threads"][1]),
        sections=sections,
    )
    if sections["system"]["_given"]:
        _build_system(ctx, cfg)
    return cfg


def _build_domain(ctx: _Ctx, sec: dict) -> BoxDomain:
    if sec["lo"] is None or sec["hi"] is None:
        ctx.fail(("domain",), "needs both lo and hi")
    lo = _vector(ctx, ("domain", "lo"), sec["lo"])
    hi = _vector(ctx, ("domain", "hi"), sec["hi"], lo.size)
    try:
        return BoxDomain(lo, hi)
    except ValueError as exc:
        ctx.fail(("domain",), str(exc))


def _build_system(ctx: _Ctx, cfg: ExperimentConfig) -> None:
    sys_sec = cfg.sections["system"]
    if not cfg.sections["domain"]["_given"]:
        ctx.fail(("domain",), "missing section (the box X is required)")
    domain = _build_domain(ctx, cfg.sections["domain"])
    d = domain.dim
    kind = sys_sec["kind"]
    par = cfg.sections["parameters"]
    name = sys_sec["name"] or ""
    try:
        if kind == "affine_list":
            maps = sys_sec["maps"]
            if not isinstance(maps, list) or not maps:
                ctx.fail(("system", "maps"), "expected a nonempty list of {A, b} maps")
            As, bs = [], []
            for i, m in enumerate(maps):
                if not isinstance(m, dict) or set(m) - {"A", "b"} or "A" not in m or "b" not in m:
                    ctx.fail(("system", "maps", i), "each map needs exactly the keys A and b")
                As.append(_vector(ctx, ("system", "maps", i, "A"), m["A"], d * d).reshape(d, d))
                bs.append(_vector(ctx, ("system", "maps", i, "b"), m["b"], d))
            labels = sys_sec["labels"]
            if labels is not None:
                if not isinstance(labels, list) or not all(isinstance(l, int) and l >= 1 for l in labels):
                    ctx.fail(("system", "labels"), "labels are 1-based integers")
                space = FiniteSpace(tuple(labels))
            else:
                space = FiniteSpace.of_size(len(maps))
            if par["kind"] != "finite":
                ctx.fail(("parameters", "kind"), "affine_list systems use a finite parameter space")
            family = AffineList(np.array(As), np.array(bs), domain, space, name=name or "affine_list")
        elif kind == "poly_affine_box":
            if par["kind"] != "box":
                ctx.fail(("parameters", "kind"), "poly_affine_box systems need parameters.kind: box")
            if par["lo"] is None or par["hi"] is None or par["net_spacing"] is None:
                ctx.fail(("parameters",), "box parameters need lo, hi and net_spacing")
            plo = _vector(ctx, ("parameters", "lo"), par["lo"])
            phi = _vector(ctx, ("parameters", "hi"), par["hi"], plo.size)
            space = BoxSpace(plo, phi, par["net_spacing"])
            if sys_sec["A"] is None or sys_sec["b"] is None:
                ctx.fail(("system",), "poly_affine_box needs A and b")
            family = PolyAffineBox(sys_sec["A"], sys_sec["b"], domain, space, name=name or "poly_affine_box")
        elif kind == "analytic_1d":
            if sys_sec["family"] is None:
                ctx.fail(("system", "family"), "analytic_1d needs a family name")
            family = Analytic1D(sys_sec["family"], domain)
            if name:
                family.name = name
        else:
            ctx.fail(("system", "kind"), f"unknown kind {kind!r} (affine_list, poly_affine_box, analytic_1d)")
    except InvarianceError as exc:
        ctx.fail(("system",), f"invariance check failed: {exc}")
    except ValueError as exc:
        ctx.fail(("system",), str(exc))

    probs = par["probs"]
    if isinstance(family.space, FiniteSpace):
        if probs is not None:
            vec = _vector(ctx, ("parameters", "probs"), probs, family.space.size)
            if np.any(vec < 0):
                ctx.fail(("parameters", "probs"), "probabilities must be nonnegative")
            if abs(vec.sum() - 1) > 1e-9:
                ctx.fail(("parameters", "probs"), f"probabilities sum to {vec.sum()!r}, not 1")
            measure = ParamMeasure(family.space, vec / vec.sum())
        else:
            measure = ParamMeasure.uniform(family.space)
    else:
        if probs is not None:
            ctx.fail(("parameters", "probs"), "box parameter measures are uniform; remove probs")
        measure = ParamMeasure.uniform(family.space)
    cfg.family, cfg.measure, cfg.domain = family, measure, domain


def point_list(cfg: ExperimentConfig, where: tuple, value, dim: int) -> list:
    """Validate a list of points (or a single point) from the config."""
    ctx = _Ctx(cfg.path, _Lines(cfg.path.read_text()))
    if value is None:
        return []
    if isinstance(value, (int, float)) or (isinstance(value, list) and value and not isinstance(value[0], list)):
        if dim == 1 and isinstance(value, list):
            return [_vector(ctx, where + (i,), v, 1) for i, v in enumerate(value)]
        value = [value]
    return [_vector(ctx, where + (i,), v, dim) for i, v in enumerate(value)]


def vector_field(cfg: ExperimentConfig, where: tuple, value, dim: int | None = None) -> np.ndarray:
    ctx = _Ctx(cfg.path, _Lines(cfg.path.read_text()))
    return _vector(ctx, where, value, dim)


def fail(cfg: ExperimentConfig, where: tuple, msg: str):
    _Ctx(cfg.path, _Lines(cfg.path.read_text())).fail(where, msg)
