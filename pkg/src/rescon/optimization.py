"""
Convex local costs, subgradients, step-size schedules and a grid oracle
for objective redundancy.

Costs are expression trees whose constructors only admit convexity
preserving compositions, so every tree is convex by construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

TIE_TOL = 1e-12


class Expr:
    """Base node.  ``value`` accepts ``(..., d)`` arrays; ``subgrad`` a single point."""

    affine = False

    def value(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def subgrad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __call__(self, x) -> float | np.ndarray:
        return self.value(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=True)
class Affine(Expr):
    coef: tuple[float, ...]
    const: float = 0.0
    affine = True

    def value(self, X):
        return X @ np.asarray(self.coef) + self.const

    def subgrad(self, x):
        return np.asarray(self.coef, dtype=float)

    def to_dict(self):
        return {"op": "affine", "coef": list(self.coef), "const": self.const}


def _need_affine(child: Expr, op: str) -> None:
    if not child.affine:
        raise ValueError(f"{op} is only convex over an affine argument")


@dataclass(frozen=True, eq=True)
class Square(Expr):
    """``(a.x + b)^2``."""

    child: Affine

    def __post_init__(self):
        _need_affine(self.child, "square")

    def value(self, X):
        return self.child.value(X) ** 2

    def subgrad(self, x):
        return 2.0 * float(self.child.value(x)) * self.child.subgrad(x)

    def to_dict(self):
        return {"op": "square", "child": self.child.to_dict()}


@dataclass(frozen=True, eq=True)
class Abs(Expr):
    """``|a.x + b|``; subgradient 0 at the kink."""

    child: Affine

    def __post_init__(self):
        _need_affine(self.child, "abs")

    def value(self, X):
        return np.abs(self.child.value(X))

    def subgrad(self, x):
        v = float(self.child.value(x))
        return np.sign(v) * self.child.subgrad(x)

    def to_dict(self):
        return {"op": "abs", "child": self.child.to_dict()}


@dataclass(frozen=True, eq=True)
class SqNorm(Expr):
    """``||x - center||^2``."""

    center: tuple[float, ...]

    def value(self, X):
        return np.sum((X - np.asarray(self.center)) ** 2, axis=-1)

    def subgrad(self, x):
        return 2.0 * (x - np.asarray(self.center))

    def to_dict(self):
        return {"op": "sqnorm", "center": list(self.center)}


@dataclass(frozen=True, eq=True)
class Norm(Expr):
    """``||x - center||_2``; subgradient 0 at the center."""

    center: tuple[float, ...]

    def value(self, X):
        return np.sqrt(np.sum((X - np.asarray(self.center)) ** 2, axis=-1))

    def subgrad(self, x):
        v = x - np.asarray(self.center)
        n = float(np.linalg.norm(v))
        return v / n if n > 0 else np.zeros_like(v)

    def to_dict(self):
        return {"op": "norm", "center": list(self.center)}


@dataclass(frozen=True, eq=True)
class Sum(Expr):
    children: tuple[Expr, ...]

    def value(self, X):
        return sum(c.value(X) for c in self.children)

    def subgrad(self, x):
        return sum(c.subgrad(x) for c in self.children)

    def to_dict(self):
        return {"op": "sum", "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True, eq=True)
class Max(Expr):
    """Pointwise max; at ties the subgradient averages the tied branches."""

    children: tuple[Expr, ...]

    def value(self, X):
        return np.max(np.stack([c.value(X) for c in self.children]), axis=0)

    def subgrad(self, x):
        vals = np.array([float(c.value(x)) for c in self.children])
        top = vals.max()
        tied = [c for c, v in zip(self.children, vals) if v >= top - TIE_TOL * max(1.0, abs(top))]
        return sum(c.subgrad(x) for c in tied) / len(tied)

    def to_dict(self):
        return {"op": "max", "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True, eq=True)
class Scale(Expr):
    factor: float
    child: Expr

    def __post_init__(self):
        if self.factor < 0:
            raise ValueError("negative scaling would break convexity")

    def value(self, X):
        return self.factor * self.child.value(X)

    def subgrad(self, x):
        return self.factor * self.child.subgrad(x)

    def to_dict(self):
        return {"op": "scale", "factor": self.factor, "child": self.child.to_dict()}


def expr_from_dict(d: Mapping) -> Expr:
    op = d["op"]
    if op == "affine":
        return Affine(tuple(float(c) for c in d["coef"]), float(d.get("const", 0.0)))
    if op == "square":
        return Square(expr_from_dict(d["child"]))
    if op == "abs":
        return Abs(expr_from_dict(d["child"]))
    if op == "sqnorm":
        return SqNorm(tuple(float(c) for c in d["center"]))
    if op == "norm":
        return Norm(tuple(float(c) for c in d["center"]))
    if op == "sum":
        return Sum(tuple(expr_from_dict(c) for c in d["children"]))
    if op == "max":
        return Max(tuple(expr_from_dict(c) for c in d["children"]))
    if op == "scale":
        return Scale(float(d["factor"]), expr_from_dict(d["child"]))
    raise ValueError(f"unknown cost operator {op!r}")


@dataclass(frozen=True)
class CostFunction:
    owner: int
    expression: Expr

    def __call__(self, x) -> float | np.ndarray:
        return self.expression(x)

    def to_dict(self) -> dict:
        return self.expression.to_dict()


def coord(p: int, d: int, scale: float = 1.0, shift: float = 0.0) -> Affine:
    """Affine leaf ``scale * x[p] + shift`` (``p`` is 0-based)."""
    c = [0.0] * d
    c[p] = scale
    return Affine(tuple(c), shift)


def subgradient(f: CostFunction | Expr, x) -> np.ndarray:
    expr = f.expression if isinstance(f, CostFunction) else f
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("subgradient requested at a non-finite point")
    return np.asarray(expr.subgrad(x), dtype=float)


def global_cost(fs: Mapping[int, CostFunction] | Sequence[CostFunction], subset: Iterable[int], x) -> float:
    """Mean cost of the agents in ``subset`` at the common point ``x``."""
    if not isinstance(fs, Mapping):
        fs = {f.owner: f for f in fs}
    subset = list(subset)
    if not subset:
        raise ValueError("empty subset")
    x = np.asarray(x, dtype=float)
    return float(sum(float(fs[i](x)) for i in subset) / len(subset))


# ------------------------------------------------------------ step sizes

@dataclass(frozen=True)
class StepSchedule:
    """
    Step sizes indexed by time ``t_k = k T``.

    ``harmonic``: ``a / (b t + c0)``.  ``table``: explicit leading values
    followed by a harmonic tail.  ``constant``: only representable so that it
    can be rejected.
    """

    form: str = "harmonic"
    a: float = 1.0
    b: float = 5.0
    c0: float = 1.0
    values: tuple[float, ...] = ()

    def validate(self, T: float) -> list[str]:
        """Violations of the diminishing-step conditions (empty when valid)."""
        problems = []
        if self.form == "constant":
            problems.append("constant steps are not square-summable")
            return problems
        if self.form not in ("harmonic", "table"):
            return [f"unknown step schedule form {self.form!r}"]
        if not (self.a > 0 and self.b > 0 and self.c0 > 0):
            problems.append("harmonic steps need a, b, c0 > 0")
            return problems
        if self.form == "table":
            vals = list(self.values) + [self._harmonic(len(self.values) * T)]
            if any(v < 0 for v in vals):
                problems.append("negative step size in table")
            if any(v1 < v2 for v1, v2 in zip(vals, vals[1:])):
                problems.append("table steps are not non-increasing into the harmonic tail")
        return problems

    def _harmonic(self, t: float) -> float:
        return self.a / (self.b * t + self.c0)

    def to_dict(self) -> dict:
        out = {"form": self.form, "a": self.a, "b": self.b, "c0": self.c0}
        if self.values:
            out["values"] = list(self.values)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "StepSchedule":
        return cls(d.get("form", "harmonic"), float(d.get("a", 1.0)), float(d.get("b", 5.0)),
                   float(d.get("c0", 1.0)), tuple(float(v) for v in d.get("values", ())))


def step_size(s: StepSchedule, k: int, T: float) -> float:
    if k < 0:
        raise ValueError("round index must be non-negative")
    problems = s.validate(T)
    if problems:
        raise ValueError("; ".join(problems))
    if s.form == "table" and k < len(s.values):
        return s.values[k]
    return s._harmonic(k * T)


# ------------------------------------------------------------ redundancy

def _grid(box: Sequence[tuple[float, float]], resolution: float) -> tuple[np.ndarray, tuple[int, ...]]:
    axes = [np.arange(lo, hi + 0.5 * resolution, resolution) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1), tuple(len(a) for a in axes)


def grid_argmin(values: np.ndarray, points: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    """Grid points whose value is within ``rel_tol`` of the grid minimum."""
    v0 = values.min()
    return points[values <= v0 + rel_tol * max(1.0, abs(v0))]


def _hausdorff(A: np.ndarray, B: np.ndarray) -> float:
    D = np.max(np.abs(A[:, None, :] - B[None, :, :]), axis=-1)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def check_redundancy(fs: Sequence[CostFunction], r: int, box: Sequence[tuple[float, float]],
                     resolution: float) -> bool:
    """
    Grid oracle for r-redundancy.

    Every sum over ``N - r`` of the costs is minimised on a regular grid over
    ``box``; the family is declared redundant iff all those grid minimiser
    sets lie within ``2 * resolution`` of one another (max-norm Hausdorff).
    """
    N = len(fs)
    d = len(box)
    if not (0 <= r <= N - 1):
        raise ValueError(f"r must be in 0..{N - 1}")
    if d > 3:
        raise ValueError("the grid oracle is limited to d <= 3")
    widths = [hi - lo for lo, hi in box]
    if resolution <= 0 or resolution * 4 > min(widths):
        raise ValueError("grid resolution too coarse for the box")
    points, _ = _grid(box, resolution)
    if len(points) > 5_000_000:
        raise ValueError("grid too large; increase the resolution step")
    vals = np.stack([np.asarray(f(points), dtype=float) for f in fs])
    ref = None
    for keep in itertools.combinations(range(N), N - r):
        mins = grid_argmin(vals[list(keep)].sum(axis=0), points)
        if len(mins) > 2000:
            mins = mins[:: math.ceil(len(mins) / 2000)]
        if ref is None:
            ref = mins
        elif _hausdorff(ref, mins) > 2 * resolution + 1e-12:
            return False
    return True


def grid_minimizer(fs: Sequence[CostFunction], box: Sequence[tuple[float, float]], resolution: float) -> np.ndarray:
    """Lexicographically smallest grid point minimising the summed cost."""
    points, _ = _grid(box, resolution)
    total = sum(np.asarray(f(points), dtype=float) for f in fs)
    return points[int(np.argmin(total))]


def subgradient_bound(fs: Sequence[CostFunction], box: Sequence[tuple[float, float]], n_per_axis: int = 41) -> float:
    """Largest subgradient norm seen on a grid over ``box`` (an empirical L)."""
    axes = [np.linspace(lo, hi, n_per_axis) for lo, hi in box]
    L = 0.0
    for x in itertools.product(*axes):
        x = np.asarray(x)
        for f in fs:
            L = max(L, float(np.linalg.norm(subgradient(f, x))))
    return L
