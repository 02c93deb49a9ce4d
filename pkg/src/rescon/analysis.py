"""
Trace metrics and the Sarymsakov matrix checker.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .geometry import PointSet, hull_halfspaces, project_onto_halfspaces


class StochasticMatrix:
    """Row-stochastic matrix with 1-based node labels."""

    def __init__(self, entries):
        A = np.asarray(entries, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("a square matrix is required")
        if np.any(A < 0):
            raise ValueError("entries must be non-negative")
        if np.any(np.abs(A.sum(axis=1) - 1) > 1e-12):
            raise ValueError("rows must sum to 1")
        self.entries = A

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _matrix(A) -> np.ndarray:
    return A.entries if isinstance(A, StochasticMatrix) else StochasticMatrix(A).entries


def consequent_indices(A, V1: Iterable[int]) -> set[int]:
    """Nodes ``j`` with ``a_ij > 0`` for some ``i`` in ``V1``."""
    M = _matrix(A)
    V1 = set(V1)
    if not V1:
        raise ValueError("V1 must be nonempty")
    if any(not (1 <= i <= M.shape[0]) for i in V1):
        raise ValueError("V1 contains an unknown node")
    rows = M[[i - 1 for i in sorted(V1)]]
    return {int(j) + 1 for j in np.flatnonzero((rows > 0).any(axis=0))}


def sarymsakov_witness(A) -> tuple[frozenset[int], frozenset[int]] | None:
    """
    A disjoint nonempty pair violating both Sarymsakov clauses, or ``None``.

    Subsets are bitmasks; consequent sets are built for all of them by a
    lowest-bit recurrence, then every unordered disjoint pair is tested.
    """
    M = _matrix(A)
    n = M.shape[0]
    if n > 16:
        raise ValueError("exhaustive Sarymsakov checking is limited to N <= 16")
    row = [sum(1 << j for j in np.flatnonzero(M[i] > 0)) for i in range(n)]
    size = 1 << n
    cons = [0] * size
    pop = [0] * size
    for m in range(1, size):
        low = (m & -m).bit_length() - 1
        cons[m] = cons[m & (m - 1)] | row[low]
        pop[m] = pop[m & (m - 1)] + 1
    full = size - 1
    for a in range(1, size):
        rest = full ^ a
        low_a = a & -a
        b = rest
        while b:
            if (b & -b) > low_a and not (cons[a] & cons[b]):
                union = cons[a] | cons[b]
                if bin(union).count("1") <= pop[a] + pop[b]:
                    to_set = lambda m: frozenset(i + 1 for i in range(n) if (m >> i) & 1)  # noqa: E731
                    return to_set(a), to_set(b)
            b = (b - 1) & rest
    return None


def is_sarymsakov(A) -> bool:
    return sarymsakov_witness(A) is None


def diameter(states: Mapping[int, np.ndarray] | np.ndarray) -> np.ndarray:
    """Per-dimension spread (max minus min) of the given states."""
    X = np.array(list(states.values())) if isinstance(states, Mapping) else np.atleast_2d(states)
    if X.size == 0:
        raise ValueError("no states given")
    return X.max(axis=0) - X.min(axis=0)


class HullDistance:
    """Euclidean distance to a fixed convex hull, via its half-space form."""

    def __init__(self, points):
        P = points.points if isinstance(points, PointSet) else np.atleast_2d(np.asarray(points, dtype=float))
        self.points = P
        self.A, self.b = hull_halfspaces(P)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.points.shape[1]:
            raise ValueError("dimension mismatch")
        if np.all(self.A @ x <= self.b):
            return 0.0
        return float(np.linalg.norm(project_onto_halfspaces(x, self.A, self.b) - x))


def validity(states, initial_benign, delta_budget: float, tol: float = 1e-9) -> bool:
    """Every state lies within ``delta_budget`` of the hull of the initial benign states."""
    dist = initial_benign if isinstance(initial_benign, HullDistance) else HullDistance(initial_benign)
    X = np.array(list(states.values())) if isinstance(states, Mapping) else np.atleast_2d(states)
    return all(dist(x) <= delta_budget + tol for x in X)


@dataclass(frozen=True)
class MetricsRow:
    t: float
    diameter: tuple[float, ...]
    validity: bool
    delta_budget: float
    global_cost: float
    cost_rate: float
