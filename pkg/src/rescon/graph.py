"""
Communication digraphs and robustness certificates.

Nodes are labelled ``1..N``.  An edge ``(i, j)`` means agent ``i`` receives
the state of agent ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

BENIGN = "benign"
ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class Digraph:
    node_count: int
    edges: frozenset[tuple[int, int]]
    roles: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be positive")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (1 <= i <= self.node_count and 1 <= j <= self.node_count):
                raise ValueError(f"edge ({i}, {j}) has an endpoint outside 1..{self.node_count}")
        roles = {v: BENIGN for v in self.nodes}
        for v, role in dict(self.roles).items():
            v = int(v)
            if v not in roles:
                raise ValueError(f"role given for unknown node {v}")
            if role not in (BENIGN, ADVERSARIAL):
                raise ValueError(f"unknown role {role!r} for node {v}")
            roles[v] = role
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "roles", roles)

    @classmethod
    def from_in_neighbors(cls, in_nbrs: Mapping[int, Iterable[int]], node_count: int | None = None,
                          adversaries: Iterable[int] = ()) -> "Digraph":
        n = node_count or max(max(in_nbrs), max((j for js in in_nbrs.values() for j in js), default=1))
        edges = {(int(i), int(j)) for i, js in in_nbrs.items() for j in js}
        roles = {int(a): ADVERSARIAL for a in adversaries}
        return cls(n, frozenset(edges), roles)

    @classmethod
    def complete(cls, n: int) -> "Digraph":
        return cls(n, frozenset((i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j))

    @classmethod
    def cycle(cls, n: int) -> "Digraph":
        """Directed cycle in which node ``i`` receives from ``i + 1`` (and ``n`` from ``1``)."""
        return cls(n, frozenset((i, i % n + 1) for i in range(1, n + 1)))

    @property
    def nodes(self) -> range:
        return range(1, self.node_count + 1)

    @property
    def benign(self) -> list[int]:
        return [v for v in self.nodes if self.roles[v] == BENIGN]

    @property
    def adversaries(self) -> list[int]:
        return [v for v in self.nodes if self.roles[v] == ADVERSARIAL]

    def with_edges(self, add=(), remove=()) -> "Digraph":
        edges = (set(self.edges) | set(add)) - set(remove)
        return Digraph(self.node_count, frozenset(edges), dict(self.roles))

    def out_neighbors(self, j: int) -> set[int]:
        self._check_node(j)
        return {a for a, b in self.edges if b == j}

    def _check_node(self, i: int) -> None:
        if not (1 <= i <= self.node_count):
            raise KeyError(f"unknown node {i}")


def in_neighbors(g: Digraph, i: int) -> set[int]:
    g._check_node(i)
    return {j for a, j in g.edges if a == i}


def check_min_indegree(g: Digraph, d: int, F: int) -> bool:
    need = (d + 1) * F + 1
    return all(len(in_neighbors(g, i)) >= need for i in g.nodes)


@dataclass(frozen=True)
class RobustnessCertificate:
    r: int
    s: int
    holds: bool
    witness: tuple[frozenset[int], frozenset[int]] | None = None

    def to_dict(self) -> dict:
        w = None
        if self.witness is not None:
            w = [sorted(self.witness[0]), sorted(self.witness[1])]
        return {"r": self.r, "s": self.s, "holds": self.holds, "witness": w}


def _in_masks(g: Digraph) -> np.ndarray:
    masks = np.zeros(g.node_count, dtype=np.int64)
    for i, j in g.edges:
        masks[i - 1] |= 1 << (j - 1)
    return masks


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.uint64)
    out = np.zeros(a.shape, dtype=np.int64)
    while np.any(a):
        out += (a & np.uint64(1)).astype(np.int64)
        a = a >> np.uint64(1)
    return out


def _reach_counts(g: Digraph, r: int) -> np.ndarray:
    """
    ``C[S, i]`` is True iff node ``i`` is in ``S`` and has at least ``r``
    in-neighbours outside ``S`` (``S`` encoded as a bitmask).
    """
    n = g.node_count
    full = (1 << n) - 1
    S = np.arange(1 << n, dtype=np.int64)
    inm = _in_masks(g)
    C = np.zeros((1 << n, n), dtype=bool)
    for i in range(n):
        member = (S >> i) & 1 == 1
        outside = _popcount(inm[i] & (full ^ S))
        C[:, i] = member & (outside >= r)
    return C


def _subset_or(flags: np.ndarray, n: int) -> np.ndarray:
    """``out[M]`` is True iff ``flags[S]`` for some ``S`` contained in ``M``."""
    out = flags.copy()
    idx = np.arange(1 << n)
    for b in range(n):
        has = (idx >> b) & 1 == 1
        out[has] |= out[idx[has] ^ (1 << b)]
    return out


def _first_disjoint_pair(bad: np.ndarray, n: int):
    full = (1 << n) - 1
    reach = _subset_or(bad, n)
    cand = np.flatnonzero(bad)
    hit = cand[reach[full ^ cand]]
    if hit.size == 0:
        return None
    a = int(hit[0])
    partners = np.flatnonzero(bad)
    partners = partners[(partners & a) == 0]
    b = int(partners[0])
    return a, b


def _mask_to_set(m: int) -> frozenset[int]:
    return frozenset(i + 1 for i in range(m.bit_length()) if (m >> i) & 1)


def _check_size(g: Digraph) -> None:
    if g.node_count > 20:
        raise ValueError("exact robustness checking is limited to N <= 20")


def check_r_robust(g: Digraph, r: int) -> RobustnessCertificate:
    """
    Exact r-robustness test.

    A pair ``(V1, V2)`` of disjoint nonempty sets violates the property when
    neither set contains a node with ``r`` in-neighbours outside it.  Every
    such "closed" set is flagged, then a subset-OR transform tells whether
    some closed set fits inside the complement of another.
    """
    n = g.node_count
    if not (1 <= r <= n):
        raise ValueError(f"r must be in 1..{n}, got {r}")
    _check_size(g)
    C = _reach_counts(g, r)
    bad = ~C.any(axis=1)
    bad[0] = False
    pair = _first_disjoint_pair(bad, n)
    if pair is None:
        return RobustnessCertificate(r, 1, True)
    return RobustnessCertificate(r, 1, False, (_mask_to_set(pair[0]), _mask_to_set(pair[1])))


def check_rs_robust(g: Digraph, r: int, s: int) -> RobustnessCertificate:
    """
    Exact (r, s)-robustness test.

    For each disjoint nonempty pair, one of: every node of ``V1`` has ``r``
    in-neighbours outside ``V1``; the same for ``V2``; or at least ``s``
    nodes of ``V1 | V2`` have ``r`` in-neighbours outside their own set.
    """
    n = g.node_count
    if not (1 <= r <= n) or not (1 <= s <= n):
        raise ValueError(f"r and s must be in 1..{n}, got r={r}, s={s}")
    _check_size(g)
    C = _reach_counts(g, r)
    sizes = _popcount(np.arange(1 << n, dtype=np.int64))
    count = C.sum(axis=1)
    all_reach = count == sizes
    all_reach[0] = True
    full = (1 << n) - 1
    for a in range(1, 1 << n):
        if all_reach[a]:
            continue
        rest = full ^ a
        # enumerate nonempty submasks b of rest with b's lowest bit above a's lowest bit
        low_a = a & -a
        b = rest
        while b:
            if (b & -b) > low_a and not all_reach[b] and count[a] + count[b] < s:
                return RobustnessCertificate(r, s, False, (_mask_to_set(a), _mask_to_set(b)))
            b = (b - 1) & rest
    return RobustnessCertificate(r, s, True)


def max_robustness(g: Digraph) -> int:
    """Largest ``r`` for which ``g`` is r-robust (0 if it is not even 1-robust)."""
    best = 0
    for r in range(1, g.node_count + 1):
        if not check_r_robust(g, r).holds:
            break
        best = r
    return best
