"""
Safe-kernel geometry.

The safe kernel of a point set ``X`` with fault bound ``F`` is the
intersection of the convex hulls of every subset of ``X`` obtained by
dropping ``F`` points.  Only a single point of the kernel is ever needed, so
the kernel is never materialised as a polytope: each subset hull is turned
into a half-space system and the arithmetic mean of ``X`` is projected onto
the stacked system.
"""

from __future__ import annotations

import functools
import itertools
from fractions import Fraction
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, lsq_linear, nnls
from scipy.spatial import ConvexHull, QhullError

MEMBERSHIP_TOL = 1e-9


class KernelEmptyError(ValueError):
    """The safe kernel is empty (or empty up to numerical tolerance)."""


@dataclass(frozen=True)
class PointSet:
    """Points tagged with their source agent, kept sorted by tag."""

    points: np.ndarray
    tags: tuple[int, ...]

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        tags = tuple(int(t) for t in self.tags)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValueError("points must be an (n, d) array with d >= 1")
        if len(tags) != pts.shape[0]:
            raise ValueError("one tag per point is required")
        order = sorted(range(len(tags)), key=tags.__getitem__)
        object.__setattr__(self, "points", pts[order])
        object.__setattr__(self, "tags", tuple(tags[i] for i in order))

    @classmethod
    def from_array(cls, points, tags: Sequence[int] | None = None) -> "PointSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if tags is None:
            tags = range(1, pts.shape[0] + 1)
        return cls(pts, tuple(tags))

    @classmethod
    def from_mapping(cls, mapping) -> "PointSet":
        tags = sorted(mapping)
        return cls(np.array([np.asarray(mapping[t], dtype=float) for t in tags]), tuple(tags))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, index) -> "PointSet":
        index = list(index)
        return PointSet(self.points[index], tuple(self.tags[i] for i in index))

    def as_dict(self) -> dict[int, np.ndarray]:
        return {t: p.copy() for t, p in zip(self.tags, self.points)}


def _nnls(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Non-negative least squares with a KKT check on the fast solver.

    scipy 1.15's ``nnls`` occasionally stops at a non-optimal point while
    reporting a zero residual; such answers are re-solved with BVLS.
    """
    x, _ = nnls(A, b, maxiter=50 * A.shape[1])
    r = A @ x - b
    g = A.T @ r
    tol = 1e-10 * max(1.0, float(np.abs(A).max()) * float(np.abs(b).max()))
    if np.all(g >= -tol) and np.all(np.abs(g[x > 0]) <= tol):
        return x
    return lsq_linear(A, b, bounds=(0, np.inf), method="bvls", tol=1e-15).x


def _as_points(S) -> np.ndarray:
    if isinstance(S, PointSet):
        return S.points
    return np.atleast_2d(np.asarray(S, dtype=float))


def _min_norm_point(D: np.ndarray) -> np.ndarray:
    """
    Wolfe's algorithm: convex weights of the point of ``Conv(rows of D)``
    nearest the origin.
    """
    n = D.shape[0]
    sq = np.einsum("ij,ij->i", D, D)
    big = max(float(sq.max()), 1e-300)
    S = [int(np.argmin(sq))]
    w = np.array([1.0])
    y = D[S[0]].copy()
    for _ in range(50 * n + 50):
        j = int(np.argmin(D @ y))
        gap = y @ y - D[j] @ y
        if y @ y <= 1e-28 * big or gap <= 1e-14 * np.sqrt(y @ y * big) or j in S:
            break
        S.append(j)
        w = np.append(w, 0.0)
        for _ in range(len(S) + 1):
            # affine minimiser of the corral S, written as an unconstrained
            # least squares in v = e_0 + sum t_i (e_i - e_0)
            M = D[S]
            t = np.linalg.lstsq((M[1:] - M[0]).T, -M[0], rcond=None)[0]
            v = np.concatenate([[1.0 - t.sum()], t])
            if np.all(v > 1e-14):
                w = v
                break
            neg = v <= 1e-14
            theta = min(1.0, float(np.min(w[neg] / (w[neg] - v[neg]))))
            w = theta * v + (1 - theta) * w
            w[w < 1e-14] = 0.0
            if not (w > 0).all():
                keep = w > 0
                S = [i for i, k in zip(S, keep) if k]
                w = w[keep]
            else:
                # numerically stuck; drop the most negative affine weight
                drop = int(np.argmin(v))
                S.pop(drop)
                w = np.delete(w, drop)
            if len(S) == 1:
                w = np.array([1.0])
                break
        y = w @ D[S]
    out = np.zeros(n)
    out[S] = w / w.sum()
    return out


def _nnls_weights(P: np.ndarray, x: np.ndarray) -> np.ndarray:
    # points shifted to x plus one row for the affine constraint
    D = P - x
    w_row = max(1.0, float(np.abs(D).max()))
    A = np.vstack([D.T, np.full((1, P.shape[0]), w_row)])
    rhs = np.zeros(P.shape[1] + 1)
    rhs[-1] = w_row
    w = _nnls(A, rhs)
    total = w.sum()
    return w / total if total > 0 else np.full(P.shape[0], 1.0 / P.shape[0])


def _lp_weights(P: np.ndarray, x: np.ndarray) -> np.ndarray:
    # max-norm slack minimisation over convex weights
    m, d = P.shape
    D = P - x
    cost = np.r_[np.zeros(m), 1.0]
    A_ub = np.block([[D.T, -np.ones((d, 1))], [-D.T, -np.ones((d, 1))]])
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * d), A_eq=np.r_[np.ones(m), 0.0][None, :], b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return np.full(m, 1.0 / m)
    w = np.maximum(res.x[:m], 0.0)
    return w / w.sum()


def _weights_and_error(x, S, tol: float) -> tuple[np.ndarray, float]:
    P = _as_points(S)
    x = np.asarray(x, dtype=float).ravel()
    if P.shape[0] == 0:
        raise ValueError("empty point set")
    if P.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: points are {P.shape[1]}-d, x is {x.shape[0]}-d")
    best, best_err = None, np.inf
    for solver in (lambda: _min_norm_point(P - x), lambda: _nnls_weights(P, x), lambda: _lp_weights(P, x)):
        w = solver()
        err = float(np.abs(w @ P - x).max())
        if err < best_err:
            best, best_err = w, err
        if best_err <= tol:
            break
    return best, best_err


def convex_weights(x, S) -> np.ndarray:
    """
    Convex coefficients ``w`` (``w >= 0``, ``sum(w) == 1``) whose combination
    of the rows of ``S`` is as close as possible to ``x``.

    Wolfe's minimum-norm-point method first; nearly degenerate point sets
    that defeat it are retried with NNLS and with a max-norm LP, keeping the
    best reconstruction.
    """
    return _weights_and_error(x, S, MEMBERSHIP_TOL)[0]


def hull_membership(x, S, tol: float = MEMBERSHIP_TOL) -> bool:
    """True iff explicit convex weights reproduce ``x`` within ``tol`` in the max-norm."""
    return _weights_and_error(x, S, tol)[1] <= tol


def enumerate_subsets(base: PointSet, F: int) -> list[PointSet]:
    """All subsets of size ``len(base) - F``, in lexicographic order of the omitted indices."""
    n = len(base)
    if F < 0 or F >= n:
        raise ValueError(f"need 0 <= F < |base|, got F={F}, |base|={n}")
    out = []
    for omitted in itertools.combinations(range(n), F):
        keep = [i for i in range(n) if i not in omitted]
        out.append(base.subset(keep))
    return out


def _chain_2d(Q: np.ndarray) -> np.ndarray:
    """Counter-clockwise hull vertices of 2-d points (monotone chain)."""
    pts = sorted(map(tuple, Q))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _full_dim_halfspaces(Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = Q.shape[1]
    if k == 1:
        return np.array([[1.0], [-1.0]]), np.array([Q.max(), -Q.min()])
    if k == 2:
        V = _chain_2d(Q)
        if len(V) < 3:
            raise QhullError("degenerate planar hull")
        E = np.roll(V, -1, axis=0) - V
        N = np.column_stack([E[:, 1], -E[:, 0]])
        N /= np.linalg.norm(N, axis=1, keepdims=True)
        return N, np.einsum("ij,ij->i", N, V)
    try:
        eq = ConvexHull(Q).equations
    except QhullError:
        eq = ConvexHull(Q, qhull_options="QJ").equations
    return eq[:, :-1], -eq[:, -1]


def hull_halfspaces(S, rank_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """
    Half-space description ``A x <= b`` of ``Conv(S)`` with unit-norm rows.

    Lower-dimensional hulls (collinear points, coincident points, ...) are
    described by pairs of opposite inequalities for the affine hull plus the
    facets of the hull inside it.
    """
    P = _as_points(S)
    d = P.shape[1]
    c = P.mean(axis=0)
    D = P - c
    _, sv, Vt = np.linalg.svd(D, full_matrices=True)
    scale = max(1.0, float(np.abs(P).max()))
    rank = int(np.sum(sv > rank_tol * scale)) if sv.size else 0

    A_parts, b_parts = [], []
    if rank < d:
        Nrm = Vt[rank:]
        A_parts += [Nrm, -Nrm]
        b_parts += [Nrm @ c, -(Nrm @ c)]
    if rank > 0:
        U = Vt[:rank]
        Q = D @ U.T
        try:
            Ak, bk = _full_dim_halfspaces(Q)
        except QhullError:
            # thin hull mis-detected as full-rank; drop the weakest direction
            return hull_halfspaces(P, rank_tol=float(sv[rank - 1] / scale) * 1.0001)
        A = Ak @ U
        b = bk + A @ c
        nrm = np.linalg.norm(A, axis=1)
        A_parts.append(A / nrm[:, None])
        b_parts.append(b / nrm)
    return np.vstack(A_parts), np.concatenate(b_parts)


_ORIENT_ERR = 1e-15


def _orientation_signs(P: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """
    Exact sign of ``orient(P[i], P[j], P[k])`` for every pair and every ``k``.

    Floating point with a forward error bound; the few undecided cases are
    redone in rational arithmetic.
    """
    ax, ay = P[i, 0][:, None], P[i, 1][:, None]
    bx, by = P[j, 0][:, None], P[j, 1][:, None]
    cx, cy = P[:, 0][None, :], P[:, 1][None, :]
    left = (bx - ax) * (cy - ay)
    right = (by - ay) * (cx - ax)
    det = left - right
    sign = np.sign(det)
    unsure = np.abs(det) <= _ORIENT_ERR * (np.abs(left) + np.abs(right))
    rows = np.arange(len(i))
    sign[rows, i] = sign[rows, j] = 0
    unsure[rows, i] = unsure[rows, j] = False
    for r, k in zip(*np.nonzero(unsure)):
        a, b, c = P[i[r]], P[j[r]], P[k]
        ex = (Fraction(b[0]) - Fraction(a[0])) * (Fraction(c[1]) - Fraction(a[1]))
        ex -= (Fraction(b[1]) - Fraction(a[1])) * (Fraction(c[0]) - Fraction(a[0]))
        sign[r, k] = (ex > 0) - (ex < 0)
    return sign


def _planar_kernel_halfspaces(P: np.ndarray, F: int, center=0.0, scale: float = 1.0):
    """
    Half-planes bounding the safe kernel of planar points.

    The kernel is the intersection of every closed half-plane holding at
    least ``n - F`` of the points, and the binding ones have two distinct
    points on their boundary.  Side tests are exact, so clustered or
    collinear inputs are handled without tolerances.  The half-planes are
    expressed in the frame ``(x - center) / scale`` to avoid cancellation.
    Returns ``None`` if all points coincide.
    """
    n = P.shape[0]
    i, j = np.triu_indices(n, k=1)
    Pn = (P - center) / scale
    E = Pn[j] - Pn[i]
    L = np.hypot(E[:, 0], E[:, 1])
    # pairs that coincide after rescaling carry no direction
    ok = L > 0
    if not ok.any():
        return None
    i, j, E, L = i[ok], j[ok], E[ok], L[ok]
    N = np.column_stack([E[:, 1], -E[:, 0]]) / L[:, None]
    c = np.einsum("ij,ij->i", N, Pn[i])
    sign = _orientation_signs(P, i, j)
    # N.(p_k - p_i) has the opposite sign of orient(p_i, p_j, p_k)
    keep_lo = (sign >= 0).sum(axis=1) >= n - F
    keep_hi = (sign <= 0).sum(axis=1) >= n - F
    A = np.vstack([N[keep_lo], -N[keep_hi]])
    b = np.concatenate([c[keep_lo], -c[keep_hi]])
    return A, b


def _clip_polygon(A: np.ndarray, b: np.ndarray, box: float) -> np.ndarray:
    """Vertices (counter-clockwise) of ``{x : A x <= b}`` inside the square ``[-box, box]^2``."""
    V = [(-box, -box), (box, -box), (box, box), (-box, box)]
    for (a0, a1), c in zip(A.tolist(), b.tolist()):
        sv = [a0 * x + a1 * y - c for x, y in V]
        if max(sv) <= 0:
            continue
        out = []
        m = len(V)
        for k in range(m):
            sp, sq = sv[k], sv[(k + 1) % m]
            p = V[k]
            if sp <= 0:
                out.append(p)
            if (sp < 0 < sq) or (sq < 0 < sp):
                q = V[(k + 1) % m]
                lam = sp / (sp - sq)
                out.append((p[0] + lam * (q[0] - p[0]), p[1] + lam * (q[1] - p[1])))
        V = out
        if not V:
            break
    return np.array(V, dtype=float).reshape(-1, 2)


def _nearest_on_polygon(x: np.ndarray, V: np.ndarray, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    if np.all(A @ x <= b):
        return x.copy()
    if len(V) == 1:
        return V[0].copy()
    E = np.roll(V, -1, axis=0) - V
    ee = np.einsum("ij,ij->i", E, E)
    lam = np.clip(np.einsum("ij,ij->i", x - V, E) / np.where(ee > 0, ee, 1.0), 0.0, 1.0)
    Y = V + lam[:, None] * E
    return Y[int(np.argmin(np.einsum("ij,ij->i", Y - x, Y - x)))]


def _ldp_step(m: np.ndarray, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    h = A @ m - b
    if np.all(h <= 0):
        return m.copy()
    # min ||y|| s.t. G y >= h  with  G = -A,  x = m + y
    E = np.vstack([(-A).T, h[None, :]])
    f = np.zeros(d + 1)
    f[-1] = 1.0
    u = _nnls(E, f)
    r = E @ u - f
    if abs(r[-1]) < 1e-12:
        raise KernelEmptyError("half-space system is infeasible")
    return m - r[:d] / r[-1]


def project_onto_halfspaces(m, A: np.ndarray, b: np.ndarray, refine: int = 3) -> np.ndarray:
    """
    Euclidean projection of ``m`` onto ``{x : A x <= b}``.

    Least-distance programming reduced to a single NNLS solve, followed by
    up to ``refine`` correction solves started from the previous estimate
    (far targets lose accuracy).  Raises :class:`KernelEmptyError` if the
    system is infeasible.
    """
    x = _ldp_step(np.asarray(m, dtype=float), A, b)
    for _ in range(refine):
        if np.max(A @ x - b) <= 0:
            break
        x = _ldp_step(x, A, b)
    return x


def _kernel_lp(P: np.ndarray, subsets, target: np.ndarray) -> np.ndarray:
    """Stacked-system fallback: the kernel point closest to ``target`` in the 1-norm."""
    d = P.shape[1]
    q = len(subsets[0])
    r = len(subsets)
    # variables: x (d), t (d), gamma (r*q)
    nv = 2 * d + r * q
    cost = np.zeros(nv)
    cost[d:2 * d] = 1.0
    A_eq = np.zeros((r * (d + 1), nv))
    b_eq = np.zeros(r * (d + 1))
    for j, idx in enumerate(subsets):
        rows = slice(j * (d + 1), j * (d + 1) + d)
        cols = slice(2 * d + j * q, 2 * d + (j + 1) * q)
        A_eq[rows, cols] = P[list(idx)].T
        A_eq[rows, :d] = -np.eye(d)
        A_eq[j * (d + 1) + d, cols] = 1.0
        b_eq[j * (d + 1) + d] = 1.0
    A_ub = np.zeros((2 * d, nv))
    A_ub[:d, :d] = np.eye(d)
    A_ub[:d, d:2 * d] = -np.eye(d)
    A_ub[d:, :d] = -np.eye(d)
    A_ub[d:, d:2 * d] = -np.eye(d)
    b_ub = np.concatenate([target, -target])
    bounds = [(None, None)] * d + [(0, None)] * (nv - d)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options={"primal_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise KernelEmptyError(f"stacked kernel system infeasible ({res.message})")
    return res.x[:d]


@functools.lru_cache(maxsize=64)
def _kept_indices(n: int, F: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(i for i in range(n) if i not in om) for om in itertools.combinations(range(n), F))


def safe_kernel_point(base, F: int, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    """
    A point of the safe kernel of ``base`` for fault bound ``F``.

    The returned point is the kernel point nearest (Euclidean) to the mean
    of ``base``.  The kernel is guaranteed nonempty when
    ``len(base) >= (d + 1) * F + 1``; otherwise :class:`KernelEmptyError`
    may be raised.
    """
    if not isinstance(base, PointSet):
        base = PointSet.from_array(base)
    P = base.points
    n, d = P.shape
    if F < 0 or F >= n:
        raise ValueError(f"need 0 <= F < |base|, got F={F}, |base|={n}")
    subsets = _kept_indices(n, F)

    # the kernel sits inside every subset hull; try the whole set's frame
    # first, then the frame of the tightest subset (clustered inputs)
    mean = P.mean(axis=0)
    spread = float(np.abs(P - mean).max())
    if spread == 0.0:
        return mean
    x = _kernel_in_frame(P, F, subsets, mean, spread, tol)
    if x is not None:
        return x
    extents = [np.ptp(P[list(idx)], axis=0).max() for idx in subsets]
    tight = list(subsets[int(np.argmin(extents))])
    t_mean = P[tight].mean(axis=0)
    t_spread = float(np.abs(P[tight] - t_mean).max())
    if t_spread <= tol:
        # any kernel point is within t_spread of this mean, so it is a
        # kernel point itself up to tol whenever the kernel is nonempty
        if all(_weights_and_error(t_mean, P[list(idx)], tol)[1] <= tol for idx in subsets):
            return t_mean
        raise KernelEmptyError("the subset hulls have no common point")
    x = _kernel_in_frame(P, F, subsets, t_mean, t_spread, tol)
    if x is not None:
        return x
    return t_mean + t_spread * _kernel_lp((P - t_mean) / t_spread, subsets, (mean - t_mean) / t_spread)


def _kernel_in_frame(P, F, subsets, center, scale, tol):
    """Projection of the mean onto the kernel, computed in centred, rescaled coordinates."""
    n, d = P.shape
    Pn = (P - center) / scale
    target = (P.mean(axis=0) - center) / scale
    # solve inside the numerical affine hull of the whole set so that nearly
    # flat inputs are treated consistently by every subset
    # (directions in which every point is within tol / 10 are dropped; a
    # kernel point of the flattened set is then within tol of every hull)
    c = Pn.mean(axis=0)
    _, sv, Vt = np.linalg.svd(Pn - c)
    rank = int(np.sum(sv > 1e-10 * max(1.0, float(np.abs(Pn).max()))))
    off = [float(np.abs((Pn - c) @ Vt[r:].T).sum(axis=1).max()) if r < d else 0.0 for r in range(d + 1)]
    rank = min(rank, next(r for r in range(d + 1) if off[r] * scale <= 0.1 * tol))
    if rank == 0:
        return center + scale * c
    try:
        if rank == 2 and d == 2 and n - F >= 3:
            planar = _planar_kernel_halfspaces(P, F, center, scale)
            if planar is not None:
                A, b = planar
                if np.all(A @ target <= b):
                    return center + scale * target
                V = _clip_polygon(A, b + 1e-13, 2.0 * max(1.0, float(np.abs(Pn).max())))
                if len(V) == 0:
                    return None
                x = _nearest_on_polygon(target, V, A, b + 1e-13)
                if np.max(A @ x - b) <= min(tol / scale, 1e-9):
                    return center + scale * x
                return None
        U = Vt[:rank]
        Q = (Pn - c) @ U.T
        y = _kernel_reduced(Q, F, subsets, (target - c) @ U.T, tol / scale)
    except (KernelEmptyError, QhullError, np.linalg.LinAlgError):
        return None
    if y is None:
        return None
    return center + scale * (c + y @ U)


def _kernel_reduced(Q, F, subsets, target, tol):
    n, d = Q.shape
    if d == 1:
        v = np.sort(Q[:, 0])
        if v[F] > v[n - 1 - F] + tol:
            return None
        return np.clip(target, v[F], max(v[F], v[n - 1 - F]))
    parts = [hull_halfspaces(Q[list(idx)]) for idx in subsets]
    A = np.vstack([a for a, _ in parts])
    b = np.concatenate([bb for _, bb in parts])
    x = project_onto_halfspaces(target, A, b + 1e-13)
    if np.max(A @ x - b) <= min(tol, 1e-9):
        return x
    return None


def extreme_sets(X: PointSet, p: int, k: int) -> tuple[PointSet, PointSet]:
    """
    The ``k`` points with the smallest and the ``k`` with the largest
    ``p``-th coordinate (0-based ``p``); ties broken by ascending tag.
    """
    n = len(X)
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= |X|, got k={k}, |X|={n}")
    order = np.lexsort((np.asarray(X.tags), X.points[:, p]))
    return X.subset(order[:k]), X.subset(order[n - k:])


def auxiliary_point(L) -> np.ndarray:
    """Midpoint of the axis-aligned bounding box of ``L``."""
    P = _as_points(L)
    if P.shape[0] == 0 or P.size == 0:
        raise ValueError("empty point set")
    return 0.5 * P.min(axis=0) + 0.5 * P.max(axis=0)
