import itertools

import numpy as np
import pytest

from conftest import in_all_subset_hulls, lp_in_hull
from rescon.geometry import (KernelEmptyError, PointSet, auxiliary_point, convex_weights, enumerate_subsets,
                             extreme_sets, hull_halfspaces, hull_membership, project_onto_halfspaces,
                             safe_kernel_point)

SQUARE = np.array([[0.0, 0.0], [1, 0], [0, 1], [1, 1]])


def test_membership_square():
    assert hull_membership([0.5, 0.5], SQUARE)
    assert not hull_membership([1.5, 0.0], SQUARE)
    assert hull_membership([1.0, 1.0], SQUARE)


def test_convex_weights_reconstruct():
    w = convex_weights([0.25, 0.75], SQUARE)
    assert w.min() >= 0 and abs(w.sum() - 1) < 1e-12
    assert np.allclose(w @ SQUARE, [0.25, 0.75], atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_membership_by_construction(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    n = int(rng.integers(1, 9))
    P = rng.normal(size=(n, d))
    w = rng.dirichlet(np.ones(n))
    assert hull_membership(w @ P, P)
    # push far outside along a random direction
    v = rng.normal(size=d)
    far = P.mean(axis=0) + 10 * (np.abs(P).max() + 1) * v / np.linalg.norm(v)
    assert not hull_membership(far, P)


@pytest.mark.parametrize("seed", range(20))
def test_membership_agrees_with_lp(seed):
    rng = np.random.default_rng(1000 + seed)
    P = rng.normal(size=(6, 2))
    for x in rng.normal(scale=1.5, size=(10, 2)):
        assert hull_membership(x, P) == lp_in_hull(x, P, 1e-9)


def test_enumerate_subsets_counts():
    base = PointSet.from_array(np.arange(4.0)[:, None])
    assert len(enumerate_subsets(base, 1)) == 4
    assert len(enumerate_subsets(base, 0)) == 1 and len(enumerate_subsets(base, 0)[0]) == 4
    assert len(enumerate_subsets(PointSet.from_array(np.zeros((7, 2))), 2)) == 21
    with pytest.raises(ValueError):
        enumerate_subsets(base, 4)


def test_kernel_1d_interval():
    x = safe_kernel_point(np.array([[0.0], [1], [2], [3]]), 1)
    assert 1 - 1e-12 <= x[0] <= 2 + 1e-12


def test_kernel_f0_is_mean():
    P = np.array([[0.0, 0], [4, 0], [0, 2]])
    assert np.allclose(safe_kernel_point(P, 0), P.mean(axis=0))


def test_kernel_square_center():
    assert np.allclose(safe_kernel_point(SQUARE, 1), [0.5, 0.5], atol=1e-9)
    # brute-force grid: the only grid point inside all four omit-one triangles is the centre
    g = np.linspace(0, 1, 1001)
    X, Y = np.meshgrid(g, g, indexing="ij")
    inside = np.ones_like(X, dtype=bool)
    for tri in itertools.combinations(SQUARE, 3):
        signs = []
        for a, b in zip(tri, tri[1:] + tri[:1]):
            signs.append((b[0] - a[0]) * (Y - a[1]) - (b[1] - a[1]) * (X - a[0]))
        s = np.stack(signs)
        inside &= (s >= -1e-12).all(axis=0) | (s <= 1e-12).all(axis=0)
    assert [(X[i], Y[i]) for i in zip(*np.nonzero(inside))] == [(0.5, 0.5)]


def test_kernel_empty_raises():
    # hulls of the singletons (or of the triangle's edges) do not meet
    with pytest.raises(KernelEmptyError):
        safe_kernel_point(np.array([[0.0, 0.0], [1.0, 1.0]]), 1)
    with pytest.raises(KernelEmptyError):
        safe_kernel_point(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]), 1)
    with pytest.raises(KernelEmptyError):
        safe_kernel_point(np.array([[0.0], [1.0], [2.0], [3.0]]), 2)


@pytest.mark.parametrize("d,F", [(1, 1), (2, 1), (2, 2), (3, 1)])
def test_kernel_point_is_in_every_subset_hull(d, F):
    rng = np.random.default_rng(d * 10 + F)
    for _ in range(15):
        P = rng.normal(size=((d + 1) * F + 1, d))
        x = safe_kernel_point(P, F)
        assert in_all_subset_hulls(x, P, F, 1e-9)


def test_kernel_with_duplicates_and_collinear():
    P = np.array([[1.0, 1.0]] * 3 + [[0, 0], [2, 2], [3, 3], [1, 1]])
    x = safe_kernel_point(P, 2)
    assert in_all_subset_hulls(x, P, 2, 1e-9)
    Q = np.c_[np.linspace(0, 1, 7), 2 * np.linspace(0, 1, 7) + 1]
    assert in_all_subset_hulls(safe_kernel_point(Q, 2), Q, 2, 1e-9)


def test_extreme_sets_sorting_and_ties():
    X = PointSet.from_array(np.array([[5.0], [1], [4], [2], [3]]))
    Y, Z = extreme_sets(X, 0, 2)
    assert dict(zip(Y.tags, Y.points[:, 0])) == {2: 1.0, 4: 2.0}
    assert dict(zip(Z.tags, Z.points[:, 0])) == {3: 4.0, 1: 5.0}
    Y, Z = extreme_sets(X, 0, 5)
    assert Y.tags == Z.tags == X.tags
    T = PointSet(np.array([[0.0], [0.0], [1.0]]), (3, 1, 2))
    assert set(extreme_sets(T, 0, 2)[0].tags) == {1, 3}


def test_auxiliary_point_is_box_midpoint():
    assert np.allclose(auxiliary_point([[0, 0], [2, 4]]), [1, 2])
    assert np.allclose(auxiliary_point([[3, 7]]), [3, 7])
    assert np.allclose(auxiliary_point([[0, 0], [1, 0], [0, 1]]), [0.5, 0.5])


def test_projection_onto_halfspaces():
    A, b = hull_halfspaces(SQUARE)
    assert np.allclose(project_onto_halfspaces(np.array([2.0, 0.5]), A, b), [1, 0.5], atol=1e-10)
    assert np.allclose(project_onto_halfspaces(np.array([3.0, 3.0]), A, b), [1, 1], atol=1e-10)
    inside = np.array([0.2, 0.3])
    assert np.allclose(project_onto_halfspaces(inside, A, b), inside)


def test_hull_halfspaces_degenerate_segment():
    A, b = hull_halfspaces(np.array([[0.0, 0.0], [2.0, 2.0]]))
    assert np.all(A @ np.array([1.0, 1.0]) <= b + 1e-9)
    assert np.any(A @ np.array([1.0, 0.0]) > b + 1e-6)


def test_kernel_of_nearly_collinear_cluster():
    # converged states seen in a simulation: four points within 1e-4, off-line by ~1e-9
    P = np.array([[1.2799243561909632, 0.5239345951929304],
                  [1.2799243568532646, 0.5239345965052297],
                  [1.2799046364625744, 0.5239922412039071],
                  [1.2799586956526854, 0.5238342270488232]])
    assert in_all_subset_hulls(safe_kernel_point(P, 1), P, 1, 1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_kernel_of_jittered_clusters(seed):
    rng = np.random.default_rng(seed)
    for _ in range(30):
        n, F = 7, 2
        t = rng.normal(size=n) * 10 ** rng.uniform(-6, -2)
        u = rng.normal(size=2)
        base = rng.normal(size=2) + t[:, None] * u / np.linalg.norm(u)
        base += rng.normal(size=(n, 2)) * 10 ** rng.uniform(-12, -7)
        assert in_all_subset_hulls(safe_kernel_point(base, F), base, F, 1e-9)
