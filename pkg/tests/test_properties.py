import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import brute_r_robust, brute_sarymsakov, in_all_subset_hulls
from rescon.analysis import is_sarymsakov
from rescon.attacks import DoSSchedule, merge_intervals
from rescon.geometry import auxiliary_point, hull_membership, safe_kernel_point
from rescon.graph import Digraph, check_r_robust

coords = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def kernel_instances(draw):
    d = draw(st.integers(1, 2))
    F = draw(st.integers(1, 2))
    n = draw(st.integers((d + 1) * F + 1, (d + 1) * F + 3))
    pts = draw(arrays(float, (n, d), elements=st.integers(-6, 6).map(float)))
    scale = draw(st.sampled_from([1.0, 1e-3, 37.5]))
    return pts * scale, F


@SETTINGS
@given(kernel_instances())
def test_kernel_point_in_every_subset_hull(inst):
    P, F = inst
    assert in_all_subset_hulls(safe_kernel_point(P, F), P, F, 1e-9)


@SETTINGS
@given(arrays(float, (5, 2), elements=coords), st.lists(st.floats(0, 1), min_size=5, max_size=5))
def test_convex_combination_is_member(P, w):
    w = np.asarray(w) + 1e-3
    w /= w.sum()
    assert hull_membership(w @ P, P, tol=1e-9 * max(1.0, np.abs(P).max()))


@SETTINGS
@given(arrays(float, (4, 3), elements=coords))
def test_auxiliary_point_inside_box(L):
    a = auxiliary_point(L)
    assert np.all(L.min(axis=0) <= a) and np.all(a <= L.max(axis=0))


@st.composite
def digraphs(draw):
    n = draw(st.integers(2, 6))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    return Digraph(n, frozenset(edges))


@SETTINGS
@given(digraphs(), st.integers(1, 5))
def test_robustness_matches_brute_force_and_is_monotone(g, r):
    r = min(r, g.node_count)
    holds = check_r_robust(g, r).holds
    assert holds == brute_r_robust(g.node_count, g.edges, r)
    if holds and r > 1:
        assert check_r_robust(g, r - 1).holds


@st.composite
def stochastic(draw):
    n = draw(st.integers(1, 5))
    M = draw(arrays(float, (n, n), elements=st.sampled_from([0.0, 0.0, 1.0, 2.0])))
    for i in range(n):
        if M[i].sum() == 0:
            M[i, i] = 1.0
    return M / M.sum(axis=1, keepdims=True)


@SETTINGS
@given(stochastic())
def test_sarymsakov_matches_brute_force(M):
    assert is_sarymsakov(M) == brute_sarymsakov(M)


intervals = st.lists(st.tuples(st.floats(0, 50), st.floats(0, 5)).map(lambda p: (p[0], p[0] + p[1])), max_size=8)


@SETTINGS
@given(intervals)
def test_merged_intervals_are_disjoint_and_cover(ivs):
    m = merge_intervals(ivs)
    assert all(a[1] < b[0] for a, b in zip(m, m[1:]))
    for lo, hi in ivs:
        assert any(a <= lo and hi <= b for a, b in m)


@SETTINGS
@given(intervals, intervals)
def test_union_measure_bounds(a, b):
    s = DoSSchedule({(1, 2): a, (2, 1): b})
    total = s.union_measure(0, 60)
    assert total <= sum(h - l for l, h in a + b) + 1e-9
    assert total + 1e-9 >= max(DoSSchedule({(1, 2): a}).union_measure(0, 60),
                               DoSSchedule({(2, 1): b}).union_measure(0, 60))
