import itertools

import numpy as np
import pytest

from rescon.graph import Digraph
from rescon.scenario import bundled_path, read_raw

TABLE1_IN = {
    1: [2, 3, 5, 7, 9, 10, 11, 12],
    3: [1, 2, 4, 5, 6, 7, 11],
    4: [2, 3, 5, 8, 9, 10, 12],
    5: [1, 3, 4, 6, 7, 11, 12],
    6: [2, 3, 5, 7, 9, 10, 11],
    7: [1, 2, 3, 5, 8, 9, 10, 11],
    8: [2, 3, 5, 7, 9, 11, 12],
    9: [1, 3, 5, 7, 8, 10, 12],
    10: [1, 3, 5, 7, 9, 11, 12],
    11: [1, 3, 4, 5, 8, 9, 12],
}


@pytest.fixture
def table1_graph():
    nbrs = dict(TABLE1_IN)
    for a in (2, 12):
        nbrs[a] = [j for j in range(1, 13) if j != a]
    return Digraph.from_in_neighbors(nbrs, 12, adversaries=[2, 12])


@pytest.fixture
def consensus_raw():
    return read_raw(bundled_path("table1_consensus"))


@pytest.fixture
def optimization_raw():
    return read_raw(bundled_path("table1_optimization"))


def brute_r_robust(n, edges, r):
    """Direct evaluation of the r-reachability clause over all disjoint pairs."""
    inn = {i: {j for a, j in edges if a == i} for i in range(1, n + 1)}

    def reachable(S):
        return any(len(inn[i] - S) >= r for i in S)

    for labels in itertools.product(range(3), repeat=n):
        S1 = {i + 1 for i in range(n) if labels[i] == 1}
        S2 = {i + 1 for i in range(n) if labels[i] == 2}
        if S1 and S2 and not (reachable(S1) or reachable(S2)):
            return False
    return True


def brute_rs_robust(n, edges, r, s):
    inn = {i: {j for a, j in edges if a == i} for i in range(1, n + 1)}
    for labels in itertools.product(range(3), repeat=n):
        S1 = {i + 1 for i in range(n) if labels[i] == 1}
        S2 = {i + 1 for i in range(n) if labels[i] == 2}
        if not (S1 and S2):
            continue
        X1 = {i for i in S1 if len(inn[i] - S1) >= r}
        X2 = {i for i in S2 if len(inn[i] - S2) >= r}
        if not (X1 == S1 or X2 == S2 or len(X1) + len(X2) >= s):
            return False
    return True


def random_digraph(rng, n, p):
    edges = {(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j and rng.random() < p}
    return Digraph(n, frozenset(edges))


def brute_sarymsakov(A):
    """Both clauses evaluated literally over every disjoint nonempty pair."""
    n = A.shape[0]

    def cons(V):
        return {j for i in V for j in range(n) if A[i, j] > 0}

    for labels in itertools.product(range(3), repeat=n):
        V1 = [i for i in range(n) if labels[i] == 1]
        V2 = [i for i in range(n) if labels[i] == 2]
        if not (V1 and V2):
            continue
        c1, c2 = cons(V1), cons(V2)
        if not (c1 & c2) and len(c1 | c2) <= len(V1) + len(V2):
            return False
    return True


def random_stochastic(rng, n, density):
    M = rng.random((n, n)) * (rng.random((n, n)) < density)
    for i in range(n):
        if M[i].sum() == 0:
            M[i, rng.integers(n)] = 1.0
    return M / M.sum(axis=1, keepdims=True)


def in_all_subset_hulls(x, P, F, tol):
    from rescon.geometry import hull_membership
    n = len(P)
    return all(hull_membership(x, P[list(keep)], tol) for keep in itertools.combinations(range(n), n - F))


def lp_in_hull(x, P, tol=1e-9):
    """Independent membership oracle: feasibility LP with an explicit slack."""
    from scipy.optimize import linprog
    n, d = P.shape
    # variables: weights (n), slack s; minimise s s.t. |P^T w - x| <= s, sum w = 1, w >= 0
    c = np.r_[np.zeros(n), 1.0]
    A_ub = np.block([[P.T, -np.ones((d, 1))], [-P.T, -np.ones((d, 1))]])
    b_ub = np.r_[x, -x]
    A_eq = np.r_[np.ones(n), 0.0][None]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=[(0, None)] * (n + 1), method="highs")
    return res.status == 0 and res.fun <= tol


def small_raw(n=8, d=2, F=1, seed=0, horizon=30, adversaries=(), mode="consensus", residual=None, dos=None,
              policy="hold-last", edges=None):
    """A compact scenario on a complete (or given) digraph with random initial states."""
    rng = np.random.default_rng(seed)
    if edges is None:
        edges = [[i, j] for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    raw = {
        "name": f"small_{seed}", "mode": mode, "d": d, "F": F, "attack_model": "F-local", "T": 0.5,
        "horizon": horizon, "alpha": 0.5, "c": 0.9, "policy": policy, "seed": seed,
        "graph": {"nodes": n, "adversaries": list(adversaries), "edges": edges},
        "initial_states": {i: [float(v) for v in rng.uniform(-5, 5, d)] for i in range(1, n + 1)
                           if i not in adversaries},
        "adversaries": [{"agent": a, "mode": "malicious",
                         "trajectory": [{"kind": "linear", "a": 1.0, "b": 3.0}] * d} for a in adversaries],
        "residual": {"default": residual or {"kind": "zero"}},
    }
    if dos is not None:
        raw["dos"] = dos
    if mode == "optimization":
        raw["costs"] = {i: {"op": "sqnorm", "center": [0.5] * d} for i in range(1, n + 1) if i not in adversaries}
        raw["steps"] = {"form": "harmonic", "a": 1, "b": 5, "c0": 1}
    return raw


def pytest_terminal_summary(terminalreporter):
    import sys
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
