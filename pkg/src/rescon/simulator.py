"""
Synchronous round loop, trace recording and the DoS policy comparison.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import attacks as atk
from .analysis import HullDistance, MetricsRow, diameter
from .graph import in_neighbors
from .optimization import global_cost, step_size
from .protocol import (BLOCKED, HOLD_LAST, ZERO_SUBSTITUTE, AgentState, KernelFailure, collect_states,
                       consensus_input, hold_input, optimization_input, step)
from .scenario import OPTIMIZATION, Scenario, validation_report


class SimulationError(RuntimeError):
    """A round could not be computed (e.g. an empty safe kernel)."""

    def __init__(self, message: str, k: int, agent: int, dim: int | None = None):
        super().__init__(message)
        self.k = k
        self.agent = agent
        self.dim = dim


@dataclass
class SimulationTrace:
    scenario: Scenario
    digest: str
    t: np.ndarray                # (H,)
    x: np.ndarray                # (H, N, d) states at t_k
    u: np.ndarray                # (H, N, d), NaN for adversaries
    aux: np.ndarray              # (H, N, d), NaN for adversaries
    blocked: np.ndarray          # (H, N) blocked in-edges at t_k
    metrics: list[MetricsRow] = field(default_factory=list)
    final: np.ndarray | None = None   # (N, d) states at t_H

    @property
    def horizon(self) -> int:
        return len(self.t)

    @property
    def benign_index(self) -> list[int]:
        return [i - 1 for i in self.scenario.benign]

    def final_benign(self) -> np.ndarray:
        return self.final[self.benign_index]

    def agreement_point(self) -> np.ndarray:
        return self.final_benign().mean(axis=0)

    def final_diameter(self) -> np.ndarray:
        return np.asarray(self.metrics[-1].diameter)

    def validity_throughout(self) -> bool:
        return all(m.validity for m in self.metrics)

    def rounds_to_tolerance(self, tol: float = 1e-2) -> int | None:
        """First round after which every later per-dimension diameter stays below ``tol``."""
        below = [max(m.diameter) < tol for m in self.metrics]
        if not below or not below[-1]:
            return None
        k = len(below)
        while k > 0 and below[k - 1]:
            k -= 1
        return k + 1

    def rows(self):
        """``(k, t, agent, role, x, u, aux, blocked)`` per round and agent."""
        roles = self.scenario.graph.roles
        for k in range(self.horizon):
            for n in range(self.x.shape[1]):
                agent = n + 1
                yield (k, float(self.t[k]), agent, roles.get(agent, "benign"), self.x[k, n], self.u[k, n],
                       self.aux[k, n], int(self.blocked[k, n]))

    def write_csv(self, path_or_buf) -> None:
        d = self.x.shape[2]
        header = (["k", "t", "agent", "role"] + [f"x{p + 1}" for p in range(d)] + [f"u{p + 1}" for p in range(d)]
                  + [f"aux{p + 1}" for p in range(d)] + ["blocked"])
        own = isinstance(path_or_buf, (str, Path))
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k, t, agent, role, x, u, aux, b in self.rows():
                w.writerow([k, _num(t), agent, role, *map(_num, x), *map(_num, u), *map(_num, aux), b])
        finally:
            if own:
                fh.close()

    def csv_bytes(self) -> bytes:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue().encode()

    def summary(self, tol: float = 1e-2) -> dict:
        s = self.scenario
        out = {
            "scenario": s.name,
            "digest": self.digest,
            "mode": s.mode,
            "policy": s.policy,
            "seed": s.seed,
            "horizon": self.horizon,
            "final_diameter": [float(v) for v in self.final_diameter()],
            "validity": self.validity_throughout(),
            "delta_budget": self.metrics[-1].delta_budget,
            "rounds_to_tolerance": self.rounds_to_tolerance(tol),
            "tolerance": tol,
            "agreement_point": [float(v) for v in self.agreement_point()],
            "final_states": {i: [float(v) for v in self.final[i - 1]] for i in s.benign},
        }
        if s.mode == OPTIMIZATION:
            out["cost_series"] = [m.global_cost for m in self.metrics]
            out["cost_rate_series"] = [m.cost_rate for m in self.metrics]
        return out


def _num(v: float) -> str:
    return repr(float(v))


def _fresh_value(s: Scenario, j: int, i: int, t: float, X: dict[int, np.ndarray]) -> np.ndarray:
    adv = s.adversaries.get(j)
    if adv is None:
        return X[j]
    return atk.adversary_emit(adv, t, target=i, seed=s.seed)


def run(s: Scenario, validate: bool = True) -> SimulationTrace:
    """
    Simulate ``s.horizon`` synchronous rounds.

    Every benign agent reads the round-``k`` snapshot, so evaluation order
    is irrelevant.  Under hold-last an agent whose in-edges are all blocked
    keeps its state (plus the residual) until some edge reopens.  Metrics in row ``k`` describe the states after the
    update, at ``t_{k+1}``.
    """
    if validate:
        report = validation_report(s, check_definitions=False)
        failed = [r for r in report if r["enforced"] and not r["passed"]]
        if failed:
            from .scenario import ScenarioError
            raise ScenarioError("; ".join(f"{r['id']}: {r['detail']}" for r in failed), report)

    g, d, F, H, T = s.graph, s.d, s.F, s.horizon, s.T
    N = g.node_count
    benign = s.benign
    nbrs = {i: sorted(in_neighbors(g, i)) for i in benign}
    dos = s.dos_schedule()

    X0 = {i: s.initial(i) for i in benign}
    agents = {}
    for i in benign:
        cache = {j: _fresh_value(s, j, i, 0.0, X0) for j in nbrs[i]}
        agents[i] = AgentState(i, X0[i].copy(), s.alpha_at(i, 0.0), cache)

    ts = np.arange(H) * T
    xs = np.full((H, N, d), np.nan)
    us = np.full((H, N, d), np.nan)
    auxs = np.full((H, N, d), np.nan)
    blocked = np.zeros((H, N), dtype=int)
    metrics: list[MetricsRow] = []

    hull = HullDistance(np.array([X0[i] for i in benign]))
    budget = 0.0
    prev_cost = math.nan
    if s.mode == OPTIMIZATION:
        prev_cost = global_cost(s.costs, benign, np.mean([X0[i] for i in benign], axis=0))

    for k in range(H):
        t = float(ts[k])
        snap = {i: agents[i].x for i in benign}
        for a, spec in s.adversaries.items():
            xs[k, a - 1] = atk.adversary_emit(spec, t, seed=s.seed)
        cut = dos.blocked_edges(t)
        beta = step_size(s.steps, k, T) if s.mode == OPTIMIZATION else None
        new = {}
        eps_max = 0.0
        for i in benign:
            ag = agents[i]
            ag.alpha = s.alpha_at(i, t)
            xs[k, i - 1] = ag.x
            fresh = {}
            for j in nbrs[i]:
                if (i, j) in cut:
                    fresh[j] = BLOCKED
                    blocked[k, i - 1] += 1
                else:
                    fresh[j] = _fresh_value(s, j, i, t, snap)
            Xi = collect_states(ag, fresh, s.policy)
            isolated = s.policy == HOLD_LAST and blocked[k, i - 1] == len(nbrs[i])
            try:
                if isolated:
                    ctl = hold_input(ag)
                elif s.mode == OPTIMIZATION:
                    ctl = optimization_input(ag, Xi, d, F, s.costs[i], beta)
                else:
                    ctl = consensus_input(ag, Xi, d, F)
            except KernelFailure as exc:
                raise SimulationError(f"round {k} (t={t:g}): {exc}", k, i, exc.dim) from exc
            eps = atk.residual_sample(s.residual, i, t, d, seed=s.seed)
            eps_max = max(eps_max, float(np.linalg.norm(eps)))
            us[k, i - 1] = ctl.u
            auxs[k, i - 1] = ctl.aux
            new[i] = step(ag, ctl, eps).x
        for i in benign:
            agents[i].x = new[i]
        budget += eps_max

        states = np.array([new[i] for i in benign])
        valid = all(hull(x) <= budget + 1e-9 for x in states)
        cost = rate = math.nan
        if s.mode == OPTIMIZATION:
            cost = global_cost(s.costs, benign, states.mean(axis=0))
            rate = (cost - prev_cost) / T
            prev_cost = cost
        metrics.append(MetricsRow(t + T, tuple(float(v) for v in diameter(states)), valid, budget, cost, rate))

    final = np.full((N, d), np.nan)
    for i in benign:
        final[i - 1] = agents[i].x
    for a, spec in s.adversaries.items():
        final[a - 1] = atk.adversary_emit(spec, H * T, seed=s.seed)
    return SimulationTrace(s, s.digest(), ts, xs, us, auxs, blocked, metrics, final)


def compare_policies(s: Scenario, tol: float = 1e-2) -> dict:
    """Run hold-last and zero-substitute with the same seed and summarise both."""
    from dataclasses import replace

    traces = {p: run(replace(s, policy=p)) for p in (HOLD_LAST, ZERO_SUBSTITUTE)}
    hull = HullDistance(np.array([s.initial(i) for i in s.benign]))
    summary = {}
    for p, tr in traces.items():
        row = tr.summary(tol)
        pt = tr.agreement_point()
        row["agreement_distance_to_origin"] = float(np.linalg.norm(pt))
        row["agreement_distance_to_initial_hull"] = hull(pt)
        summary[p] = {k: row[k] for k in ("final_diameter", "validity", "rounds_to_tolerance", "agreement_point",
                                          "agreement_distance_to_origin", "agreement_distance_to_initial_hull")}
    summary["identical_traces"] = traces[HOLD_LAST].csv_bytes() == traces[ZERO_SUBSTITUTE].csv_bytes()
    return {"traces": traces, "summary": summary}
