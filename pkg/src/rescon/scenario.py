"""
Scenario model, YAML (de)serialisation and assumption checks.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import attacks as atk
from .graph import Digraph, check_min_indegree, check_r_robust, check_rs_robust, in_neighbors
from .optimization import (CostFunction, StepSchedule, check_redundancy, expr_from_dict, grid_minimizer,
                           subgradient_bound)
from .protocol import POLICIES, check_weight

CONSENSUS = "consensus"
OPTIMIZATION = "optimization"


class ScenarioError(ValueError):
    """Malformed scenario file or a failed enforced assumption."""

    def __init__(self, message: str, report: list | None = None):
        super().__init__(message)
        self.report = report or []


# ---------------------------------------------------------------- DoS config

@dataclass(frozen=True)
class DoSConfig:
    """DoS as written in a scenario: periodic generators bound to edge groups plus explicit intervals."""

    mu_d: float = 1.0
    T_d: float = 2.0
    generators: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    targets: Mapping[str, tuple[tuple[int, int], ...]] = field(default_factory=dict)
    intervals: tuple[tuple[tuple[int, int], float, float], ...] = ()

    def schedule(self, t_end: float, seed: int = 0) -> atk.DoSSchedule:
        per_edge: dict[tuple[int, int], list] = {}
        for gi, name in enumerate(sorted(self.targets)):
            if name not in self.generators:
                raise ScenarioError(f"DoS target group {name!r} has no generator")
            p = self.generators[name]
            ivs = atk.periodic_intervals(float(p["period"]), float(p["duration"]), float(p.get("phase", 0.0)), t_end,
                                         float(p.get("jitter", 0.0)), seed=seed * 1000 + gi)
            for e in self.targets[name]:
                per_edge.setdefault(tuple(e), []).extend(ivs)
        for e, start, dur in self.intervals:
            per_edge.setdefault(tuple(e), []).append((start, start + dur))
        return atk.DoSSchedule(per_edge, mu_d=self.mu_d, T_d=self.T_d)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"mu_d": self.mu_d, "T_d": self.T_d}
        if self.generators:
            out["generators"] = {k: dict(v) for k, v in self.generators.items()}
            out["targets"] = {k: [list(e) for e in v] for k, v in self.targets.items()}
        if self.intervals:
            out["intervals"] = [{"edge": list(e), "start": s, "duration": d} for e, s, d in self.intervals]
        return out

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "DoSConfig":
        if not d:
            return cls()
        gens = {str(k): {kk: float(vv) for kk, vv in v.items()} for k, v in (d.get("generators") or {}).items()}
        targets = {str(k): tuple(_edge(e) for e in v) for k, v in (d.get("targets") or {}).items()}
        ivs = tuple((_edge(iv["edge"]), float(iv["start"]), float(iv["duration"])) for iv in d.get("intervals") or ())
        return cls(float(d.get("mu_d", 1.0)), float(d.get("T_d", 2.0)), gens, targets, ivs)


def _edge(e) -> tuple[int, int]:
    if isinstance(e, str):
        m = re.fullmatch(r"\s*(\d+)\s*(?:<-|,)\s*(\d+)\s*", e)
        if not m:
            raise ScenarioError(f"cannot parse edge {e!r}; expected 'i <- j'")
        return int(m.group(1)), int(m.group(2))
    i, j = e
    return int(i), int(j)


# ------------------------------------------------------------------ scenario

@dataclass(frozen=True)
class Scenario:
    graph: Digraph
    d: int
    F: int
    initial_states: Mapping[int, tuple[float, ...]]
    mode: str = CONSENSUS
    attack_model: str = "F-local"
    alpha: Mapping[int, Any] = field(default_factory=dict)
    c: float = 0.9
    T: float = 0.5
    horizon: int = 400
    adversaries: Mapping[int, atk.AdversarySpec] = field(default_factory=dict)
    dos: DoSConfig = DoSConfig()
    residual: atk.ResidualSpec = atk.ResidualSpec()
    costs: Mapping[int, CostFunction] = field(default_factory=dict)
    steps: StepSchedule = StepSchedule()
    policy: str = "hold-last"
    seed: int = 0
    name: str = "scenario"

    @property
    def benign(self) -> list[int]:
        return self.graph.benign

    def alpha_at(self, i: int, t: float) -> float:
        a = self.alpha.get(i, 0.5)
        if isinstance(a, atk.Term):
            return a(t)
        return float(a)

    def dos_schedule(self) -> atk.DoSSchedule:
        return self.dos.schedule(self.horizon * self.T, self.seed)

    def initial(self, i: int) -> np.ndarray:
        return np.asarray(self.initial_states[i], dtype=float)

    # -------------------------------------------------------- serialisation

    def to_dict(self) -> dict:
        g = self.graph
        out: dict[str, Any] = {
            "name": self.name,
            "mode": self.mode,
            "d": self.d,
            "F": self.F,
            "attack_model": self.attack_model,
            "T": self.T,
            "horizon": self.horizon,
            "c": self.c,
            "policy": self.policy,
            "seed": self.seed,
            "graph": {
                "nodes": g.node_count,
                "adversaries": g.adversaries,
                "in_neighbors": {i: sorted(in_neighbors(g, i)) for i in g.nodes},
            },
            "initial_states": {i: list(v) for i, v in sorted(self.initial_states.items())},
        }
        alphas = {i: (a.to_dict() if isinstance(a, atk.Term) else a) for i, a in sorted(self.alpha.items())}
        vals = list(alphas.values())
        if vals and all(not isinstance(v, dict) for v in vals) and len(set(vals)) == 1 and set(alphas) == set(self.benign):
            out["alpha"] = vals[0]
        else:
            out["alpha"] = alphas
        out["adversaries"] = [_adv_to_dict(a) for _, a in sorted(self.adversaries.items())]
        out["dos"] = self.dos.to_dict()
        out["residual"] = {"default": self.residual.default.to_dict()}
        if self.residual.per_agent:
            out["residual"]["per_agent"] = {i: f.to_dict() for i, f in sorted(self.residual.per_agent.items())}
        if self.costs:
            out["costs"] = {i: f.to_dict() for i, f in sorted(self.costs.items())}
        out["steps"] = self.steps.to_dict()
        return out

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _adv_to_dict(a: atk.AdversarySpec) -> dict:
    out = {"agent": a.agent, "mode": a.mode, "trajectory": [t.to_dict() for t in a.trajectory]}
    if a.per_target:
        out["per_target"] = {k: [t.to_dict() for t in v] for k, v in sorted(a.per_target.items())}
    return out


def _traj(items) -> atk.Trajectory:
    out = []
    for it in items:
        if isinstance(it, (int, float)):
            out.append(atk.Term("constant", b=float(it)))
        else:
            out.append(atk.Term.from_dict(it))
    return tuple(out)


def _graph_from_dict(d: Mapping) -> Digraph:
    n = int(d["nodes"])
    edges = set()
    for i, js in (d.get("in_neighbors") or {}).items():
        for j in js:
            edges.add((int(i), int(j)))
    for e in d.get("edges") or ():
        edges.add(_edge(e))
    roles = {int(a): "adversarial" for a in d.get("adversaries") or ()}
    return Digraph(n, frozenset(edges), roles)


def scenario_from_dict(raw: Mapping) -> Scenario:
    try:
        return _scenario_from_dict(raw)
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        what = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        raise ScenarioError(f"invalid scenario: {what}") from exc


def _scenario_from_dict(raw: Mapping) -> Scenario:
    g = _graph_from_dict(raw["graph"])
    d = int(raw["d"])
    F = int(raw["F"])
    init = {int(i): tuple(float(x) for x in v) for i, v in (raw.get("initial_states") or {}).items()}
    for i in g.benign:
        if i not in init:
            raise ScenarioError(f"benign agent {i} has no initial state")
    for i, v in init.items():
        if len(v) != d:
            raise ScenarioError(f"initial state of agent {i} is not {d}-dimensional")

    alpha_raw = raw.get("alpha", 0.5)
    if isinstance(alpha_raw, Mapping):
        alpha = {int(i): (atk.Term.from_dict(a) if isinstance(a, Mapping) else float(a)) for i, a in alpha_raw.items()}
    else:
        alpha = {i: float(alpha_raw) for i in g.benign}

    advs = {}
    for a in raw.get("adversaries") or ():
        agent = int(a["agent"])
        mode = a.get("mode", atk.MALICIOUS)
        if mode == atk.STUBBORN:
            if agent not in init:
                raise ScenarioError(f"stubborn agent {agent} needs an initial state")
            traj = atk.constant_trajectory(init[agent])
        else:
            traj = _traj(a["trajectory"])
        per_target = {int(k): _traj(v) for k, v in (a.get("per_target") or {}).items()}
        spec = atk.AdversarySpec(agent, mode, traj, per_target)
        if spec.dim != d:
            raise ScenarioError(f"adversary {agent} trajectory is not {d}-dimensional")
        advs[agent] = spec
    for a in g.adversaries:
        if a not in advs:
            raise ScenarioError(f"adversarial agent {a} has no behaviour spec")
    for a in advs:
        if a not in g.adversaries:
            raise ScenarioError(f"agent {a} has a behaviour spec but is not marked adversarial")

    res_raw = raw.get("residual") or {}
    residual = atk.ResidualSpec(
        atk.ResidualForm.from_dict(res_raw.get("default") or {"kind": "zero"}),
        {int(i): atk.ResidualForm.from_dict(f) for i, f in (res_raw.get("per_agent") or {}).items()},
    )
    costs = {int(i): CostFunction(int(i), expr_from_dict(e)) for i, e in (raw.get("costs") or {}).items()}
    mode = raw.get("mode", CONSENSUS)
    if mode not in (CONSENSUS, OPTIMIZATION):
        raise ScenarioError(f"unknown mode {mode!r}")
    if mode == OPTIMIZATION:
        missing = [i for i in g.benign if i not in costs]
        if missing:
            raise ScenarioError(f"optimization mode: no cost function for benign agents {missing}")
    policy = raw.get("policy", "hold-last")
    if policy not in POLICIES:
        raise ScenarioError(f"unknown policy {policy!r}")
    attack_model = raw.get("attack_model", "F-local")
    if attack_model not in ("F-local", "F-total"):
        raise ScenarioError(f"unknown attack model {attack_model!r}")
    return Scenario(
        graph=g, d=d, F=F, initial_states=init, mode=mode, attack_model=attack_model, alpha=alpha,
        c=float(raw.get("c", 0.9)), T=float(raw.get("T", 0.5)), horizon=int(raw.get("horizon", 400)),
        adversaries=advs, dos=DoSConfig.from_dict(raw.get("dos")), residual=residual, costs=costs,
        steps=StepSchedule.from_dict(raw.get("steps") or {}), policy=policy, seed=int(raw.get("seed", 0)),
        name=str(raw.get("name", "scenario")),
    )


# ---------------------------------------------------------------- overrides

OVERRIDE_KEYS = {
    "name", "mode", "d", "F", "attack_model", "T", "horizon", "c", "alpha", "policy", "seed",
    "dos.mu_d", "dos.T_d",
    "residual.default.kind", "residual.default.a", "residual.default.rho",
    "steps.form", "steps.a", "steps.b", "steps.c0",
}


def is_override_key(key: str) -> bool:
    """Documented keys, plus ``costs.<agent>`` for replacing one local cost expression."""
    return key in OVERRIDE_KEYS or re.fullmatch(r"costs\.\d+", key) is not None


def apply_overrides(raw: Mapping, overrides: Mapping[str, Any]) -> dict:
    """Set documented dotted keys on a raw scenario mapping (as if the file were edited)."""
    out = copy.deepcopy(dict(raw))
    for key, value in overrides.items():
        if not is_override_key(key):
            raise ScenarioError(f"unknown override key {key!r}; allowed: {', '.join(sorted(OVERRIDE_KEYS))}")
        if isinstance(value, str):
            value = yaml.safe_load(value)
        node = out
        parts = key.split(".")
        if parts[0] == "costs":
            parts[1] = int(parts[1])
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ScenarioError(f"override {key!r} does not address a mapping")
        node[parts[-1]] = value
    return out


# -------------------------------------------------------------------- I/O

def read_raw(path) -> dict:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"cannot parse {path}{where}: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return raw


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("rescon") / "scenarios" / f"{name}.yaml"))


def bundled_names() -> list[str]:
    return sorted(p.stem for p in (resources.files("rescon") / "scenarios").iterdir() if p.name.endswith(".yaml"))


def load_scenario(path, overrides: Mapping[str, Any] | None = None, validate: bool = True) -> Scenario:
    """
    Parse and (by default) validate a scenario file.

    ``path`` may name a bundled scenario (e.g. ``"table1_consensus"``).
    Raises :class:`ScenarioError` carrying the full report when an enforced
    assumption fails.
    """
    p = Path(path)
    if not p.exists() and str(path) in bundled_names():
        p = bundled_path(str(path))
    raw = read_raw(p)
    if overrides:
        raw = apply_overrides(raw, overrides)
    s = scenario_from_dict(raw)
    if validate:
        report = validation_report(s)
        failed = [r for r in report if r["enforced"] and not r["passed"]]
        if failed:
            msg = "; ".join(f"{r['id']} ({r['name']}): {r['detail']}" for r in failed)
            raise ScenarioError(f"scenario {s.name!r} failed validation: {msg}", report)
    return s


# ------------------------------------------------------------- validation

def _item(id_, name, passed, detail, enforced=True) -> dict:
    return {"id": id_, "name": name, "passed": bool(passed), "detail": detail, "enforced": enforced}


def validation_report(s: Scenario, check_definitions: bool = True) -> list[dict]:
    """
    One entry per assumption (A1..A6), per graph/objective definition
    (D1..D3) and per structural constraint.  Entries with
    ``enforced=False`` are informational sufficient conditions.
    """
    g, d, F = s.graph, s.d, s.F
    rep = []
    t_end = s.horizon * s.T

    bad = [i for i in g.nodes if i not in s.residual.per_agent and s.residual.default.kind == "geometric"
           and not (0 < s.residual.default.rho < 1)]
    bounds = {i: s.residual.bound(i, d, s.T) for i in g.benign}
    rep.append(_item("A1", "summable residuals", not bad and all(math.isfinite(b) for b in bounds.values()),
                     f"max total residual norm {max(bounds.values(), default=0.0):.6g}"))

    need = (d + 1) * F + 1
    low = {i: len(in_neighbors(g, i)) for i in g.nodes if len(in_neighbors(g, i)) < need}
    rep.append(_item("A2", "in-degree >= (d+1)F+1", not low,
                     f"need {need}; violating nodes {low}" if low else f"every node has >= {need} in-neighbours"))
    assert check_min_indegree(g, d, F) == (not low)

    sched = s.dos_schedule()
    unknown = [e for e in sched.edges if e not in g.edges]
    ok, window = atk.dos_duration_ok_all(sched, t_end)
    detail = (f"worst window {window} exceeds mu_d + len/T_d" if not ok
              else f"blocked measure on (0, {t_end:g}) is {sched.union_measure(0, t_end):.6g}")
    if unknown:
        detail += f"; edges not in the graph: {unknown}"
    rep.append(_item("A3", "DoS duration bound", ok and not unknown, detail))

    amodel = atk.validate_attack_model(g, F, s.attack_model)
    rep.append(_item("attack-model", f"{s.attack_model} attack model", amodel,
                     f"adversaries {g.adversaries} with F={F}"))

    weight_errors = []
    try:
        check_weight(0.75, s.c)
    except ValueError as exc:
        weight_errors.append(str(exc))
    for i in g.benign:
        for k in range(s.horizon if isinstance(s.alpha.get(i), atk.Term) else 1):
            try:
                check_weight(s.alpha_at(i, k * s.T), s.c)
            except ValueError as exc:
                weight_errors.append(f"agent {i} at round {k}: {exc}")
                break
    rep.append(_item("weights", "1-c < alpha < c with 0.5 < c < 1", not weight_errors,
                     "; ".join(weight_errors) or f"c={s.c}"))

    if s.mode == OPTIMIZATION:
        fs = [s.costs[i] for i in g.benign]
        pts = np.array([s.initial(i) for i in g.benign])
        margin = max(bounds.values(), default=0.0) + 1.0
        box = [(float(lo) - margin, float(hi) + margin) for lo, hi in zip(pts.min(axis=0), pts.max(axis=0))]
        L = subgradient_bound(fs, box, n_per_axis=21 if d <= 2 else 9)
        rep.append(_item("A4", "bounded subgradients", math.isfinite(L), f"L ~= {L:.6g} on {box}"))
        problems = s.steps.validate(s.T)
        rep.append(_item("A5", "diminishing steps", not problems, "; ".join(problems) or s.steps.to_dict()))
        if d <= 3:
            res = max(hi - lo for lo, hi in box) / (200 if d <= 2 else 40)
            xm = grid_minimizer(fs, box, res)
            interior = all(lo + res < v < hi - res for v, (lo, hi) in zip(xm, box))
            rep.append(_item("A6", "bounded nonempty optimal set", interior,
                             f"grid minimiser {xm.tolist()} {'inside' if interior else 'on the edge of'} {box}",
                             enforced=False))
            if check_definitions:
                red = check_redundancy(fs, min(F, len(fs) - 1), box, res)
                rep.append(_item("D3", f"{F}-redundant benign costs", red, "grid oracle", enforced=False))

    if check_definitions and g.node_count <= 16:
        if s.attack_model == "F-local":
            cert = check_r_robust(g, min(need, g.node_count))
            label = f"{need}-robust"
            rep.append(_item("D1", label, cert.holds, cert.to_dict(), enforced=False))
        else:
            r = min(d * F + 1, g.node_count)
            cert = check_rs_robust(g, r, min(F + 1, g.node_count))
            rep.append(_item("D2", f"({r},{F + 1})-robust", cert.holds, cert.to_dict(), enforced=False))
    return rep
