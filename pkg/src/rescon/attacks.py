"""
Adversarial agents, edge-level denial of service, and residual disturbances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graph import Digraph, in_neighbors

MALICIOUS = "malicious"
BYZANTINE = "byzantine"
STUBBORN = "stubborn"
MODES = (MALICIOUS, BYZANTINE, STUBBORN)

Edge = tuple[int, int]


def _time_key(t: float) -> int:
    return int(round(t * 1_000_000))


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(k) & 0xFFFFFFFF for k in keys]]))


# --------------------------------------------------------------------- DoS

def merge_intervals(intervals: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sort closed intervals and merge the ones that overlap or touch."""
    out: list[list[float]] = []
    for lo, hi in sorted((float(a), float(b)) for a, b in intervals):
        if hi < lo:
            raise ValueError(f"interval [{lo}, {hi}] has negative duration")
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(a, b) for a, b in out]


@dataclass(frozen=True)
class DoSSchedule:
    """Closed blocking intervals per edge, plus the duration-bound constants."""

    intervals: Mapping[Edge, tuple[tuple[float, float], ...]] = field(default_factory=dict)
    mu_d: float = 0.0
    T_d: float = 2.0

    def __post_init__(self):
        merged = {}
        for edge, ivs in dict(self.intervals).items():
            edge = (int(edge[0]), int(edge[1]))
            m = merge_intervals(list(ivs) + list(merged.get(edge, ())))
            if m:
                merged[edge] = tuple(m)
        object.__setattr__(self, "intervals", merged)
        if self.mu_d < 0:
            raise ValueError("mu_d must be non-negative")
        if not self.T_d > 1:
            raise ValueError("T_d must exceed 1")

    @property
    def edges(self) -> list[Edge]:
        return sorted(self.intervals)

    def blocked_edges(self, t: float) -> set[Edge]:
        return {e for e in self.intervals if is_blocked(self, e, t)}

    def union_measure(self, t1: float, t2: float) -> float:
        """Measure of the times in ``(t1, t2)`` at which at least one edge is blocked."""
        pieces = []
        for ivs in self.intervals.values():
            for lo, hi in ivs:
                lo, hi = max(lo, t1), min(hi, t2)
                if hi > lo:
                    pieces.append((lo, hi))
        return sum(hi - lo for lo, hi in merge_intervals(pieces))


def is_blocked(s: DoSSchedule, edge: Edge, t: float) -> bool:
    for lo, hi in s.intervals.get((int(edge[0]), int(edge[1])), ()):
        if lo <= t <= hi:
            return True
        if lo > t:
            break
    return False


def dos_duration_ok(s: DoSSchedule, t1: float, t2: float) -> bool:
    """Duration bound ``|blocked(t1, t2)| <= mu_d + (t2 - t1) / T_d`` on one window."""
    if not (t2 > t1 >= 0):
        raise ValueError(f"invalid window ({t1}, {t2})")
    return s.union_measure(t1, t2) <= s.mu_d + (t2 - t1) / s.T_d + 1e-12


def dos_duration_ok_all(s: DoSSchedule, t_end: float) -> tuple[bool, tuple[float, float] | None]:
    """
    Check the duration bound on every window inside ``[0, t_end]``.

    With ``B(t)`` the blocked measure on ``(0, t)`` and
    ``g(t) = B(t) - t / T_d`` the bound reads ``g(t2) - g(t1) <= mu_d`` for
    all ``t1 < t2``.  ``g`` is piecewise linear with breakpoints at interval
    ends, so a running minimum over the breakpoints finds the worst window.
    Returns the worst violating window, if any.
    """
    union = []
    for ivs in s.intervals.values():
        union.extend(ivs)
    union = merge_intervals([(max(0.0, a), min(t_end, b)) for a, b in union if b > 0 and a < t_end])
    points = sorted({0.0, t_end, *[a for a, _ in union], *[b for _, b in union]})
    blocked = 0.0
    prev = 0.0
    g_min, t_min = 0.0, 0.0
    worst, window = -math.inf, None
    iv = 0
    for t in points:
        # accumulate blocked time on (prev, t)
        while iv < len(union) and union[iv][1] <= prev:
            iv += 1
        j = iv
        while j < len(union) and union[j][0] < t:
            blocked += max(0.0, min(union[j][1], t) - max(union[j][0], prev))
            j += 1
        g = blocked - t / s.T_d
        if g - g_min > worst:
            worst, window = g - g_min, (t_min, t)
        if g < g_min:
            g_min, t_min = g, t
        prev = t
    if worst > s.mu_d + 1e-12:
        return False, window
    return True, None


def periodic_intervals(period: float, on: float, phase: float, t_end: float,
                       jitter: float = 0.0, seed: int = 0) -> list[tuple[float, float]]:
    """
    Bursts of length ``on`` every ``period`` seconds starting at ``phase``.

    With ``jitter > 0`` each burst start is delayed by a uniform draw from
    ``[0, jitter]`` (reproducible from ``seed``).
    """
    if period <= 0 or on < 0 or on > period:
        raise ValueError("need period > 0 and 0 <= on <= period")
    rng = np.random.default_rng(seed)
    out = []
    start = phase
    while start <= t_end:
        shift = rng.uniform(0.0, jitter) if jitter > 0 else 0.0
        out.append((start + shift, start + shift + on))
        start += period
    return out


# --------------------------------------------------------------- adversaries

@dataclass(frozen=True)
class Term:
    """One coordinate of an adversary trajectory as a closed-form signal of time."""

    kind: str
    a: float = 0.0
    b: float = 0.0
    w: float = 1.0
    lo: float = 0.0
    hi: float = 1.0

    KINDS = ("constant", "linear", "sin", "cos", "uniform")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown trajectory term {self.kind!r}")

    def __call__(self, t: float, rng: np.random.Generator | None = None) -> float:
        k = self.kind
        if k == "constant":
            return self.b
        if k == "linear":
            return self.a * t + self.b
        if k == "sin":
            return self.a * math.sin(self.w * t) + self.b
        if k == "cos":
            return self.a * math.cos(self.w * t) + self.b
        return float(rng.uniform(self.lo, self.hi))

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.b}
        if self.kind == "linear":
            return {"kind": "linear", "a": self.a, "b": self.b}
        if self.kind in ("sin", "cos"):
            return {"kind": self.kind, "a": self.a, "w": self.w, "b": self.b}
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Term":
        kind = d["kind"]
        if kind == "constant":
            return cls("constant", b=float(d["value"]))
        if kind == "linear":
            return cls("linear", a=float(d["a"]), b=float(d.get("b", 0.0)))
        if kind in ("sin", "cos"):
            return cls(kind, a=float(d["a"]), w=float(d.get("w", 1.0)), b=float(d.get("b", 0.0)))
        if kind == "uniform":
            return cls("uniform", lo=float(d["lo"]), hi=float(d["hi"]))
        raise ValueError(f"unknown trajectory term {kind!r}")


Trajectory = tuple[Term, ...]


def constant_trajectory(x) -> Trajectory:
    return tuple(Term("constant", b=float(v)) for v in np.asarray(x, dtype=float))


@dataclass(frozen=True)
class AdversarySpec:
    agent: int
    mode: str
    trajectory: Trajectory
    per_target: Mapping[int, Trajectory] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown adversary mode {self.mode!r}")
        if self.per_target and self.mode != BYZANTINE:
            raise ValueError("per-target trajectories are only allowed in byzantine mode")
        for traj in self.per_target.values():
            if len(traj) != len(self.trajectory):
                raise ValueError("per-target trajectory dimension differs from the broadcast one")

    @property
    def dim(self) -> int:
        return len(self.trajectory)


def _evaluate(traj: Trajectory, t: float, rng_keys) -> np.ndarray:
    rng = None
    if any(term.kind == "uniform" for term in traj):
        rng = _rng(*rng_keys)
    return np.array([term(t, rng) for term in traj])


def adversary_emit(a: AdversarySpec, t: float, target: int | None = None, seed: int = 0) -> np.ndarray:
    """Value that adversary ``a`` sends to ``target`` at time ``t``."""
    traj = a.per_target.get(target, a.trajectory) if target is not None else a.trajectory
    tgt = -1 if target is None or target not in a.per_target else target
    return _evaluate(traj, t, (seed, a.agent, tgt, _time_key(t)))


def validate_attack_model(g: Digraph, F: int, model: str) -> bool:
    adv = set(g.adversaries)
    if model == "F-total":
        return len(adv) <= F
    if model == "F-local":
        return all(len(adv & in_neighbors(g, i)) <= F for i in g.benign)
    raise ValueError(f"unknown attack model {model!r}")


# ----------------------------------------------------------------- residuals

@dataclass(frozen=True)
class ResidualForm:
    kind: str = "zero"
    a: float = 0.0
    rho: float = 0.5
    direction: tuple[float, ...] | str | None = None
    table: Mapping[float, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("zero", "geometric", "table"):
            raise ValueError(f"unknown residual form {self.kind!r}")
        if self.kind == "geometric" and not (0 < self.rho < 1):
            raise ValueError("geometric residual needs 0 < rho < 1 to be summable")
        if isinstance(self.direction, str) and self.direction != "random":
            raise ValueError("direction must be a vector or 'random'")

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "geometric":
            out = {"kind": "geometric", "a": self.a, "rho": self.rho}
            if self.direction is not None:
                out["direction"] = self.direction if isinstance(self.direction, str) else list(self.direction)
            return out
        return {"kind": "table", "values": {float(t): list(v) for t, v in self.table.items()}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ResidualForm":
        kind = d.get("kind", "zero")
        if kind == "geometric":
            direction = d.get("direction")
            if direction is not None and not isinstance(direction, str):
                direction = tuple(float(v) for v in direction)
            return cls("geometric", a=float(d["a"]), rho=float(d["rho"]), direction=direction)
        if kind == "table":
            table = {float(t): tuple(float(x) for x in v) for t, v in d["values"].items()}
            return cls("table", table=table)
        return cls(kind)


@dataclass(frozen=True)
class ResidualSpec:
    default: ResidualForm = ResidualForm()
    per_agent: Mapping[int, ResidualForm] = field(default_factory=dict)

    def form(self, agent: int) -> ResidualForm:
        return self.per_agent.get(agent, self.default)

    def bound(self, agent: int, d: int, T: float, horizon: int | None = None) -> float:
        """Upper bound on the summed Euclidean norms of the agent's residuals."""
        f = self.form(agent)
        if f.kind == "zero":
            return 0.0
        if f.kind == "table":
            return float(sum(np.linalg.norm(v) for v in f.table.values()))
        per_step = abs(f.a) * (1.0 if f.direction is not None else math.sqrt(d))
        q = f.rho ** T
        if horizon is None:
            return per_step / (1 - q)
        return per_step * (1 - q ** horizon) / (1 - q)


def residual_sample(r: ResidualSpec, agent: int, t: float, d: int, seed: int = 0) -> np.ndarray:
    """
    Residual added to ``agent``'s update at time ``t``.

    A geometric form gives ``a * rho**t`` on every coordinate, or along a
    unit direction when one is configured (``'random'`` draws a direction
    reproducibly from ``(seed, agent, t)``).
    """
    f = r.form(agent)
    if f.kind == "zero":
        return np.zeros(d)
    if f.kind == "table":
        for tt, v in f.table.items():
            if abs(tt - t) <= 1e-9:
                return np.asarray(v, dtype=float)
        return np.zeros(d)
    mag = f.a * f.rho ** t
    if f.direction is None:
        return np.full(d, mag)
    if f.direction == "random":
        u = _rng(seed, agent, _time_key(t)).normal(size=d)
    else:
        u = np.asarray(f.direction, dtype=float)
    return mag * u / np.linalg.norm(u)
