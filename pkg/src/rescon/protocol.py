"""
Per-agent update laws: resilient consensus and its subgradient extension,
with the hold-last-state rule for edges blocked by DoS.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import KernelEmptyError, PointSet, auxiliary_point, extreme_sets, safe_kernel_point
from .optimization import CostFunction, subgradient

HOLD_LAST = "hold-last"
ZERO_SUBSTITUTE = "zero-substitute"
POLICIES = (HOLD_LAST, ZERO_SUBSTITUTE)


class _Blocked:
    def __repr__(self):
        return "BLOCKED"


BLOCKED = _Blocked()


def check_weight(alpha: float, c: float) -> None:
    if not (0.5 < c < 1):
        raise ValueError(f"c must satisfy 0.5 < c < 1, got {c}")
    if not (alpha < c and 1 - alpha < c):
        raise ValueError(f"weight {alpha} violates alpha < c and 1 - alpha < c for c={c}")


@dataclass
class AgentState:
    id: int
    x: np.ndarray
    alpha: float = 0.5
    cache: dict[int, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class ControlInput:
    u: np.ndarray
    aux: np.ndarray
    subgrad: np.ndarray | None = None
    step: float | None = None


class KernelFailure(RuntimeError):
    """A safe kernel came out empty; carries the dimension and side involved."""

    def __init__(self, agent: int, dim: int, side: str, cause: Exception):
        super().__init__(f"agent {agent}: empty safe kernel for the {side} set of dimension {dim + 1} ({cause})")
        self.agent = agent
        self.dim = dim
        self.side = side


def collect_states(agent: AgentState, fresh: dict, policy: str = HOLD_LAST) -> PointSet:
    """
    Assemble the in-neighbour point set for this round.

    ``fresh`` maps every in-neighbour to the value received this round or to
    :data:`BLOCKED`.  Received values refresh the cache; blocked edges fall
    back to the cached value (hold-last) or to the origin (zero-substitute).
    """
    tags, pts = [], []
    for j in sorted(fresh):
        v = fresh[j]
        if v is BLOCKED:
            if policy == HOLD_LAST:
                if j not in agent.cache:
                    raise KeyError(f"agent {agent.id} has no cached value for blocked neighbour {j}")
                v = agent.cache[j]
            elif policy == ZERO_SUBSTITUTE:
                v = np.zeros_like(agent.x)
            else:
                raise ValueError(f"unknown policy {policy!r}")
        else:
            v = np.asarray(v, dtype=float)
            agent.cache[j] = v
        tags.append(j)
        pts.append(v)
    return PointSet(np.array(pts), tuple(tags))


def auxiliary(agent_id: int, X: PointSet, d: int, F: int) -> np.ndarray:
    """Bounding-box centre of the 2d safe-kernel points drawn from the extreme sets."""
    k = (d + 1) * F + 1
    if len(X) < k:
        raise ValueError(f"agent {agent_id} has {len(X)} in-neighbours, needs at least {k}")
    lam = []
    for p in range(d):
        Y, Z = extreme_sets(X, p, k)
        for side, S in (("lower", Y), ("upper", Z)):
            try:
                lam.append(safe_kernel_point(S, F))
            except KernelEmptyError as exc:
                raise KernelFailure(agent_id, p, side, exc) from exc
    return auxiliary_point(np.array(lam))


def consensus_input(agent: AgentState, X: PointSet, d: int, F: int) -> ControlInput:
    aux = auxiliary(agent.id, X, d, F)
    return ControlInput(u=(1 - agent.alpha) * (aux - agent.x), aux=aux)


def optimization_input(agent: AgentState, X: PointSet, d: int, F: int, f: CostFunction,
                       beta: float) -> ControlInput:
    if beta < 0:
        raise ValueError("step size must be non-negative")
    aux = auxiliary(agent.id, X, d, F)
    g = subgradient(f, agent.alpha * agent.x + (1 - agent.alpha) * aux)
    u = (1 - agent.alpha) * (aux - agent.x) - beta * g
    return ControlInput(u=u, aux=aux, subgrad=g, step=beta)


def hold_input(agent: AgentState) -> ControlInput:
    """Zero input for an agent cut off from every in-neighbour: it keeps its state."""
    return ControlInput(u=np.zeros_like(agent.x), aux=agent.x.copy())


def step(agent: AgentState, u: ControlInput, eps=None) -> AgentState:
    x = agent.x + u.u
    if eps is not None:
        x = x + np.asarray(eps, dtype=float)
    return replace(agent, x=x)
