import numpy as np
import pytest

from rescon.geometry import PointSet
from rescon.optimization import Abs, CostFunction, SqNorm, Sum, coord
from rescon.protocol import (BLOCKED, HOLD_LAST, ZERO_SUBSTITUTE, AgentState, ControlInput, auxiliary,
                             check_weight, collect_states, consensus_input, optimization_input, step)


def _agent(x=(0.0, 0.0), alpha=0.5, cache=None):
    return AgentState(1, np.array(x, dtype=float), alpha, dict(cache or {}))


def test_hold_last_uses_cache():
    ag = _agent(cache={3: np.array([1.0, 2.0])})
    X = collect_states(ag, {2: np.array([5.0, 5.0]), 3: BLOCKED})
    assert X.tags == (2, 3)
    assert np.allclose(X.as_dict()[3], [1, 2])
    assert np.allclose(ag.cache[2], [5, 5])


def test_zero_substitute():
    ag = _agent(cache={3: np.array([1.0, 2.0])})
    X = collect_states(ag, {3: BLOCKED}, ZERO_SUBSTITUTE)
    assert np.allclose(X.points, 0)


def test_no_blocking_refreshes_everything():
    ag = _agent(cache={2: np.zeros(2), 4: np.zeros(2)})
    fresh = {2: np.array([1.0, 1.0]), 4: np.array([2.0, 3.0])}
    X = collect_states(ag, fresh, HOLD_LAST)
    assert all(np.array_equal(X.as_dict()[j], fresh[j]) for j in fresh)
    assert all(np.array_equal(ag.cache[j], fresh[j]) for j in fresh)


def test_blocked_without_cache_is_an_error():
    with pytest.raises(KeyError):
        collect_states(_agent(), {3: BLOCKED})


def test_weight_constraint():
    check_weight(0.5, 0.9)
    with pytest.raises(ValueError):
        check_weight(0.95, 0.9)
    with pytest.raises(ValueError):
        check_weight(0.05, 0.9)
    with pytest.raises(ValueError):
        check_weight(0.5, 1.0)


def test_fixed_point_gives_zero_input():
    X = PointSet.from_array(np.zeros((7, 2)), range(2, 9))
    u = consensus_input(_agent(), X, 2, 2)
    assert np.allclose(u.u, 0) and np.allclose(u.aux, 0)


def test_consensus_input_1d_hand_example():
    X = PointSet.from_array(np.arange(7.0)[:, None])
    ag = AgentState(1, np.array([0.0]), 0.5)
    ctl = consensus_input(ag, X, 1, 1)
    # k = 3: Y = {0, 1, 2} has kernel {1}, Z = {4, 5, 6} has kernel {5}
    assert ctl.aux == pytest.approx([3.0])
    assert ctl.u == pytest.approx([1.5])


def test_too_few_neighbours():
    with pytest.raises(ValueError):
        auxiliary(1, PointSet.from_array(np.zeros((3, 2))), 2, 1)


def test_optimization_input_arithmetic():
    # build X whose auxiliary point is (2, 2): every neighbour sits there
    X = PointSet.from_array(np.full((7, 2), 2.0))
    f = CostFunction(1, Sum((Abs(coord(0, 2)), Abs(coord(1, 2)))))
    ctl = optimization_input(_agent(), X, 2, 2, f, 1.0)
    assert np.allclose(ctl.aux, [2, 2]) and np.allclose(ctl.subgrad, [1, 1])
    assert np.allclose(ctl.u, [0, 0])


def test_zero_step_reduces_to_consensus():
    rng = np.random.default_rng(4)
    X = PointSet.from_array(rng.normal(size=(7, 2)))
    f = CostFunction(1, SqNorm((3.0, 3.0)))
    a = optimization_input(_agent(), X, 2, 2, f, 0.0)
    b = consensus_input(_agent(), X, 2, 2)
    assert np.array_equal(a.u, b.u)
    with pytest.raises(ValueError):
        optimization_input(_agent(), X, 2, 2, f, -0.1)


def test_step_composition():
    ag = _agent()
    assert np.array_equal(step(ag, ControlInput(np.zeros(2), np.zeros(2))).x, ag.x)
    out = step(ag, ControlInput(np.array([1.0, 1.0]), np.zeros(2)), np.array([0.01, 0.01]))
    assert np.allclose(out.x, [1.01, 1.01])
    ag = _agent([1.0, -2.0], alpha=0.3)
    aux = np.array([4.0, 0.5])
    eps = np.array([0.1, -0.2])
    ctl = ControlInput((1 - ag.alpha) * (aux - ag.x), aux)
    assert np.allclose(step(ag, ctl, eps).x, ag.alpha * ag.x + (1 - ag.alpha) * aux + eps)
