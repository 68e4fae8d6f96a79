import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coalitiond.game import GameError
from coalitiond.metrics import consensus_residual
from coalitiond.network import (
    Graph, GraphSchedule, check_weight_matrix, complete_graph, consensus_apply, gamma_min,
    load_schedule, metropolis_weights, path_graph, random_connected_graph, resolve_weights,
)


def test_metropolis_complete_three():
    assert np.allclose(metropolis_weights(complete_graph(3)), np.full((3, 3), 1 / 3))


def test_metropolis_path():
    w = metropolis_weights(path_graph(3))
    assert w[0, 1] == pytest.approx(1 / 3) and w[1, 2] == pytest.approx(1 / 3)
    assert w[0, 2] == 0
    assert np.allclose(np.diag(w), [2 / 3, 1 / 3, 2 / 3])


def test_single_agent():
    assert np.array_equal(metropolis_weights(Graph(1, frozenset())), [[1.0]])
    assert random_connected_graph(1, 0.3, seed=0).edges == frozenset()


def test_disconnected_rejected():
    with pytest.raises(GameError, match="connected"):
        metropolis_weights(Graph.from_edges(4, [(0, 1), (2, 3)]))


def test_graph_validation():
    with pytest.raises(GameError):
        Graph.from_edges(3, [(1, 1)])
    with pytest.raises(GameError):
        Graph.from_edges(3, [(0, 3)])
    assert Graph.from_edges(3, [(2, 0)]).edges == {(0, 2)}


def test_random_graph_determinism():
    assert random_connected_graph(3, 1.0, seed=5).edges == complete_graph(3).edges
    assert random_connected_graph(8, 0.3, 42) == random_connected_graph(8, 0.3, 42)


def test_random_graph_gives_up():
    with pytest.raises(GameError, match="edge_prob"):
        random_connected_graph(5, 0.0, seed=0, max_attempts=3)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.floats(0.2, 1.0), st.integers(0, 10_000))
def test_weight_matrix_invariants(n, p, seed):
    w = metropolis_weights(random_connected_graph(n, p, seed))
    assert check_weight_matrix(w) == []
    assert gamma_min(w) > 0
    assert np.all(w[w > 0] >= gamma_min(w))


def test_check_weight_matrix_flags():
    assert "not symmetric" in check_weight_matrix(np.array([[0.5, 0.5], [0.4, 0.6]]))
    assert check_weight_matrix(np.ones((2, 3))) == ["not square"]


def test_consensus_apply_examples():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert np.allclose(consensus_apply(np.full((3, 3), 1 / 3), x), np.full((3, 2), 2 / 3))
    assert np.array_equal(consensus_apply(np.eye(3), x), x)
    same = np.tile([0.3, 0.7], (3, 1))
    assert np.allclose(consensus_apply(metropolis_weights(path_graph(3)), same), same)
    with pytest.raises(GameError):
        consensus_apply(np.eye(2), x)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10_000))
def test_consensus_apply_properties(n, seed):
    rng = np.random.default_rng(seed)
    w = metropolis_weights(random_connected_graph(n, 0.5, seed))
    x, y = rng.normal(size=(2, n, n))
    wx = consensus_apply(w, x)
    assert np.allclose(wx.sum(axis=0), x.sum(axis=0), atol=1e-12)
    assert np.linalg.norm(wx - consensus_apply(w, y)) <= np.linalg.norm(x - y) + 1e-12
    assert consensus_residual(wx) <= consensus_residual(x) + 1e-12


def test_schedule_time_varying_and_reproducible(tmp_path):
    sched = GraphSchedule(6, "random", 0.4, time_varying=True, seed=3)
    again = GraphSchedule(6, "random", 0.4, time_varying=True, seed=3)
    graphs = [sched.graph_at(k) for k in range(10)]
    assert graphs == [again.graph_at(k) for k in range(10)]
    assert len({g.edges for g in graphs}) > 1
    static = GraphSchedule(6, "random", 0.4, time_varying=False, seed=3)
    assert static.graph_at(0) == static.graph_at(7)
    path = tmp_path / "sched.json"
    sched.dump(path, 5)
    assert json.loads(path.read_text())[2]["k"] == 2
    assert load_schedule(path, 6) == graphs[:5]


def test_resolve_weights_forms():
    w = metropolis_weights(path_graph(3))
    assert np.allclose(resolve_weights(None, 3)(4), np.full((3, 3), 1 / 3), atol=1e-15)
    assert np.array_equal(resolve_weights(path_graph(3), 3)(0), w)
    assert np.array_equal(resolve_weights(w, 3)(9), w)
    seq = resolve_weights([complete_graph(3), path_graph(3)], 3)
    assert np.array_equal(seq(1), w)
