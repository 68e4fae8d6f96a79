import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coalitiond.game import GameError, InstantaneousGame, random_game
from coalitiond.markets import market_scenario, snapshot_to_game, synthetic_market_snapshots
from coalitiond.projection import (
    BoundingSet, ProjectionError, WarmStart, halfspace_project, project_active_set,
    project_bounding_set,
)
from coalitiond.tracking import TrackerConfig, core_track


def test_halfspace_examples():
    assert np.array_equal(halfspace_project([0, 0], {0}, 0), [0, 0])
    assert np.allclose(halfspace_project([0, 0], {0, 1}, 1), [0.5, 0.5])
    assert np.array_equal(halfspace_project([2, 0], {0}, 1), [2, 0])
    with pytest.raises(GameError):
        halfspace_project([0, 0], 0, 1)


def test_bounding_set_shape():
    g = random_game(4, np.random.default_rng(0))
    bs = BoundingSet.of(g, 2)
    assert bs.n_halfspaces == 2 ** 3 - 1
    assert all(m >> 2 & 1 and m != 0b1111 for m in bs.masks)


def test_two_agent_projection():
    g = InstantaneousGame.from_table(2, [0.0, 0.2, 0.3, 1.0])
    assert np.allclose(project_bounding_set([0.0, 0.0], BoundingSet.of(g, 0)), [0.5, 0.5])


def test_projection_idempotent():
    g = random_game(4, np.random.default_rng(2))
    bs = BoundingSet.of(g, 1)
    y = project_bounding_set(np.zeros(4), bs)
    assert bs.contains(y, 1e-9)
    assert np.allclose(project_bounding_set(y, bs), y, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_dykstra_matches_active_set_oracle(n, seed):
    rng = np.random.default_rng(seed)
    g = random_game(n, rng)
    bs = BoundingSet.of(g, int(rng.integers(n)))
    x = rng.normal(scale=1.0, size=n)
    y = project_bounding_set(x, bs)
    assert np.max(np.abs(y - project_active_set(x, bs))) <= 1e-6
    assert bs.violation(y) <= 1e-8


def test_warm_start_same_limit():
    rng = np.random.default_rng(0)
    snaps = synthetic_market_snapshots(8, 10.0, seed=1)
    bs0 = BoundingSet.of(snapshot_to_game(snaps[0]), 0)
    bs1 = BoundingSet.of(snapshot_to_game(snaps[1]), 0)
    x = rng.normal(scale=0.2, size=8) + bs0.total / 8
    warm = WarmStart(bs0.n_halfspaces)
    project_bounding_set(x, bs0, warm=warm)
    cold = WarmStart(bs1.n_halfspaces)
    expected = project_bounding_set(x, bs1, warm=cold)
    got = project_bounding_set(x, bs1, warm=warm)
    assert np.allclose(got, expected, atol=1e-7)
    assert np.all(warm.corr <= 0)
    # repeating a solved projection restarts at the fixed point
    project_bounding_set(x, bs1, warm=cold)
    assert cold.sweeps <= 2


def test_warm_start_size_checked():
    g = random_game(3, np.random.default_rng(0))
    with pytest.raises(GameError):
        project_bounding_set(np.zeros(3), BoundingSet.of(g, 0), warm=WarmStart(2))


def test_nonconvergence_carries_iterate():
    g = random_game(4, np.random.default_rng(5))
    bs = BoundingSet.of(g, 0)
    with pytest.raises(ProjectionError) as info:
        project_bounding_set(np.full(4, 5.0), bs, tol=1e-15, max_iter=2, fallback=False)
    assert info.value.iterate.shape == (4,)
    assert info.value.residual > 1e-15


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_exact_fallback_matches_oracle(n, seed):
    rng = np.random.default_rng(seed)
    bs = BoundingSet.of(random_game(n, rng), int(rng.integers(n)))
    x = rng.normal(scale=2.0, size=n)
    warm = WarmStart(bs.n_halfspaces)
    y = project_bounding_set(x, bs, max_iter=1, warm=warm)
    assert np.max(np.abs(y - project_active_set(x, bs))) <= 1e-8
    assert np.all(warm.corr <= 0)
    # the fallback's multipliers are a converged Dykstra state
    again = project_bounding_set(x, bs, warm=warm, fallback=False)
    assert np.allclose(again, y, atol=1e-8)


def test_stalled_market_projection_recovers():
    # a ten-agent market where plain sweeps stall around 1e-7
    snaps = synthetic_market_snapshots(10, 10.0, seed=11)
    res = core_track(market_scenario(snaps[:4]), cfg=TrackerConfig(alpha=0.9, gamma_reg=0.1),
                     reference_tolerance=1e-3)
    assert np.all(res.errors["core_violation"] < 1.0)
