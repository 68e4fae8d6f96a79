import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coalitiond.exact import (
    agent_marginal_vector, core_membership, core_reference_point, core_violation,
    marginal_matrix, marginal_vector_for_ordering, shapley_by_subsets, shapley_exact,
)
from coalitiond.game import (
    CapabilityError, GameError, InstantaneousGame, additive_game, glove_game, random_convex_game,
    random_game, symmetric_game,
)
from coalitiond.tracking import TrackerConfig

from oracles import core_is_nonempty, in_core, shapley_by_permutations


def test_glove_shapley():
    assert np.allclose(shapley_exact(glove_game()), [2 / 3, 1 / 6, 1 / 6], atol=1e-12)


def test_symmetric_and_additive_shapley():
    assert np.allclose(shapley_exact(symmetric_game(3)), [1, 1, 1])
    assert np.allclose(shapley_exact(additive_game([2, 5, 3])), [2, 5, 3])


def test_glove_ordering_marginals():
    g = glove_game()
    assert np.array_equal(marginal_vector_for_ordering(g, (0, 1, 2)), [0, 1, 0])
    assert np.array_equal(marginal_vector_for_ordering(g, (0, 2, 1)), [0, 0, 1])
    add = additive_game([2, 5, 3])
    for order in [(0, 1, 2), (2, 0, 1), (1, 2, 0)]:
        assert np.allclose(marginal_vector_for_ordering(add, order), [2, 5, 3])


def test_ordering_must_be_permutation():
    with pytest.raises(GameError):
        marginal_vector_for_ordering(glove_game(), (0, 0, 1))


def test_glove_agent_marginals():
    g = glove_game()
    assert np.allclose(agent_marginal_vector(g, 0), [0, 0.5, 0.5])
    assert np.allclose(agent_marginal_vector(g, 1), [1, 0, 0])


def test_marginal_vectors_for_callable_game_match_dense():
    g = random_game(5, np.random.default_rng(4))
    table = g.values()
    lazy = InstantaneousGame.from_function(5, lambda m: float(table[m]))
    assert np.allclose(marginal_matrix(lazy), marginal_matrix(g), atol=1e-14)
    assert np.allclose(marginal_vector_for_ordering(lazy, (3, 1, 0, 4, 2)),
                       marginal_vector_for_ordering(g, (3, 1, 0, 4, 2)))


def test_shapley_cap():
    with pytest.raises(CapabilityError):
        shapley_exact(InstantaneousGame.from_function(11, lambda m: 0.0))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_shapley_matches_permutation_oracle(n):
    g = random_game(n, np.random.default_rng(n))
    expected = shapley_by_permutations(n, g)
    assert np.allclose(shapley_exact(g), expected, atol=1e-12)
    assert np.allclose(shapley_by_subsets(g), expected, atol=1e-12)


def test_shapley_ten_agents_batched():
    # crosses the cached-permutation threshold
    g = random_convex_game(10, np.random.default_rng(0), density=0.01)
    phi = shapley_exact(g)
    assert np.allclose(phi, shapley_by_subsets(g), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_shapley_axioms(n, seed):
    rng = np.random.default_rng(seed)
    g = random_game(n, rng)
    phi = shapley_exact(g)
    assert abs(phi.sum() - g(g.grand)) <= 1e-9
    # relabel agents
    perm = rng.permutation(n)
    table = g.values()
    relabeled = np.empty_like(table)
    for mask in range(1 << n):
        new = 0
        for i in range(n):
            if mask >> i & 1:
                new |= 1 << int(perm[i])
        relabeled[new] = table[mask]
    phi_perm = shapley_exact(InstantaneousGame.from_table(n, relabeled))
    assert np.allclose(phi_perm[perm], phi, atol=1e-12)
    assert np.allclose(marginal_matrix(g).mean(axis=0), phi, atol=1e-12)
    for row in marginal_matrix(g):
        assert abs(row.sum() - g(g.grand)) <= 1e-12


def test_dummy_gets_zero():
    rng = np.random.default_rng(9)
    base = random_game(3, rng).values()
    # agent 3 never changes any coalition's value
    table = np.array([base[m & 0b111] for m in range(16)])
    phi = shapley_exact(InstantaneousGame.from_table(4, table))
    assert abs(phi[3]) <= 1e-12


def test_core_membership_examples():
    assert core_membership(symmetric_game(3), [1, 1, 1]).in_core
    assert core_membership(glove_game(), [1, 0, 0]).in_core
    check = core_membership(glove_game(), [0, 0.5, 0.5])
    assert not check.in_core
    assert check.worst_coalition == 0b011
    assert check.worst_violation == pytest.approx(0.5)
    assert core_violation(glove_game(), [0, 0.5, 0.5]) == pytest.approx(0.5)


def test_core_membership_matches_independent_checker():
    rng = np.random.default_rng(11)
    agree = 0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        g = random_convex_game(n, rng)
        if rng.random() < 0.5:
            x = shapley_exact(g) + rng.normal(scale=0.05, size=n) * (rng.random() < 0.5)
        else:
            x = rng.uniform(0, g(g.grand), size=n)
        assert core_membership(g, x).in_core == in_core(n, g, list(x))
        agree += 1
    assert agree == 100


def test_reference_point_symmetric_and_singleton():
    x = core_reference_point(symmetric_game(3))
    assert np.allclose(x, [1, 1, 1], atol=1e-6)
    singleton = InstantaneousGame.from_table(2, [0.0, 0.4, 0.6, 1.0])
    assert np.allclose(core_reference_point(singleton), [0.4, 0.6], atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_reference_point_lands_in_core(seed):
    rng = np.random.default_rng(seed)
    g = random_convex_game(5, rng)
    assert core_is_nonempty(5, g)
    x = core_reference_point(g, TrackerConfig(alpha=0.5))
    assert core_membership(g, x, tol=1e-6).in_core
