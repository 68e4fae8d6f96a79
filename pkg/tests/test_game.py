import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coalitiond.game import (
    CapabilityError, DynamicGame, GameError, InstantaneousGame, as_mask, cardinality, coalition,
    drifting_game, evaluate_value, game_from_json, game_to_json, glove_game, load_game, members,
    random_game, save_game, validate_game,
)


def test_coalition_bitmask_roundtrip():
    assert coalition([0, 2]) == 0b101
    assert members(0b101, 3) == [0, 2]
    assert cardinality(0) == 0
    assert as_mask({1, 2}) == 6
    with pytest.raises(GameError):
        coalition([-1])


def test_glove_values():
    g = glove_game()
    assert evaluate_value(g, {0, 1}) == 1.0
    assert evaluate_value(g, set()) == 0.0
    assert evaluate_value(g, {1, 2}) == 0.0


def test_out_of_range_coalition():
    with pytest.raises(GameError, match="outside"):
        glove_game()({0, 3})


def test_validate_game_reports():
    assert validate_game(glove_game()) == []
    table = dict(enumerate(glove_game().values()))
    del table[0b101]
    assert validate_game(InstantaneousGame.from_mapping(3, table)) == ["missing coalition"]
    bad = glove_game().values().copy()
    bad[0] = 1.0
    assert validate_game(InstantaneousGame.from_table(3, bad)) == ["nonzero empty-coalition value"]


def test_missing_coalition_raises_on_lookup():
    g = InstantaneousGame.from_mapping(2, {1: 0.5, 3: 1.0})
    with pytest.raises(GameError, match="missing"):
        g(2)


def test_empty_value_forced_to_zero():
    table = np.array([1.0, 0.2, 0.3, 1.0])
    g = InstantaneousGame.from_table(2, table)
    assert g(0) == 0.0
    assert g.values()[0] == 0.0


def test_table_length_checked():
    with pytest.raises(GameError):
        InstantaneousGame.from_table(3, [0.0] * 7)


def test_dense_cap():
    with pytest.raises(CapabilityError):
        InstantaneousGame(21, table=np.zeros(1))


def test_dense_and_callable_agree_exhaustively():
    rng = np.random.default_rng(3)
    for n in range(1, 11):
        dense = random_game(n, rng)
        table = dense.values()
        lazy = InstantaneousGame.from_function(n, lambda m, t=table: float(t[m]))
        assert np.array_equal(lazy.values(), table)
        for mask in range(1 << n):
            assert lazy(mask) == dense(mask)
            assert np.isfinite(dense(mask))


def test_dynamic_game_constant_agents():
    with pytest.raises(GameError):
        DynamicGame((glove_game(), random_game(2, np.random.default_rng(0))))
    dyn = DynamicGame.repeat(glove_game(), 4)
    assert dyn.horizon == 4
    assert np.allclose(dyn.grand_values(), 1.0)


def test_json_roundtrip(tmp_path):
    g = random_game(4, np.random.default_rng(1))
    path = tmp_path / "g.json"
    save_game(g, path)
    assert np.array_equal(load_game(path).values(), g.values())
    assert np.array_equal(game_from_json(game_to_json(g)).values(), g.values())


def test_drifting_game_constant_when_no_drift():
    dyn = drifting_game(3, 5, 0.0, seed=2)
    for g in dyn:
        assert np.array_equal(g.values(), dyn.game_at(0).values())
    moving = drifting_game(3, 5, 0.1, seed=2)
    assert not np.array_equal(moving.game_at(0).values(), moving.game_at(4).values())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=3))
def test_from_function_total_and_finite(weights):
    n = len(weights)
    g = InstantaneousGame.from_function(n, lambda m: sum(w for i, w in enumerate(weights) if m >> i & 1))
    values = g.values()
    assert values[0] == 0.0
    assert np.all(np.isfinite(values))
    assert values[-1] == pytest.approx(sum(weights))
