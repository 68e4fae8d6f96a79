"""Coalitions, instantaneous games and dynamic games.

Coalitions are unsigned integer bitmasks over agent indices ``0..N-1``; bit
``i`` set means agent ``i`` belongs to the coalition. Coalition enumeration
is always ascending mask order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

DENSE_MAX_AGENTS = 20


class GameError(ValueError):
    """Malformed game or coalition input."""


class CapabilityError(RuntimeError):
    """Requested computation exceeds the enumeration caps."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap.

    ``iterate`` holds the last iterate, ``residual`` the stopping quantity
    that failed, and ``step`` the sample index when raised inside a tracker.
    """

    def __init__(self, message, iterate=None, residual=None, step=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual
        self.step = step


def coalition(members: Iterable[int]) -> int:
    mask = 0
    for i in members:
        if i < 0:
            raise GameError(f"negative agent index {i}")
        mask |= 1 << int(i)
    return mask


def members(mask: int, n: int | None = None) -> list[int]:
    n = mask.bit_length() if n is None else n
    return [i for i in range(n) if mask >> i & 1]


def cardinality(mask: int) -> int:
    return bin(mask).count("1")


def grand_coalition(n: int) -> int:
    return (1 << n) - 1


def as_mask(s: int | Iterable[int]) -> int:
    if isinstance(s, (int, np.integer)):
        return int(s)
    return coalition(s)


@lru_cache(maxsize=None)
def membership_matrix(n: int) -> np.ndarray:
    """Boolean ``(2**n, n)`` array; row ``mask`` flags the members of ``mask``."""
    masks = np.arange(1 << n, dtype=np.int64)
    out = (masks[:, None] >> np.arange(n)) & 1
    out = out.astype(bool)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def coalition_sizes(n: int) -> np.ndarray:
    sizes = membership_matrix(n).sum(axis=1)
    sizes.setflags(write=False)
    return sizes


@dataclass(frozen=True, eq=False)
class InstantaneousGame:
    """A TU game on ``n_agents`` agents.

    Exactly one of ``table`` (dense array of length ``2**n``, NaN marking a
    missing coalition) or ``fn`` (pure callable ``mask -> value``) backs the
    value function. ``v(empty) = 0`` is returned regardless of storage;
    ``validate_game`` reports a stored nonzero entry.
    """

    n_agents: int
    table: np.ndarray | None = None
    fn: Callable[[int], float] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_agents < 1:
            raise GameError("n_agents must be positive")
        if (self.table is None) == (self.fn is None):
            raise GameError("provide exactly one of table or fn")
        if self.table is not None:
            if self.n_agents > DENSE_MAX_AGENTS:
                raise CapabilityError(
                    f"dense tables are capped at {DENSE_MAX_AGENTS} agents; use the callable form"
                )
            table = np.asarray(self.table, dtype=float)
            if table.shape != (1 << self.n_agents,):
                raise GameError(
                    f"table must have length 2**{self.n_agents}, got shape {table.shape}"
                )
            table = table.copy()
            table.setflags(write=False)
            object.__setattr__(self, "table", table)

    @classmethod
    def from_table(cls, n_agents: int, table: Sequence[float] | np.ndarray) -> "InstantaneousGame":
        return cls(n_agents, table=np.asarray(table, dtype=float))

    @classmethod
    def from_mapping(cls, n_agents: int, values: Mapping[int, float]) -> "InstantaneousGame":
        """Build a dense game; coalitions absent from ``values`` stay missing (mask 0 defaults to 0)."""
        table = np.full(1 << n_agents, np.nan)
        table[0] = 0.0
        for mask, value in values.items():
            mask = as_mask(mask)
            if not 0 <= mask < (1 << n_agents):
                raise GameError(f"coalition mask {mask} out of range for {n_agents} agents")
            table[mask] = value
        return cls(n_agents, table=table)

    @classmethod
    def from_function(cls, n_agents: int, fn: Callable[[int], float]) -> "InstantaneousGame":
        return cls(n_agents, fn=fn)

    @property
    def grand(self) -> int:
        return grand_coalition(self.n_agents)

    @property
    def is_dense(self) -> bool:
        return self.table is not None

    def __call__(self, s: int | Iterable[int]) -> float:
        return evaluate_value(self, s)

    def values(self) -> np.ndarray:
        """Dense value table (computed from ``fn`` when needed); entry 0 forced to 0."""
        if self.table is not None:
            if self.table[0] == 0.0:
                return self.table
            out = self.table.copy()
            out[0] = 0.0
            return out
        if self.n_agents > DENSE_MAX_AGENTS:
            raise CapabilityError(f"cannot tabulate a game with {self.n_agents} agents")
        out = np.empty(1 << self.n_agents)
        out[0] = 0.0
        for mask in range(1, 1 << self.n_agents):
            out[mask] = self.fn(mask)
        return out

    def to_dense(self) -> "InstantaneousGame":
        if self.is_dense:
            return self
        return InstantaneousGame(self.n_agents, table=self.values())


def evaluate_value(game: InstantaneousGame, s: int | Iterable[int]) -> float:
    mask = as_mask(s)
    if mask < 0 or mask >> game.n_agents:
        raise GameError(f"coalition {mask:#b} has members outside 0..{game.n_agents - 1}")
    if mask == 0:
        return 0.0
    if game.table is not None:
        value = game.table[mask]
        if np.isnan(value):
            raise GameError(f"missing coalition {members(mask, game.n_agents)}")
        return float(value)
    return float(game.fn(mask))


def validate_game(game: InstantaneousGame) -> list[str]:
    """Diagnostics for a game; an empty list means well-formed."""
    problems = []
    if game.table is not None:
        table = game.table
        if table[0] != 0.0 and not np.isnan(table[0]):
            problems.append("nonzero empty-coalition value")
        missing = np.isnan(table[1:])
        if missing.any():
            problems.append("missing coalition")
        if np.isinf(table[1:]).any():
            problems.append("non-finite value")
        return problems
    if game.n_agents > DENSE_MAX_AGENTS:
        problems.append("too many agents to validate exhaustively")
        return problems
    empty = game.fn(0)
    if empty is not None and empty != 0.0:
        problems.append("nonzero empty-coalition value")
    for mask in range(1, 1 << game.n_agents):
        value = game.fn(mask)
        if value is None:
            problems.append("missing coalition")
            break
        if not math.isfinite(value):
            problems.append("non-finite value")
            break
    return problems


def iter_coalitions(n: int, include_empty: bool = False) -> Iterator[int]:
    start = 0 if include_empty else 1
    yield from range(start, 1 << n)


@dataclass(frozen=True)
class DynamicGame:
    """A finite sequence of instantaneous games sharing one agent set."""

    games: tuple[InstantaneousGame, ...]

    def __post_init__(self):
        games = tuple(self.games)
        if not games:
            raise GameError("a dynamic game needs at least one step")
        n = games[0].n_agents
        if any(g.n_agents != n for g in games):
            raise GameError("agent count must be constant across steps")
        object.__setattr__(self, "games", games)

    @classmethod
    def repeat(cls, game: InstantaneousGame, horizon: int) -> "DynamicGame":
        return cls((game,) * horizon)

    @property
    def n_agents(self) -> int:
        return self.games[0].n_agents

    @property
    def horizon(self) -> int:
        return len(self.games)

    def game_at(self, k: int) -> InstantaneousGame:
        return self.games[k]

    def __len__(self):
        return len(self.games)

    def __iter__(self):
        return iter(self.games)

    def grand_values(self) -> np.ndarray:
        return np.array([evaluate_value(g, g.grand) for g in self.games])


# serialization

def game_to_json(game: InstantaneousGame) -> dict:
    table = game.values()
    return {
        "n_agents": game.n_agents,
        "values": {str(mask): float(table[mask]) for mask in range(1, 1 << game.n_agents)},
    }


def game_from_json(obj: dict) -> InstantaneousGame:
    try:
        n = int(obj["n_agents"])
        raw = obj["values"]
    except (KeyError, TypeError) as exc:
        raise GameError(f"game JSON needs 'n_agents' and 'values': {exc}") from None
    values = {}
    for key, value in raw.items():
        try:
            mask = int(key)
        except ValueError:
            raise GameError(f"coalition key {key!r} is not a decimal mask") from None
        values[mask] = float(value)
    return InstantaneousGame.from_mapping(n, values)


def load_game(path: str | Path) -> InstantaneousGame:
    with open(path, encoding="utf-8") as fh:
        return game_from_json(json.load(fh))


def save_game(game: InstantaneousGame, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(game_to_json(game), fh, indent=1)


# small reference games used across tests and docs

def glove_game() -> InstantaneousGame:
    """Agent 0 holds a left glove, agents 1 and 2 right gloves; a pair is worth 1."""
    def v(mask):
        return 1.0 if (mask & 1) and (mask & 0b110) else 0.0
    return InstantaneousGame.from_table(3, [v(m) for m in range(8)])


def additive_game(weights: Sequence[float]) -> InstantaneousGame:
    w = np.asarray(weights, dtype=float)
    return InstantaneousGame.from_table(len(w), membership_matrix(len(w)) @ w)


def symmetric_game(n: int, per_member: float = 1.0) -> InstantaneousGame:
    return InstantaneousGame.from_table(n, per_member * coalition_sizes(n).astype(float))


def random_game(n: int, rng: np.random.Generator, scale: float = 1.0) -> InstantaneousGame:
    table = scale * rng.uniform(0.0, 1.0, size=1 << n)
    table[0] = 0.0
    return InstantaneousGame.from_table(n, table)


def random_convex_game(n: int, rng: np.random.Generator, density: float = 0.5) -> InstantaneousGame:
    """Nonnegative combination of unanimity games; convex, so its core is non-empty."""
    table = np.zeros(1 << n)
    for t in range(1, 1 << n):
        if rng.random() < density or t & (t - 1) == 0:
            weight = rng.uniform(0.0, 1.0)
            # u_T(S) = 1 iff T is a subset of S
            carriers = (np.arange(1 << n) & t) == t
            table[carriers] += weight
    table[0] = 0.0
    return InstantaneousGame.from_table(n, table)


def drifting_game(n: int, horizon: int, drift: float, seed: int = 0, period: float = 200.0) -> DynamicGame:
    """Random base game whose coalition values oscillate slowly over time.

    ``v^k(S) = v0(S) * (1 + drift * sin(2 pi k / period + theta_S))`` with a
    phase ``theta_S`` per coalition; ``drift = 0`` gives a constant game.
    """
    if horizon < 1:
        raise GameError("horizon must be >= 1")
    if drift < 0:
        raise GameError("drift must be non-negative")
    rng = np.random.default_rng(seed)
    base = random_game(n, rng).values()
    phase = rng.uniform(0.0, 2.0 * math.pi, size=base.size)
    k = np.arange(horizon)[:, None]
    tables = base * (1.0 + drift * np.sin(2.0 * math.pi * k / period + phase))
    tables[:, 0] = 0.0
    return DynamicGame(tuple(InstantaneousGame.from_table(n, t) for t in tables))
