"""Offline ground truth: exact Shapley value, marginal contribution vectors,
core membership and a converged reference core point.

All enumeration runs over orderings (not subset weights); orderings are
processed in vectorized batches against the dense value table.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .game import (
    CapabilityError,
    GameError,
    InstantaneousGame,
    evaluate_value,
    members,
    membership_matrix,
)

SHAPLEY_MAX_AGENTS = 10
MARGINAL_MAX_AGENTS = 12
_BATCH = 40320


def _check_ordering(order: Sequence[int], n: int) -> np.ndarray:
    order = np.asarray(order, dtype=np.int64)
    if order.shape != (n,) or sorted(order.tolist()) != list(range(n)):
        raise GameError(f"{order.tolist()} is not a permutation of 0..{n - 1}")
    return order


@lru_cache(maxsize=16)
def _cached_permutations(n: int) -> np.ndarray:
    out = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    out.setflags(write=False)
    return out


def _permutation_batches(elements: Sequence[int]) -> Iterator[np.ndarray]:
    elements = np.asarray(elements, dtype=np.int64)
    k = len(elements)
    if k <= 9:
        yield elements[_cached_permutations(k)]
        return
    perms = itertools.permutations(elements.tolist())
    while True:
        chunk = list(itertools.islice(perms, _BATCH))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.int64)


def marginal_vectors(table: np.ndarray, orders: np.ndarray) -> np.ndarray:
    """Row ``b`` holds the incremental marginal contributions for ordering ``orders[b]``."""
    bits = np.left_shift(1, orders)
    after = np.bitwise_or.accumulate(bits, axis=1)
    before = after - bits
    diffs = table[after] - table[before]
    out = np.empty(diffs.shape)
    np.put_along_axis(out, orders, diffs, axis=1)
    return out


def marginal_vector_for_ordering(game: InstantaneousGame, order: Sequence[int]) -> np.ndarray:
    order = _check_ordering(order, game.n_agents)
    if not game.is_dense:
        out = np.empty(game.n_agents)
        prefix = 0
        for j in order:
            out[j] = evaluate_value(game, prefix | 1 << int(j)) - evaluate_value(game, prefix)
            prefix |= 1 << int(j)
        return out
    return marginal_vectors(game.values(), order[None, :])[0]


def shapley_exact(game: InstantaneousGame) -> np.ndarray:
    """Average of the marginal vectors over all ``N!`` orderings."""
    n = game.n_agents
    if n > SHAPLEY_MAX_AGENTS:
        raise CapabilityError(
            f"exact Shapley enumeration is capped at {SHAPLEY_MAX_AGENTS} agents (got {n})"
        )
    table = game.values()
    total = np.zeros(n)
    count = 0
    for batch in _permutation_batches(range(n)):
        total += marginal_vectors(table, batch).sum(axis=0)
        count += len(batch)
    return total / count


def shapley_by_subsets(game: InstantaneousGame) -> np.ndarray:
    """Subset-weighted Shapley formula; an independent cross-check for ``shapley_exact``."""
    from math import factorial

    n = game.n_agents
    table = game.values()
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        for mask in range(1 << n):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            weight = factorial(s) * factorial(n - s - 1) / factorial(n)
            phi[i] += weight * (table[mask | bit] - table[mask])
    return phi


def _local_table(game: InstantaneousGame, i: int) -> np.ndarray:
    # only coalitions containing i are ever read for orderings that start with i
    if game.is_dense:
        return game.values()
    n = game.n_agents
    table = np.full(1 << n, np.nan)
    table[0] = 0.0
    bit = 1 << i
    for mask in range(1 << n):
        if mask & bit:
            table[mask] = evaluate_value(game, mask)
    return table


def agent_marginal_vector(game: InstantaneousGame, i: int) -> np.ndarray:
    """Average marginal vector over the ``(N-1)!`` orderings in which agent ``i`` moves first."""
    n = game.n_agents
    if not 0 <= i < n:
        raise GameError(f"agent {i} out of range")
    if n > MARGINAL_MAX_AGENTS:
        raise CapabilityError(
            f"marginal-vector enumeration is capped at {MARGINAL_MAX_AGENTS} agents (got {n})"
        )
    table = _local_table(game, i)
    others = [j for j in range(n) if j != i]
    total = np.zeros(n)
    count = 0
    if not others:
        return np.array([table[1]])
    for batch in _permutation_batches(others):
        orders = np.hstack([np.full((len(batch), 1), i, dtype=np.int64), batch])
        total += marginal_vectors(table, orders).sum(axis=0)
        count += len(batch)
    return total / count


def marginal_matrix(game: InstantaneousGame) -> np.ndarray:
    """Stack of ``agent_marginal_vector`` rows, one per agent."""
    return np.vstack([agent_marginal_vector(game, i) for i in range(game.n_agents)])


@dataclass(frozen=True)
class CoreCheck:
    in_core: bool
    efficiency_gap: float
    worst_coalition: int
    worst_violation: float

    def __bool__(self):
        return self.in_core

    def to_json(self, n: int) -> dict:
        return {
            "in_core": self.in_core,
            "efficiency_gap": self.efficiency_gap,
            "worst_coalition": members(self.worst_coalition, n),
            "worst_violation": self.worst_violation,
        }


def coalition_sums(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return membership_matrix(len(x)) @ x


def core_membership(game: InstantaneousGame, x: Sequence[float], tol: float = 1e-9) -> CoreCheck:
    """Check every core constraint; ``worst_violation`` is ``max_S v(S) - x(S)`` over non-empty S."""
    x = np.asarray(x, dtype=float)
    if x.shape != (game.n_agents,):
        raise GameError(f"payoff vector must have length {game.n_agents}")
    table = game.values()
    excess = table[1:] - coalition_sums(x)[1:]
    worst = int(np.argmax(excess))
    gap = abs(float(x.sum() - table[game.grand]))
    worst_violation = float(excess[worst])
    return CoreCheck(
        in_core=bool(gap <= tol and worst_violation <= tol),
        efficiency_gap=gap,
        worst_coalition=worst + 1,
        worst_violation=worst_violation,
    )


def core_violation(game: InstantaneousGame, x: Sequence[float]) -> float:
    """Largest violated core constraint (0 inside the core)."""
    check = core_membership(game, x)
    return max(check.efficiency_gap, check.worst_violation, 0.0)


def core_reference_point(game: InstantaneousGame, cfg=None, x0: np.ndarray | None = None, w=None):
    """Run the static core protocol on ``game`` until consensus inside the core.

    Starts from ``x0`` (default: the init policy of ``cfg``) on a complete
    graph unless ``w`` is given, and returns the common proposal.
    """
    from .tracking import TrackerConfig, core_converge

    cfg = cfg or TrackerConfig(alpha=0.5)
    return core_converge(game, cfg, x0=x0, w=w).mean(axis=0)
