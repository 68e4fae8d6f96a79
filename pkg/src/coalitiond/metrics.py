"""Tracking errors, consensus residuals, payoff differences and timing."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

ERROR_KINDS = ("shapley_error", "core_error", "consensus_residual", "core_violation", "payoff_diff")


@dataclass
class ErrorSeries:
    kind: str
    k: np.ndarray
    values: np.ndarray
    skipped: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.kind!r}")

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


def consensus_residual(x: np.ndarray) -> float:
    """Largest distance between two agents' proposals; zero exactly on consensus."""
    x = np.asarray(x, dtype=float)
    diff = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=-1)).max())


def mean_cumulative_error(x, ref, grand, kind: str = "shapley_error") -> ErrorSeries:
    """Running mean over steps of ``|x^k - ref^k| / v^k(I)``.

    ``x`` is ``(K, N, N)`` stacked proposals or ``(K, N)`` averaged proposals;
    ``ref`` is ``(K, N)`` and is broadcast against every proposal row. Steps
    with non-positive grand value are skipped and listed in ``skipped``; the
    running mean then carries the previous value.
    """
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    grand = np.asarray(grand, dtype=float)
    K = len(x)
    if len(ref) != K or len(grand) != K:
        raise ValueError("x, ref and grand must share the step axis")
    if x.ndim == 3:
        diff = x - ref[:, None, :]
    else:
        diff = x - ref
    norms = np.sqrt((diff ** 2).reshape(K, -1).sum(axis=1))
    ok = grand > 0
    skipped = np.flatnonzero(~ok).tolist()
    terms = np.where(ok, norms / np.where(ok, grand, 1.0), 0.0)
    counts = np.cumsum(ok)
    running = np.cumsum(terms) / np.maximum(counts, 1)
    return ErrorSeries(kind, np.arange(1, K + 1), running, skipped)


def payoff_difference(x, ref, grand) -> np.ndarray:
    """Per agent ``|sum_k x_i^k - sum_k ref_i^k| / sum_k v^k(I)``.

    ``x`` and ``ref`` are ``(K, N)`` allocations (averaged proposals for the
    online side).
    """
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape:
        raise ValueError("trajectories must be aligned")
    total = float(np.sum(grand))
    if total <= 0:
        raise ValueError("total market value must be positive")
    return np.abs(x.sum(axis=0) - ref.sum(axis=0)) / total


WARMUP_SAMPLES = 5


def _timed(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def benchmark_step_cost(n_range=(4, 6, 8, 10), scenario: str = "electricity", reps: int = 10,
                        seed: int = 0, cfg=None) -> list[dict]:
    """Wall-clock cost of one agent's online step versus the exact solution.

    Each repetition times a different, consecutive market instance, so the
    medians reflect a typical instance rather than one particular game.
    For ``"electricity"`` (core) the online column times one agent building
    its bounding set from its own coalitions and performing one update, in
    the steady state of a tracker that has already followed the market for
    a few samples; the exact column times tabulating every coalition and
    running the static protocol from scratch to consensus in the core. For
    ``"forecast"`` (Shapley) the online column times one agent's marginal
    vector and update, the exact column the full Shapley enumeration.
    """
    from .exact import agent_marginal_vector, core_reference_point, shapley_exact
    from .markets import (
        electricity_value, forecast_to_game, forecast_value, snapshot_to_game,
        synthetic_forecast_records, synthetic_market_snapshots,
    )
    from .game import InstantaneousGame
    from .network import complete_graph, metropolis_weights
    from .projection import BoundingSet, WarmStart, project_bounding_set
    from .tracking import TrackerConfig, TrackerState, bounding_sets, core_step, initial_matrix, warm_starts

    if reps < 1:
        raise ValueError("reps must be >= 1")
    if scenario not in ("electricity", "forecast"):
        raise ValueError(f"unknown scenario {scenario!r}")
    rows = []
    for n in n_range:
        w = metropolis_weights(complete_graph(n))
        online_t, exact_t = [], []
        if scenario == "electricity":
            cfg_n = cfg or TrackerConfig(alpha=0.9, gamma_reg=0.1, tolerance=1e-4)
            snaps = synthetic_market_snapshots(n, lead_time_minutes=10.0, seed=seed)
            state = warm = None
            for k in range(WARMUP_SAMPLES + reps):
                snap = snaps[k % len(snaps)]
                game = snapshot_to_game(snap)
                if state is None:
                    state = TrackerState.start(initial_matrix(game, cfg_n))
                    warm = warm_starts(bounding_sets(game))
                if k >= WARMUP_SAMPLES:

                    def online():
                        # agent 0 evaluates only coalitions it belongs to
                        lazy = InstantaneousGame.from_function(n, lambda m: electricity_value(snap, m))
                        bs = BoundingSet.of(_own_coalitions(lazy, 0), 0)
                        ws = WarmStart(bs.n_halfspaces)
                        ws.corr[:] = warm[0].corr
                        xhat = w[0] @ state.x
                        a, g = cfg_n.alpha, cfg_n.gamma_reg
                        proj = project_bounding_set(xhat, bs, cfg_n.projection_tol, warm=ws)
                        return (1 - a - a * g) * xhat + a * proj + a * g * state.x_prev[0]

                    if k == WARMUP_SAMPLES:
                        online()  # compile and cache before timing
                        core_reference_point(game, cfg_n)
                    online_t.append(_timed(online))
                    exact_t.append(_timed(lambda: core_reference_point(snapshot_to_game(snap), cfg_n)))
                state = core_step(state, game, w, cfg_n, bounding_sets(game), warm)
        else:
            cfg_n = cfg or TrackerConfig(alpha=0.05)
            x0 = np.eye(n)
            for r, rec in enumerate(synthetic_forecast_records(n, reps, seed=seed)):

                def online():
                    game = InstantaneousGame.from_function(n, lambda m: forecast_value(rec, m))
                    m0 = agent_marginal_vector(game, 0)
                    return (1 - cfg_n.alpha) * (w[0] @ x0) + cfg_n.alpha * m0

                if r == 0:
                    online()
                    shapley_exact(forecast_to_game(rec))
                online_t.append(_timed(online))
                exact_t.append(_timed(lambda: shapley_exact(forecast_to_game(rec))))
        t_online = float(np.median(online_t))
        t_exact = float(np.median(exact_t))
        rows.append({
            "N": n,
            "online_step_seconds": t_online,
            "exact_solution_seconds": t_exact,
            "ratio": t_exact / t_online if t_online > 0 else float("inf"),
        })
    return rows


def _own_coalitions(game, i):
    """Dense copy of ``game`` holding only coalitions that contain ``i``.

    Other entries are zero and never read by agent ``i``'s bounding set.
    """
    from .game import InstantaneousGame

    n = game.n_agents
    table = np.zeros(1 << n)
    for mask in range(1 << n):
        if mask >> i & 1:
            table[mask] = game.fn(mask)
    return InstantaneousGame.from_table(n, table)
