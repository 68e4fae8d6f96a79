"""Online distributed trackers for the Shapley value and the core.

Every tracker keeps a payoff matrix ``x`` of shape ``(N, N)``: row ``i`` is
agent ``i``'s proposal for the whole allocation. One step mixes the rows
with a doubly stochastic weight matrix and then applies a per-agent update.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .exact import core_violation, marginal_matrix, shapley_exact
from .game import ConvergenceError, DynamicGame, InstantaneousGame
from .metrics import consensus_residual
from .network import consensus_apply, resolve_weights
from .projection import BoundingSet, WarmStart, project_bounding_set


INIT_POLICIES = ("self", "zeros", "marginal")


@dataclass(frozen=True)
class TrackerConfig:
    """Algorithm parameters shared by the Shapley and core trackers.

    ``init_policy`` is ``"self"`` (each agent proposes the whole grand value
    for itself), ``"zeros"``, ``"marginal"`` (each agent starts from its own
    marginal contribution vector) or an explicit ``(N, N)`` array.
    ``step_schedule="diminishing"`` uses ``alpha / (k + 1)``.
    """

    alpha: float = 0.1
    gamma_reg: float = 0.1
    step_schedule: str = "fixed"
    init_policy: str | np.ndarray = "self"
    projection_tol: float = 1e-9
    projection_max_iter: int | None = None
    iterations_per_sample: int = 1
    tolerance: float = 1e-6
    max_iter: int = 100_000

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not 0.0 < self.alpha <= 1.0:
            out.append("alpha must lie in (0, 1]")
        if self.gamma_reg < 0:
            out.append("gamma_reg must be non-negative")
        if self.step_schedule not in ("fixed", "diminishing"):
            out.append(f"unknown step_schedule {self.step_schedule!r}")
        if isinstance(self.init_policy, str) and self.init_policy not in INIT_POLICIES:
            out.append(f"unknown init_policy {self.init_policy!r}")
        if self.iterations_per_sample < 1:
            out.append("iterations_per_sample must be >= 1")
        if self.projection_tol <= 0 or self.tolerance <= 0:
            out.append("tolerances must be positive")
        if self.max_iter < 1:
            out.append("max_iter must be >= 1")
        return out

    def step_size(self, t: int) -> float:
        if self.step_schedule == "diminishing":
            return self.alpha / (t + 1)
        return self.alpha

    def check_core(self) -> None:
        if self.alpha * (1.0 + self.gamma_reg) > 1.0 + 1e-12:
            raise ValueError(
                f"core update needs alpha * (1 + gamma_reg) <= 1, got {self.alpha * (1 + self.gamma_reg):.4g}"
            )

    def to_json(self) -> dict:
        out = {
            "alpha": self.alpha,
            "gamma_reg": self.gamma_reg,
            "step_schedule": self.step_schedule,
            "init_policy": self.init_policy if isinstance(self.init_policy, str) else "given",
            "projection_tol": self.projection_tol,
            "projection_max_iter": self.projection_max_iter,
            "iterations_per_sample": self.iterations_per_sample,
            "tolerance": self.tolerance,
            "max_iter": self.max_iter,
        }
        return out


@dataclass
class TrackerState:
    k: int
    x: np.ndarray
    x_prev: np.ndarray

    @classmethod
    def start(cls, x0: np.ndarray) -> "TrackerState":
        x0 = np.array(x0, dtype=float)
        # the pre-initial state is taken equal to the initial one
        return cls(0, x0, x0.copy())


def initial_matrix(game: InstantaneousGame, cfg: TrackerConfig) -> np.ndarray:
    n = game.n_agents
    policy = cfg.init_policy
    if not isinstance(policy, str):
        x0 = np.array(policy, dtype=float)
        if x0.shape != (n, n):
            raise ValueError(f"given initial matrix must be {n}x{n}")
        return x0
    if policy == "zeros":
        return np.zeros((n, n))
    if policy == "marginal":
        return marginal_matrix(game)
    return game(game.grand) * np.eye(n)


# Shapley tracking

def _shapley_update(x, w, mhat, alpha):
    return (1.0 - alpha) * consensus_apply(w, x) + alpha * mhat


def shapley_step(state: TrackerState, game: InstantaneousGame, w: np.ndarray, cfg: TrackerConfig,
                 mhat: np.ndarray | None = None) -> TrackerState:
    """``x <- (1 - a) W x + a M`` where row ``i`` of ``M`` is agent ``i``'s marginal vector."""
    if mhat is None:
        mhat = marginal_matrix(game)
    alpha = cfg.step_size(state.k)
    x_new = _shapley_update(state.x, w, mhat, alpha)
    return TrackerState(state.k + 1, x_new, state.x)


@dataclass
class TrackResult:
    """Trajectory of a tracker run.

    ``x[k]`` is the payoff matrix after processing sample ``k``;
    ``reference[k]`` the exact solution of game ``k`` that it is compared to.
    """

    kind: str
    x: np.ndarray
    reference: np.ndarray
    grand: np.ndarray
    errors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.x)

    def mean_proposals(self) -> np.ndarray:
        return self.x.mean(axis=1)


def shapley_track(dyn: DynamicGame, graphs=None, cfg: TrackerConfig | None = None,
                  x0: np.ndarray | None = None) -> TrackResult:
    """Run the online Shapley tracker over every sample of ``dyn``."""
    cfg = cfg or TrackerConfig()
    n = dyn.n_agents
    weights = resolve_weights(graphs, n)
    state = TrackerState.start(initial_matrix(dyn.game_at(0), cfg) if x0 is None else x0)
    K = dyn.horizon
    xs = np.empty((K, n, n))
    phis = np.empty((K, n))
    grand = dyn.grand_values()
    err = np.empty(K)
    resid = np.empty(K)
    viol = np.empty(K)
    for k, game in enumerate(dyn):
        mhat = marginal_matrix(game)
        phi = shapley_exact(game)
        w = weights(k)
        for _ in range(cfg.iterations_per_sample):
            state = shapley_step(state, game, w, cfg, mhat=mhat)
        xs[k] = state.x
        phis[k] = phi
        err[k] = np.linalg.norm(state.x - phi[None, :])
        resid[k] = consensus_residual(state.x)
        viol[k] = core_violation(game, state.x.mean(axis=0))
    return TrackResult(
        "shapley", xs, phis, grand,
        {"err_shapley": err, "consensus_residual": resid, "core_violation": viol},
    )


def shapley_static(game: InstantaneousGame, graphs=None, cfg: TrackerConfig | None = None,
                   x0: np.ndarray | None = None, target: np.ndarray | None = None) -> np.ndarray:
    """Iterate the Shapley update on a fixed game until every row is within
    ``cfg.tolerance`` (stacked norm) of the exact Shapley value."""
    cfg = cfg or TrackerConfig(alpha=0.5, step_schedule="diminishing", tolerance=1e-4)
    n = game.n_agents
    weights = resolve_weights(graphs, n)
    phi = shapley_exact(game) if target is None else np.asarray(target, dtype=float)
    mhat = marginal_matrix(game)
    state = TrackerState.start(initial_matrix(game, cfg) if x0 is None else x0)
    error = np.linalg.norm(state.x - phi)
    for _ in range(cfg.max_iter):
        if error <= cfg.tolerance:
            return state.x
        state = shapley_step(state, game, weights(state.k), cfg, mhat=mhat)
        error = np.linalg.norm(state.x - phi)
    if error <= cfg.tolerance:
        return state.x
    raise ConvergenceError(
        f"Shapley iteration did not reach {cfg.tolerance:g} in {cfg.max_iter} iterations "
        f"(error {error:.3g})",
        iterate=state.x, residual=error,
    )


def shapley_fixed_point(mhat: np.ndarray, w: np.ndarray, alpha: float) -> np.ndarray:
    """Fixed point of ``x -> (1 - a) W x + a M``: solves ``(I - (1 - a) W) x = a M``."""
    n = len(w)
    return np.linalg.solve(np.eye(n) - (1.0 - alpha) * np.asarray(w), alpha * np.asarray(mhat))


# core tracking

Operator = Callable[[np.ndarray], np.ndarray]


def projection_operator(bs: BoundingSet, cfg: TrackerConfig, warm: WarmStart | None = None) -> Operator:
    def project(xhat):
        return project_bounding_set(xhat, bs, cfg.projection_tol, cfg.projection_max_iter, warm)
    return project


def core_operator(bs: BoundingSet, cfg: TrackerConfig, x_prev_row: np.ndarray,
                  alpha: float | None = None, warm: WarmStart | None = None) -> Operator:
    """Per-agent core update: a relaxed projection pulled toward the previous proposal."""
    a = cfg.alpha if alpha is None else alpha
    g = cfg.gamma_reg
    project = projection_operator(bs, cfg, warm)
    prev = np.asarray(x_prev_row, dtype=float)

    def update(xhat):
        return (1.0 - a - a * g) * xhat + a * project(xhat) + a * g * prev
    return update


def core_step_general(state: TrackerState, operators: Sequence[Operator], w: np.ndarray) -> TrackerState:
    """Mix the proposals with ``w`` and apply agent ``i``'s operator to row ``i``."""
    xhat = consensus_apply(w, state.x)
    if len(operators) != len(xhat):
        raise ValueError("need one operator per agent")
    x_new = np.vstack([op(row) for op, row in zip(operators, xhat)])
    return TrackerState(state.k + 1, x_new, state.x)


def bounding_sets(game: InstantaneousGame) -> list[BoundingSet]:
    return [BoundingSet.of(game, i) for i in range(game.n_agents)]


def warm_starts(sets: Sequence[BoundingSet]) -> list[WarmStart]:
    """One projection warm start per agent; reusable across games of the same size."""
    return [WarmStart(bs.n_halfspaces) for bs in sets]


def core_step(state: TrackerState, game: InstantaneousGame, w: np.ndarray, cfg: TrackerConfig,
              sets: Sequence[BoundingSet] | None = None,
              warm: Sequence[WarmStart] | None = None) -> TrackerState:
    cfg.check_core()
    sets = bounding_sets(game) if sets is None else sets
    warm = [None] * len(sets) if warm is None else warm
    alpha = cfg.step_size(state.k)
    ops = [core_operator(bs, cfg, state.x_prev[i], alpha, warm[i]) for i, bs in enumerate(sets)]
    return core_step_general(state, ops, w)


def core_converge(game: InstantaneousGame, cfg: TrackerConfig | None = None,
                  x0: np.ndarray | None = None, w=None,
                  warm: Sequence[WarmStart] | None = None) -> np.ndarray:
    """Run the static core protocol until the proposals agree and their
    average lies in the core, both to ``cfg.tolerance``."""
    cfg = cfg or TrackerConfig(alpha=0.5)
    cfg = replace(cfg, step_schedule="fixed")
    n = game.n_agents
    weights = resolve_weights(w, n)
    sets = bounding_sets(game)
    warm = warm_starts(sets) if warm is None else warm
    state = TrackerState.start(initial_matrix(game, cfg) if x0 is None else x0)
    residual = np.inf
    for _ in range(cfg.max_iter):
        state = core_step(state, game, weights(state.k), cfg, sets, warm)
        spread = consensus_residual(state.x)
        if spread <= cfg.tolerance:
            residual = max(spread, core_violation(game, state.x.mean(axis=0)))
            if residual <= cfg.tolerance:
                return state.x
        else:
            residual = spread
    raise ConvergenceError(
        f"core protocol did not converge in {cfg.max_iter} iterations (residual {residual:.3g}); "
        "possibly empty core or too-loose contraction",
        iterate=state.x, residual=residual,
    )


REFERENCE_MODES = ("chain", "warm", "cold")


def core_track(dyn: DynamicGame, graphs=None, cfg: TrackerConfig | None = None,
               reference: str | None = "chain", x0: np.ndarray | None = None,
               reference_tolerance: float | None = None) -> TrackResult:
    """Run the online core tracker over every sample of ``dyn``.

    The reference for step ``k`` is the point the static protocol (complete
    graph, same ``alpha`` and ``gamma_reg``) converges to on game ``k``.
    Where it starts from selects the core point when the core is not a
    singleton: ``"chain"`` starts from the previous step's converged
    reference (the first from the init policy), ``"warm"`` from the current
    online proposals, ``"cold"`` from the init policy every step. ``None``
    skips the reference. ``reference_tolerance`` defaults to ``cfg.tolerance``.
    """
    cfg = cfg or TrackerConfig(alpha=0.5)
    cfg.check_core()
    if reference is not None and reference not in REFERENCE_MODES:
        raise ValueError(f"unknown reference mode {reference!r}")
    ref_cfg = cfg if reference_tolerance is None else replace(cfg, tolerance=reference_tolerance)
    n = dyn.n_agents
    weights = resolve_weights(graphs, n)
    state = TrackerState.start(initial_matrix(dyn.game_at(0), cfg) if x0 is None else x0)
    K = dyn.horizon
    xs = np.empty((K, n, n))
    refs = np.full((K, n), np.nan)
    grand = dyn.grand_values()
    dist = np.full(K, np.nan)
    resid = np.empty(K)
    viol = np.empty(K)
    warm = ref_warm = None
    ref_x = None
    for k, game in enumerate(dyn):
        sets = bounding_sets(game)
        if warm is None:
            warm, ref_warm = warm_starts(sets), warm_starts(sets)
        try:
            if reference is not None:
                start = {"warm": state.x, "chain": ref_x, "cold": None}[reference]
                ref_x = core_converge(game, ref_cfg, x0=start, warm=ref_warm)
                refs[k] = ref_x.mean(axis=0)
            w = weights(k)
            for _ in range(cfg.iterations_per_sample):
                state = core_step(state, game, w, cfg, sets, warm)
        except ConvergenceError as exc:
            exc.step = k
            raise
        xs[k] = state.x
        xbar = state.x.mean(axis=0)
        if reference is not None:
            dist[k] = np.linalg.norm(xbar - refs[k])
        resid[k] = consensus_residual(state.x)
        viol[k] = core_violation(game, xbar)
    return TrackResult(
        "core", xs, refs, grand,
        {"err_core_dist": dist, "consensus_residual": resid, "core_violation": viol},
    )


# bounds

@dataclass(frozen=True)
class BoundParams:
    """Variability bound ``delta`` and contraction factors (scalar or per step)."""

    delta: float
    contraction_factors: float | Sequence[float]

    def factors(self, count: int) -> np.ndarray:
        lf = np.atleast_1d(np.asarray(self.contraction_factors, dtype=float))
        if lf.size == 1:
            return np.full(count, lf[0])
        if lf.size < count:
            raise ValueError(f"need {count} contraction factors, got {lf.size}")
        return lf[:count]

    def worst_factor(self) -> float:
        return float(np.max(np.asarray(self.contraction_factors, dtype=float)))


def theoretical_bound(bp: BoundParams, initial_error: float, k: int) -> float:
    """``prod(L_1..L_{k-1}) * e0 + (1 - Lmax**(k-1)) / (1 - Lmax) * delta``."""
    lf = np.asarray(bp.contraction_factors, dtype=float)
    if np.any(lf <= 0) or np.any(lf >= 1):
        raise ValueError("contraction factors must lie in (0, 1)")
    if bp.delta < 0 or initial_error < 0:
        raise ValueError("delta and initial_error must be non-negative")
    if k < 1:
        raise ValueError("k starts at 1")
    if k == np.inf:
        return bound_limit(bp)
    lbar = bp.worst_factor()
    lhat = float(np.prod(bp.factors(k - 1)))
    return lhat * initial_error + (1.0 - lbar ** (k - 1)) / (1.0 - lbar) * bp.delta


def bound_limit(bp: BoundParams) -> float:
    return bp.delta / (1.0 - bp.worst_factor())


def empirical_contraction(op: Callable[[np.ndarray], np.ndarray], shape, rng: np.random.Generator,
                          pairs: int = 100, scale: float = 1.0) -> float:
    """Largest observed ``|op(x) - op(y)| / |x - y|`` over random pairs."""
    worst = 0.0
    for _ in range(pairs):
        x = scale * rng.normal(size=shape)
        y = scale * rng.normal(size=shape)
        ratio = np.linalg.norm(op(x) - op(y)) / np.linalg.norm(x - y)
        worst = max(worst, ratio)
    return worst
