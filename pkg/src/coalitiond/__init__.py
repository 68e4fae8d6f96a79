"""Online distributed payoff allocation for dynamic coalitional games."""

from .exact import (
    CoreCheck, agent_marginal_vector, core_membership, core_reference_point, core_violation,
    marginal_matrix, marginal_vector_for_ordering, shapley_by_subsets, shapley_exact,
)
from .game import (
    CapabilityError, ConvergenceError, DynamicGame, GameError, InstantaneousGame, coalition,
    drifting_game, glove_game, load_game, members, random_convex_game, random_game, save_game,
)
from .metrics import (
    ErrorSeries, benchmark_step_cost, consensus_residual, mean_cumulative_error, payoff_difference,
)
from .network import (
    Graph, GraphSchedule, complete_graph, consensus_apply, metropolis_weights, path_graph,
    random_connected_graph,
)
from .projection import BoundingSet, ProjectionError, WarmStart, project_active_set, project_bounding_set
from .tracking import (
    BoundParams, TrackerConfig, TrackerState, TrackResult, bound_limit, core_converge, core_step,
    core_step_general, core_track, shapley_static, shapley_step, shapley_track, theoretical_bound,
)

__version__ = "0.1.0"
