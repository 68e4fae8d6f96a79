"""Communication graphs, Metropolis weights and the consensus operator."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
from scipy.sparse.csgraph import connected_components

from .game import GameError


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        clean = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GameError(f"self-loop on agent {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GameError(f"edge ({i}, {j}) outside 0..{self.n - 1}")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Iterable[int]]) -> "Graph":
        return cls(n, frozenset(tuple(e) for e in edges))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        count, _ = connected_components(self.adjacency(), directed=False)
        return count == 1

    def sorted_edges(self) -> list[list[int]]:
        return [list(e) for e in sorted(self.edges)]


def complete_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def metropolis_weights(g: Graph) -> np.ndarray:
    """``w_ij = 1 / (1 + max(d_i, d_j))`` on edges, remainder on the diagonal."""
    if not g.is_connected():
        raise GameError("Metropolis weights need a connected graph")
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    w[np.diag_indices(g.n)] = 1.0 - w.sum(axis=1)
    return w


def gamma_min(w: np.ndarray) -> float:
    """Smallest positive entry of ``w``."""
    w = np.asarray(w)
    return float(w[w > 0].min())


def check_weight_matrix(w: np.ndarray, atol: float = 1e-12) -> list[str]:
    w = np.asarray(w, dtype=float)
    problems = []
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        return ["not square"]
    if np.any(w < 0):
        problems.append("negative entry")
    if not np.allclose(w.sum(axis=1), 1.0, atol=atol, rtol=0):
        problems.append("rows do not sum to 1")
    if not np.allclose(w.sum(axis=0), 1.0, atol=atol, rtol=0):
        problems.append("columns do not sum to 1")
    if not np.allclose(w, w.T, atol=atol, rtol=0):
        problems.append("not symmetric")
    if np.any(np.diag(w) <= 0):
        problems.append("non-positive diagonal entry")
    return problems


def random_connected_graph(n: int, edge_prob: float, seed, max_attempts: int = 1000) -> Graph:
    """Erdos-Renyi draw, redrawn until connected. Deterministic in ``seed``."""
    if n < 1:
        raise GameError("need at least one agent")
    if not 0.0 <= edge_prob <= 1.0:
        raise GameError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    for _ in range(max_attempts):
        keep = rng.random(len(iu[0])) < edge_prob
        g = Graph(n, frozenset(zip(iu[0][keep].tolist(), iu[1][keep].tolist())))
        if g.is_connected():
            return g
    raise GameError(
        f"no connected graph after {max_attempts} draws with edge_prob={edge_prob}; "
        "try a higher edge_prob"
    )


def consensus_apply(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row ``i`` of the result is ``sum_j w_ij x_j``."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.ndim != 2 or w.shape[1] != x.shape[0]:
        raise GameError(f"weight matrix {w.shape} does not match payoff matrix {x.shape}")
    return w @ x


@dataclass(frozen=True)
class GraphSchedule:
    """Per-step communication graphs.

    ``topology`` is ``"complete"``, ``"path"`` or ``"random"``. When
    ``time_varying`` is set, random graphs are redrawn every step with a seed
    derived from ``(seed, k)``.
    """

    n: int
    topology: str = "complete"
    edge_prob: float = 0.5
    time_varying: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.topology not in ("complete", "path", "random"):
            raise GameError(f"unknown topology {self.topology!r}")

    def graph_at(self, k: int) -> Graph:
        return _graph_at(self, k if self.time_varying else 0)

    def weights_at(self, k: int) -> np.ndarray:
        return _weights_at(self, k if self.time_varying else 0)

    def __call__(self, k: int) -> np.ndarray:
        return self.weights_at(k)

    def to_json(self, horizon: int) -> list[dict]:
        return [{"k": k, "edges": self.graph_at(k).sorted_edges()} for k in range(horizon)]

    def dump(self, path, horizon: int) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(horizon), fh)


@lru_cache(maxsize=4096)
def _graph_at(schedule: GraphSchedule, k: int) -> Graph:
    if schedule.topology == "complete":
        return complete_graph(schedule.n)
    if schedule.topology == "path":
        return path_graph(schedule.n)
    seq = np.random.SeedSequence([schedule.seed, k])
    return random_connected_graph(schedule.n, schedule.edge_prob, seq)


@lru_cache(maxsize=4096)
def _weights_at(schedule: GraphSchedule, k: int) -> np.ndarray:
    w = metropolis_weights(_graph_at(schedule, k))
    w.setflags(write=False)
    return w


def load_schedule(path, n: int | None = None) -> list[Graph]:
    """Read a graph schedule written by ``GraphSchedule.dump``."""
    with open(path, encoding="utf-8") as fh:
        rows = json.load(fh)
    if n is None:
        n = 1 + max((max(e) for row in rows for e in row["edges"]), default=0)
    return [Graph.from_edges(n, row["edges"]) for row in sorted(rows, key=lambda r: r["k"])]


def resolve_weights(graphs, n: int) -> Callable[[int], np.ndarray]:
    """Normalize a weight specification into a ``k -> W`` callable.

    Accepts ``None`` (static complete graph), a single matrix, a ``Graph``,
    a sequence of matrices or graphs indexed by step, or any callable.
    """
    if graphs is None:
        return GraphSchedule(n)
    if isinstance(graphs, Graph):
        w = metropolis_weights(graphs)
        return lambda k: w
    if callable(graphs):
        return graphs
    if isinstance(graphs, np.ndarray) and graphs.ndim == 2:
        return lambda k: graphs
    items = [metropolis_weights(g) if isinstance(g, Graph) else np.asarray(g, dtype=float) for g in graphs]
    return lambda k: items[k % len(items)]
