"""Euclidean projection onto an agent's bounding set.

The bounding set of agent ``i`` is the efficiency hyperplane
``sum(x) = v(I)`` intersected with the half-spaces ``x(S) >= v(S)`` for
every proper coalition ``S`` containing ``i``. The projection is computed
with Dykstra's algorithm; the hyperplane is affine, so it needs no
correction term, and each half-space correction is a multiple of the
coalition's indicator vector, so a single scalar per constraint suffices.
When Dykstra stalls on nearly degenerate constraint sets, the projection is
solved exactly as a least-distance problem through non-negative least
squares.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np
from scipy.linalg import null_space
from scipy.optimize import lsq_linear

from .game import ConvergenceError, GameError, InstantaneousGame, as_mask, cardinality


class ProjectionError(ConvergenceError):
    """Dykstra did not converge; carries the last iterate and its residual."""


def halfspace_project(x, s, rhs: float) -> np.ndarray:
    """Project ``x`` onto ``{y : y(S) >= rhs}``."""
    x = np.asarray(x, dtype=float)
    mask = as_mask(s)
    if mask == 0:
        raise GameError("half-space projection needs a non-empty coalition")
    idx = [j for j in range(len(x)) if mask >> j & 1]
    total = x[idx].sum()
    if total >= rhs:
        return x.copy()
    out = x.copy()
    out[idx] += (rhs - total) / len(idx)
    return out


@dataclass(frozen=True, eq=False)
class BoundingSet:
    """Constraint view of agent ``owner``'s bounding set for ``game``."""

    owner: int
    n_agents: int
    total: float
    masks: np.ndarray
    rhs: np.ndarray

    @classmethod
    def of(cls, game: InstantaneousGame, i: int) -> "BoundingSet":
        n = game.n_agents
        if not 0 <= i < n:
            raise GameError(f"agent {i} out of range")
        table = game.values()
        grand = game.grand
        masks = np.arange(1 << n, dtype=np.int64)
        masks = masks[((masks >> i) & 1).astype(bool) & (masks != grand)]
        return cls(i, n, float(table[grand]), masks, table[masks].astype(float))

    @property
    def n_halfspaces(self) -> int:
        return len(self.masks)

    def sizes(self) -> np.ndarray:
        return np.array([cardinality(int(m)) for m in self.masks], dtype=float)

    def violation(self, x) -> float:
        """Largest constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        sums = self.member_matrix @ x
        worst = float(np.max(self.rhs - sums)) if len(self.masks) else 0.0
        return max(abs(float(x.sum()) - self.total), worst, 0.0)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return self.violation(x) <= tol

    @cached_property
    def member_matrix(self) -> np.ndarray:
        return ((self.masks[:, None] >> np.arange(self.n_agents)) & 1).astype(float)

    @cached_property
    def member_lists(self) -> tuple[np.ndarray, np.ndarray]:
        return _member_lists(self.masks, self.n_agents)


def _member_lists(masks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR layout of the coalitions: members of ``masks[j]`` are ``idx[ptr[j]:ptr[j+1]]``."""
    member = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    ptr = np.concatenate([[0], np.cumsum(member.sum(axis=1))]).astype(np.int64)
    idx = np.nonzero(member)[1].astype(np.int64)
    return ptr, idx


@numba.njit(cache=True)
def _dykstra(x0, ptr, idx, rhs, total, tol, max_iter, corr):
    n = x0.shape[0]
    m = rhs.shape[0]
    x = x0.copy()
    # a warm start enters as x0 - sum_j corr_j 1_S
    for j in range(m):
        if corr[j] != 0.0:
            for t in range(ptr[j], ptr[j + 1]):
                x[idx[t]] -= corr[j]
    prev = np.empty(n)
    residual = np.inf
    for it in range(max_iter):
        for b in range(n):
            prev[b] = x[b]
        shift = (total - x.sum()) / n
        for b in range(n):
            x[b] += shift
        change = 0.0
        for j in range(m):
            lo = ptr[j]
            hi = ptr[j + 1]
            size = hi - lo
            # y = x + corr_j * 1_S ; x <- proj(y) ; corr_j <- (y - x) coefficient
            s = 0.0
            for t in range(lo, hi):
                s += x[idx[t]]
            s += corr[j] * size
            if s >= rhs[j]:
                step = corr[j]
                new_corr = 0.0
            else:
                step = corr[j] + (rhs[j] - s) / size
                new_corr = -(rhs[j] - s) / size
            if step != 0.0:
                for t in range(lo, hi):
                    x[idx[t]] += step
            d = new_corr - corr[j]
            change += d * d * size
            corr[j] = new_corr
        disp = 0.0
        for b in range(n):
            disp += (x[b] - prev[b]) ** 2
        residual = max(np.sqrt(disp), np.sqrt(change))
        if residual <= tol:
            return x, it + 1, residual
    return x, max_iter, residual


def default_sweep_cap(n: int) -> int:
    return 10 * (1 << n)


def _least_distance(x: np.ndarray, bs: "BoundingSet") -> tuple[np.ndarray, np.ndarray]:
    """Exact projection; returns the point and the half-space multipliers.

    With ``y = x + c/n + B u`` (``B`` an orthonormal basis of the sum-zero
    subspace) efficiency holds for every ``u`` and the task becomes
    ``min |u|`` subject to ``G u >= h``, solved by the classical reduction
    to non-negative least squares.
    """
    n = bs.n_agents
    shift = (bs.total - x.sum()) / n
    if bs.n_halfspaces == 0 or n == 1:
        return x + shift, np.zeros(bs.n_halfspaces)
    a = bs.member_matrix
    basis = null_space(np.ones((1, n)))
    g = a @ basis
    h = bs.rhs - a @ (x + shift)
    e = np.vstack([g.T, h[None, :]])
    f = np.zeros(n)
    f[-1] = 1.0
    # bounded-variable least squares; more reliable here than scipy's nnls
    w = np.maximum(lsq_linear(e, f, bounds=(0.0, np.inf), method="bvls", tol=1e-15).x, 0.0)
    r = e @ w - f
    rho = -r[-1]
    if rho <= 1e-14:
        raise GameError("bounding set is empty")
    mult = w / rho
    y = x + shift + basis @ (g.T @ mult)
    return y, mult


class WarmStart:
    """Dykstra correction terms carried from one projection to the next.

    The corrections are the (negated) multipliers of the half-spaces. Any
    non-positive vector is a valid starting point of the underlying dual
    coordinate ascent, so reusing the previous call's corrections changes
    only the number of sweeps, never the limit. Valid across games as long
    as the constraint masks are the same.
    """

    def __init__(self, n_halfspaces: int):
        self.corr = np.zeros(n_halfspaces)
        self.sweeps = 0

    def reset(self) -> None:
        self.corr[:] = 0.0


def project_bounding_set(x, bs: BoundingSet, tol: float = 1e-9, max_iter: int | None = None,
                         warm: WarmStart | None = None, fallback: bool = True) -> np.ndarray:
    """Euclidean projection of ``x`` onto the bounding set ``bs`` via Dykstra.

    Stops once both the displacement over a sweep and the change of the
    correction terms drop below ``tol``. The sweep visits the hyperplane
    first, then the half-spaces in ascending mask order. With ``warm`` the
    sweep starts from, and afterwards stores, the correction terms.
    If ``max_iter`` sweeps (default ``10 * 2**N``) are not enough and
    ``fallback`` is set, the exact least-distance solver takes over and its
    multipliers seed the warm start.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (bs.n_agents,):
        raise GameError(f"point must have length {bs.n_agents}")
    if max_iter is None:
        max_iter = default_sweep_cap(bs.n_agents)
    if warm is None:
        corr = np.zeros(bs.n_halfspaces)
    else:
        if len(warm.corr) != bs.n_halfspaces:
            raise GameError("warm start does not match the bounding set")
        corr = warm.corr
    ptr, idx = bs.member_lists
    y, done, residual = _dykstra(x, ptr, idx, bs.rhs, bs.total, tol, max_iter, corr)
    if warm is not None:
        warm.sweeps = done
    if residual > tol and fallback:
        exact, mult = _least_distance(x, bs)
        if bs.violation(exact) <= tol:
            if warm is not None:
                warm.corr[:] = -mult
            return exact
    if residual > tol:
        raise ProjectionError(
            f"Dykstra projection for agent {bs.owner} did not converge in {max_iter} sweeps "
            f"(residual {residual:.3g})",
            iterate=y,
            residual=residual,
        )
    # the last sweep ends on a half-space; restore exact efficiency
    y += (bs.total - y.sum()) / bs.n_agents
    return y


def project_active_set(x, bs: BoundingSet) -> np.ndarray:
    """Brute-force projection: try every active subset of half-spaces.

    For each subset the projection onto the affine hull of the active
    constraints (plus the hyperplane) is solved in closed form; the nearest
    feasible candidate is the true projection. Exponential in the number of
    half-spaces; meant for small games and tests.
    """
    x = np.asarray(x, dtype=float)
    n = bs.n_agents
    a_all = ((bs.masks[:, None] >> np.arange(n)) & 1).astype(float)
    m = len(bs.masks)
    best, best_dist = None, np.inf
    for subset in range(1 << m):
        rows = [j for j in range(m) if subset >> j & 1]
        a = np.vstack([np.ones((1, n)), a_all[rows]])
        b = np.concatenate([[bs.total], bs.rhs[rows]])
        # y = x - A^T lam with A A^T lam = A x - b
        gram = a @ a.T
        lam, *_ = np.linalg.lstsq(gram, a @ x - b, rcond=None)
        y = x - a.T @ lam
        if np.max(np.abs(a @ y - b)) > 1e-9:
            continue
        if bs.violation(y) > 1e-10:
            continue
        dist = np.linalg.norm(y - x)
        if dist < best_dist:
            best, best_dist = y, dist
    if best is None:
        raise GameError("bounding set is empty")
    return best
