"""Dykstra's alternating projection onto the coupling set.

Slow but simple; used as a high-precision reference for the dual solvers
and to reproduce its convergence curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coupling import BallSpec, Coupling, as_block
from .errors import DegenerateError, InvalidParameterError
from .grid import LocalCost
from .simplex import _project_masked

Projection = Callable[[np.ndarray], np.ndarray]


def project_halfspace(Pi, cost: LocalCost, delta: float) -> np.ndarray:
    """Closed-form projection onto ``{<Pi, C> <= delta}`` (may leave negative entries)."""
    Pi = as_block(Pi, cost)
    norm_sq = cost.frobenius_sq
    if norm_sq <= 0:
        raise DegenerateError("cost is identically zero on the stored entries")
    excess = float(np.sum(Pi * cost.costs)) - delta
    if excess <= 0:
        return Pi.copy()
    return Pi - (excess / norm_sq) * cost.costs


def project_capacity(Pi, cost: LocalCost, caps) -> np.ndarray:
    """Projection onto ``{Pi^T 1 <= caps}``: one halfspace per target pixel, disjoint supports."""
    Pi = as_block(Pi, cost)
    excess = np.maximum(cost.column_sums(Pi) - caps, 0.0)
    counts = np.bincount(cost.neighbors[cost.mask], minlength=cost.n)
    shift = excess / np.maximum(counts, 1)
    return Pi - cost.gather(shift)


@dataclass
class DykstraState:
    Pi_s: np.ndarray
    Pi_h: np.ndarray
    I_s: np.ndarray
    I_h: np.ndarray
    iterations: int = 0
    log: list = field(default_factory=list)


def dykstra_step(state: DykstraState, proj_s: Projection, proj_h: Projection) -> DykstraState:
    """One iteration of the two-set recursion, updating ``state`` in place."""
    inp = state.Pi_h - state.I_s
    state.Pi_s = proj_s(inp)
    state.I_s = state.Pi_s - inp
    inp = state.Pi_s - state.I_h
    state.Pi_h = proj_h(inp)
    state.I_h = state.Pi_h - inp
    state.iterations += 1
    return state


def dykstra_project(G, ball: BallSpec, max_iter: int = 1000, tol: float = 0.0, record: bool = True):
    """Project ``G`` onto ``C_s`` (row simplices) intersected with ``C_h`` (budget halfspace).

    Returns ``(coupling, log)``; ``log`` rows are ``(iteration, simplex
    residual |Pi_h 1 - x|_1, halfspace residual [<Pi_s, C> - delta]_+)``.
    With ``tol > 0`` the loop exits once both residuals are at most ``tol``.
    """
    if max_iter < 1:
        raise InvalidParameterError("max_iter must be at least 1")
    cost = ball.cost
    G = as_block(G, cost)
    x, delta = ball.x, ball.radius
    mask, costs = cost.mask, cost.costs
    zeros = np.zeros_like(G)
    state = DykstraState(G.copy(), G.copy(), zeros, zeros.copy())
    proj_s = lambda P: _project_masked(P, x, mask)  # noqa: E731
    proj_h = lambda P: project_halfspace(P, cost, delta)  # noqa: E731
    for _ in range(max_iter):
        dykstra_step(state, proj_s, proj_h)
        simplex_res = float(np.abs(state.Pi_h.sum(axis=1) - x).sum())
        half_res = max(float(np.sum(state.Pi_s * costs)) - delta, 0.0)
        if record:
            state.log.append((state.iterations, simplex_res, half_res))
        if tol > 0 and simplex_res <= tol and half_res <= tol:
            break
    return Coupling(cost, state.Pi_s), state.log


def cyclic_dykstra(G, projections: Sequence[Projection], max_iter: int = 1000, tol: float = 0.0):
    """Dykstra's recursion over any number of sets; returns the output of the first set.

    Stops early when a full sweep changes no iterate by more than ``tol``.
    """
    y = np.array(G, dtype=float)
    incs = [np.zeros_like(y) for _ in projections]
    first = y
    for it in range(max_iter):
        moved = 0.0
        for k, proj in enumerate(projections):
            inp = y - incs[k]
            out = proj(inp)
            moved = max(moved, float(np.max(np.abs(out - y))))
            incs[k] = out - inp
            y = out
            if k == 0:
                first = out
        if tol > 0 and moved <= tol:
            break
    return first, it + 1
