"""Capacity-constrained projection (post-processing for the hypercube constraint).

Projects onto ``{Pi >= 0, Pi 1 = x, Pi^T 1 <= caps, <Pi, C> <= delta}`` by
maximising the partial dual ``g(lam, mu)`` in which both the budget
(``lam``) and the column capacities (``mu``) are dualised.  For fixed
multipliers the inner problem is again a row-wise simplex projection, of
``G - lam C - 1 mu^T``.  The dual is maximised by alternating a bisection in
``lam`` with a few accelerated projected-gradient steps in ``mu``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .coupling import BallSpec, Coupling, as_block
from .dualproj import bisect_multiplier, dual_upper_bound
from .errors import InfeasibleError, InvalidInputError, InvalidParameterError
from .grid import LocalCost
from .simplex import _project_masked

log = logging.getLogger(__name__)


@dataclass
class CapacityDualState:
    lam: float
    mu: np.ndarray
    k_inner: int
    step: float
    value: float = -np.inf
    history: list = field(default_factory=list)


def mu_gradient(Pi, caps, cost: LocalCost | None = None) -> np.ndarray:
    """Gradient of the dual in ``mu``: column sums of ``Pi`` minus ``caps``."""
    if isinstance(Pi, Coupling):
        cols = Pi.target
    elif cost is not None:
        cols = cost.column_sums(as_block(Pi, cost))
    else:
        cols = np.asarray(Pi, dtype=float).sum(axis=0)
    caps = np.asarray(caps, dtype=float)
    if cols.shape != caps.shape:
        raise ValueError(f"column sums {cols.shape} and caps {caps.shape} differ in shape")
    return cols - caps


def capacity_plan(lam: float, mu, G, ball: BallSpec) -> np.ndarray:
    cost = ball.cost
    return _project_masked(as_block(G, cost) - lam * cost.costs - cost.gather(np.asarray(mu)), ball.x, cost.mask)


def capacity_dual_value(lam: float, mu, G, ball: BallSpec, caps) -> float:
    """``g(lam, mu)`` evaluated through its Lagrangian minimiser."""
    cost = ball.cost
    G = as_block(G, cost)
    mu = np.asarray(mu, dtype=float)
    Pi = capacity_plan(lam, mu, G, ball)
    diff = (Pi - G)[cost.mask]
    budget = float(np.sum(Pi * cost.costs)) - ball.radius
    return 0.5 * float(diff @ diff) + lam * budget + float(mu @ (cost.column_sums(Pi) - caps))


def capacity_project(
    G,
    ball: BallSpec,
    caps=None,
    outer_iters: int = 300,
    k_inner: int = 15,
    tol: float = 1e-10,
    cap_tol: float = 1e-6,
    step: float | None = None,
) -> Coupling:
    """Post-process ``G`` so that every target pixel receives at most ``caps``.

    ``tol`` is the bisection tolerance for the budget multiplier; the outer
    loop also stops early once the capacity violation is below ``cap_tol``
    and the dual stops improving.  The final plan is recovered at the upper
    end of a last bisection, so the budget constraint holds.
    """
    cost = ball.cost
    G = as_block(G, cost)
    if not np.all(np.isfinite(G)):
        raise InvalidInputError("matrix to project contains NaN or inf")
    x, delta = ball.x, ball.radius
    caps = np.ones(cost.n) if caps is None else np.broadcast_to(np.asarray(caps, dtype=float), (cost.n,)).copy()
    if np.any(caps <= 0):
        raise InvalidParameterError("capacities must be positive")
    if x.sum() > caps.sum() * (1 + 1e-12):
        raise InfeasibleError(f"total mass {x.sum():.6g} exceeds total capacity {caps.sum():.6g}")
    if outer_iters < 1 or k_inner < 0:
        raise InvalidParameterError("outer_iters must be >= 1 and k_inner >= 0")

    # the mu-gradient map is Lipschitz with constant at most the largest column count
    in_degree = np.bincount(cost.neighbors[cost.mask], minlength=cost.n)
    state = CapacityDualState(0.0, np.zeros(cost.n), k_inner, step or 1.0 / max(int(in_degree.max()), 1))

    def solve_lam(mu):
        shifted = G - cost.gather(mu)
        upper = dual_upper_bound(shifted, x, cost)

        def inner(lam):
            Pi = _project_masked(shifted - lam * cost.costs, x, cost.mask)
            return Pi, float(np.sum(Pi * cost.costs)) - delta

        return bisect_multiplier(inner, upper, tol)

    def value(lam, mu):
        return capacity_dual_value(lam, mu, G, ball, caps)

    Pi, bracket = solve_lam(state.mu)
    state.lam = bracket.upper
    state.value = value(state.lam, state.mu)
    for outer in range(outer_iters):
        start_value = state.value
        # accelerated projected ascent on mu, restarted every outer iteration
        mu, mu_prev, t = state.mu, state.mu, 1.0
        for _ in range(k_inner):
            t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            probe = np.maximum(mu + ((t - 1) / t_next) * (mu - mu_prev), 0.0)
            grad = mu_gradient(capacity_plan(state.lam, probe, G, ball), caps, cost)
            cand = np.maximum(probe + state.step * grad, 0.0)
            cand_value = value(state.lam, cand)
            if cand_value < state.value - 1e-15 * max(1.0, abs(state.value)):
                # reject, shrink, restart momentum from the last accepted point
                state.step *= 0.5
                mu_prev, t = mu, 1.0
                continue
            mu_prev, mu, t = mu, cand, t_next
            state.value = cand_value
        state.mu = mu
        Pi, bracket = solve_lam(state.mu)
        lam_value = value(bracket.upper, state.mu)
        if lam_value >= state.value:
            state.lam, state.value = bracket.upper, lam_value
        violation = float(np.max(cost.column_sums(Pi) - caps))
        state.history.append((outer + 1, state.value, violation))
        if violation <= cap_tol and state.value - start_value <= 1e-14 * max(1.0, abs(state.value)):
            break
    log.debug("capacity projection: %d outer iterations, lam=%.6g", len(state.history), state.lam)
    result = Coupling(cost, Pi, bracket)
    result.dual_state = state
    return result
