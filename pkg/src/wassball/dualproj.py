"""Exact Euclidean projection onto ``{Pi >= 0, Pi 1 = x, <Pi, C> <= delta}``.

The budget constraint is dualised with a single multiplier ``lam``; for a
fixed ``lam`` the inner problem splits into independent simplex projections
of the rows of ``G - lam C``.  The dual is concave and differentiable with
derivative ``<Pi(lam), C> - delta``, so the multiplier is found by bisection
on the sign of that derivative.
"""

from __future__ import annotations

import logging

import numpy as np

from .coupling import BallSpec, Coupling, DualBracket, as_block
from .errors import DegenerateError, InvalidInputError
from .grid import LocalCost
from .simplex import _project_masked

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
REFINE_STEPS = 3
BUDGET_SLACK = 1e-12


def dual_upper_bound(G, x, cost: LocalCost) -> float:
    """Upper bound on the optimal multiplier: ``(2 |G|_inf + |x|_inf) / min_offdiag``."""
    if not cost.min_offdiag > 0:
        raise DegenerateError("cost has no positive off-diagonal entry")
    G = as_block(G, cost)
    x = np.asarray(x, dtype=float)
    gmax = float(np.max(np.abs(G[cost.mask]))) if cost.mask.any() else 0.0
    xmax = float(np.max(np.abs(x))) if x.size else 0.0
    if not np.isfinite(cost.min_offdiag):
        # k = 1: no movement possible, the multiplier is irrelevant
        return 0.0
    return (2.0 * gmax + xmax) / cost.min_offdiag


def _inner(lam: float, G: np.ndarray, x: np.ndarray, cost: LocalCost, delta: float):
    Pi = _project_masked(G - lam * cost.costs, x, cost.mask)
    return Pi, float(np.sum(Pi * cost.costs)) - delta


def eval_dual(lam: float, G, ball: BallSpec):
    """Return ``(g(lam), g'(lam), Pi(lam))``."""
    if lam < 0:
        raise ValueError("dual variable must be nonnegative")
    cost = ball.cost
    G = as_block(G, cost)
    Pi, gprime = _inner(lam, G, ball.x, cost, ball.radius)
    diff = (Pi - G)[cost.mask]
    value = 0.5 * float(diff @ diff) + lam * gprime
    return value, gprime, Pi


def bisect_multiplier(
    inner,
    upper: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
    check_zero: bool = True,
    refine: bool = True,
    slack: float = 0.0,
):
    """Shared bisection driver.

    ``inner(lam)`` returns ``(Pi, derivative)``; the derivative must be
    nonincreasing in ``lam`` and negative at ``upper``.  The returned plan is
    always the one at the final upper end of the bracket (or at zero when the
    budget is inactive), so it never exceeds the budget.

    With ``refine`` a few extra evaluations are made at secant roots of the
    final bracket.  A piecewise-linear derivative that is linear on the
    bracket is solved exactly this way; a secant point replaces the upper
    end only if the derivative there is at most ``slack`` (a budget overshoot
    of that size is accepted).  The reported iteration count covers the
    bisection steps alone.
    """
    d_lo = None
    if check_zero:
        Pi0, d0 = inner(0.0)
        if d0 <= 0:
            return Pi0, DualBracket(0.0, 0.0, 0.0, d0, 0)
        d_lo = d0
    lower, it = 0.0, 0
    Pi_up, d_up = None, None
    lam, d = upper, -np.inf
    while upper - lower > tol and it < max_iter:
        it += 1
        lam = 0.5 * (lower + upper)
        Pi, d = inner(lam)
        if d > 0:
            lower, d_lo = lam, d
        else:
            upper, Pi_up, d_up = lam, Pi, d
        if abs(d) <= tol:
            break
    if Pi_up is None:
        Pi_up, d_up = inner(upper)
    for _ in range(REFINE_STEPS if refine else 0):
        if d_lo is None or not d_lo > 0 > d_up or not upper > lower:
            break
        guess = lower + (upper - lower) * d_lo / (d_lo - d_up)
        if not lower < guess < upper:
            break
        Pi_r, d_r = inner(guess)
        lam, d = guess, d_r
        if d_r <= slack:
            upper, Pi_up, d_up = guess, Pi_r, d_r
            break
        lower, d_lo = guess, d_r
    if d_up > slack:
        # only reachable through round-off at a bound that should be exact
        log.warning("derivative %.3e positive at the bracket upper end", d_up)
    return Pi_up, DualBracket(lower, upper, lam, d, it)


def project_ball(G, ball: BallSpec, tol: float = DEFAULT_TOL, max_iter: int = 200) -> Coupling:
    """Euclidean projection of ``G`` onto the coupling set of ``ball``.

    Bisection stops once the bracket is narrower than ``tol`` or the
    derivative is within ``tol`` of zero; the plan is recovered at the upper
    end of the bracket.  ``result.bracket`` records the final dual state.
    """
    cost = ball.cost
    G = as_block(G, cost)
    if not np.all(np.isfinite(G)):
        raise InvalidInputError("matrix to project contains NaN or inf")
    x, delta = ball.x, ball.radius
    upper = dual_upper_bound(G, x, cost)
    # a secant root can land within round-off of lambda*, on either side
    Pi, bracket = bisect_multiplier(lambda lam: _inner(lam, G, x, cost, delta), upper, tol, max_iter,
                                    slack=BUDGET_SLACK * delta)
    return Coupling(cost, Pi, bracket)
