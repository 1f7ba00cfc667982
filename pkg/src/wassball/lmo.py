"""Linear minimisation over the coupling set ``{Pi >= 0, Pi 1 = x, <Pi, C> <= delta}``.

Two dual routes share the budget multiplier ``lam``:

* the exact dual ``-lam delta + sum_i x_i min_j (H_ij + lam C_ij)``, piecewise
  linear.  Only its value and maximiser are exposed; a primal plan read off a
  maximiser is not unique and can be infeasible, so none is returned.
* the entropic dual, where ``min`` becomes a row softmin at temperature
  ``gamma``.  Its Lagrangian minimiser is unique (row-wise softmin weights
  scaled by ``x``), so the plan is recovered in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import BallSpec, Coupling, as_block
from .dualproj import BUDGET_SLACK, DEFAULT_TOL, bisect_multiplier
from .errors import DegenerateError, InvalidInputError, InvalidParameterError
from .grid import LocalCost

DEFAULT_GAMMA = 1e-3


@dataclass(frozen=True)
class LmoConfig:
    gamma: float = DEFAULT_GAMMA
    tol: float = DEFAULT_TOL
    mode: str = "entropic"

    def __post_init__(self):
        if self.mode not in ("entropic", "exact-dual"):
            raise InvalidParameterError(f"unknown LMO mode {self.mode!r}")
        if self.mode == "entropic" and not self.gamma > 0:
            raise InvalidParameterError("gamma must be positive in entropic mode")
        if not self.tol > 0:
            raise InvalidParameterError("tol must be positive")


def _row_min(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, values, np.inf).min(axis=1)


def exact_dual_value(lam: float, H, x, cost: LocalCost, delta: float) -> float:
    H = as_block(H, cost)
    x = np.asarray(x, dtype=float)
    live = x > 0
    mins = _row_min(H[live] + lam * cost.costs[live], cost.mask[live])
    return float(-lam * delta + x[live] @ mins)


def _exact_slopes(lam: float, H: np.ndarray, x: np.ndarray, cost: LocalCost, delta: float):
    """Right and left derivatives of the exact dual at ``lam``."""
    live = x > 0
    vals = np.where(cost.mask[live], H[live] + lam * cost.costs[live], np.inf)
    mins = vals.min(axis=1, keepdims=True)
    active = vals == mins
    c = cost.costs[live]
    right = np.where(active, c, np.inf).min(axis=1)
    left = np.where(active, c, -np.inf).max(axis=1)
    xl = x[live]
    return -delta + xl @ right, -delta + xl @ left


def exact_dual_bound(H, cost: LocalCost) -> float:
    """``2 |H|_inf / min_offdiag``."""
    if not cost.min_offdiag > 0:
        raise DegenerateError("cost has no positive off-diagonal entry")
    if not np.isfinite(cost.min_offdiag):
        return 0.0
    H = as_block(H, cost)
    return 2.0 * float(np.max(np.abs(H[cost.mask]))) / cost.min_offdiag


def exact_dual_solve(H, x, cost: LocalCost, delta: float, tol: float = DEFAULT_TOL) -> float:
    """Maximise the exact (piecewise-linear) dual by bisection on supergradients.

    After the bracket closes, the two linear pieces active at its ends are
    intersected; when the intersection lies inside the bracket it is the
    breakpoint that carries the maximum, which removes the ``O(tol)`` error
    of a plain midpoint.
    """
    H = as_block(H, cost)
    x = np.asarray(x, dtype=float)
    lo, hi = 0.0, exact_dual_bound(H, cost)
    r0, _ = _exact_slopes(0.0, H, x, cost, delta)
    if r0 <= 0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        right, left = _exact_slopes(mid, H, x, cost, delta)
        if right > 0:
            lo = mid
        elif left < 0:
            hi = mid
        else:
            return mid
    g = lambda lam: exact_dual_value(lam, H, x, cost, delta)  # noqa: E731
    s_lo, _ = _exact_slopes(lo, H, x, cost, delta)
    _, s_hi = _exact_slopes(hi, H, x, cost, delta)
    g_lo, g_hi = g(lo), g(hi)
    best = lo if g_lo >= g_hi else hi
    if s_lo > s_hi:
        cross = (g_hi - g_lo + s_lo * lo - s_hi * hi) / (s_lo - s_hi)
        if lo <= cross <= hi and g(cross) >= max(g_lo, g_hi):
            best = cross
    return float(best)


def entropic_dual_bound(H, ball: BallSpec, gamma: float) -> float:
    """``[2 |H|_inf + gamma log(x^T C 1 / delta)]_+ / min_offdiag``."""
    cost = ball.cost
    delta = ball.radius
    if not cost.min_offdiag > 0:
        raise DegenerateError("cost has no positive off-diagonal entry")
    xc1 = float(ball.x @ cost.row_cost_sums())
    if not delta > 0 or not xc1 > 0:
        raise DegenerateError(f"entropic bound undefined for delta={delta!r}, x^T C 1={xc1!r}")
    H = as_block(H, cost)
    top = 2.0 * float(np.max(np.abs(H[cost.mask]))) + gamma * np.log(xc1 / delta)
    return max(top, 0.0) / cost.min_offdiag


_CUTOFF = -50.0


def _softmin_plan(lam, H, x, costs, mask, gamma: float):
    """Plan ``x_i softmin_j((H_ij + lam C_ij) / gamma)`` and the row log-partition terms.

    ``mask`` may also be given as an additive offset (0 allowed, -inf forbidden).
    """
    offset = mask if mask.dtype != bool else np.where(mask, 0.0, -np.inf)
    scores = (H + lam * costs) * (-1.0 / gamma) + offset
    top = scores.max(axis=1, keepdims=True)
    shifted = scores - top
    # terms below exp(-50) vanish against the row maximum; skipping them avoids slow underflow
    weights = np.exp(np.maximum(shifted, _CUTOFF))
    weights[shifted < _CUTOFF] = 0.0
    total = weights.sum(axis=1, keepdims=True)
    Pi = x[:, None] * (weights / total)
    return Pi, top[:, 0] + np.log(total[:, 0])


def entropic_dual_value(lam: float, H, ball: BallSpec, gamma: float) -> float:
    cost = ball.cost
    H = as_block(H, cost)
    x = ball.x
    live = x > 0
    _, logz = _softmin_plan(lam, H[live], x[live], cost.costs[live], cost.mask[live], gamma)
    xl = x[live]
    return float(-lam * ball.radius + gamma * (xl @ np.log(xl)) - gamma * (xl @ logz))


def entropic_plan(lam: float, H, ball: BallSpec, gamma: float) -> np.ndarray:
    """Closed-form Lagrangian minimiser at multiplier ``lam`` (zero rows where ``x_i = 0``)."""
    cost = ball.cost
    H = as_block(H, cost)
    x = ball.x
    live = x > 0
    Pi = np.zeros(H.shape)
    Pi[live], _ = _softmin_plan(lam, H[live], x[live], cost.costs[live], cost.mask[live], gamma)
    return Pi


def entropic_lmo(H, ball: BallSpec, config: LmoConfig = LmoConfig(), max_iter: int = 200):
    """Entropic linear minimisation oracle.

    Returns ``(plan, lam)`` where ``plan.bracket`` holds the bisection state.
    The plan satisfies ``Pi 1 = x`` and is recovered at the upper end of the
    bracket, so its transport cost stays within the budget.
    """
    cost = ball.cost
    H = as_block(H, cost)
    if not np.all(np.isfinite(H)):
        raise InvalidInputError("linear objective contains NaN or inf")
    gamma = config.gamma
    x, delta = ball.x, ball.radius
    live = x > 0
    everywhere = bool(live.all())
    Hl, xl, cl = (H, x, cost.costs) if everywhere else (H[live], x[live], cost.costs[live])
    offset = np.where(cost.mask[live], 0.0, -np.inf)

    def inner(lam):
        Pl, _ = _softmin_plan(lam, Hl, xl, cl, offset, gamma)
        if everywhere:
            return Pl, float(np.sum(Pl * cl)) - delta
        Pi = np.zeros(H.shape)
        Pi[live] = Pl
        return Pi, float(np.sum(Pl * cl)) - delta

    upper = entropic_dual_bound(H, ball, gamma)
    Pi, bracket = bisect_multiplier(inner, upper, config.tol, max_iter, slack=BUDGET_SLACK * delta)
    return Coupling(cost, Pi, bracket), bracket.upper
