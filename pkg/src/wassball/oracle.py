"""Exact small-scale transport LPs, used to verify the iterative solvers.

Both problems are solved with the HiGHS simplex solver shipped with SciPy,
with one LP variable per allowed (source, target) pair.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .coupling import BallSpec, as_block
from .errors import ImbalanceError, InfeasibleError, SizeError, WassballError
from .grid import DENSE_CAP, LocalCost, dense_cost

_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _pairs(table: np.ndarray):
    rows, cols = np.nonzero(np.isfinite(table))
    return rows, cols, table[rows, cols]


def _solve(c, A_eq, b_eq, A_ub=None, b_ub=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs-ds", options=_OPTIONS)
    if res.status == 2:
        raise InfeasibleError("transport LP is infeasible")
    if res.status != 0:
        raise WassballError(f"LP solver failed: {res.message}")
    return res


def _dense(cost, cap):
    if isinstance(cost, LocalCost):
        return dense_cost(cost, cap)
    table = np.asarray(cost, dtype=float)
    if table.shape[0] > cap:
        raise SizeError(f"dense LP requested for n={table.shape[0]}, cap is {cap}")
    return table


def wasserstein_exact(x, z, cost, cap: int = DENSE_CAP, return_plan: bool = False):
    """Optimal transport cost between ``x`` and ``z`` (forbidden pairs excluded).

    ``cost`` is a :class:`LocalCost` or a dense table with ``inf`` marking
    forbidden pairs.
    """
    table = _dense(cost, cap)
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    n = table.shape[0]
    if x.shape != (n,) or z.shape != (n,):
        raise ValueError("mass vectors do not match the cost table")
    if np.any(x < 0) or np.any(z < 0):
        raise ValueError("masses must be nonnegative")
    if abs(x.sum() - z.sum()) > 1e-8 * max(x.sum(), 1e-300):
        raise ImbalanceError(f"source mass {x.sum():.12g} != target mass {z.sum():.12g}")
    rows, cols, c = _pairs(table)
    m = rows.size
    idx = np.arange(m)
    A = sparse.vstack([
        sparse.csr_matrix((np.ones(m), (rows, idx)), shape=(n, m)),
        sparse.csr_matrix((np.ones(m), (cols, idx)), shape=(n, m)),
    ]).tocsr()
    # rescale the target so both marginals agree exactly
    zz = z * (x.sum() / z.sum()) if z.sum() > 0 else z
    res = _solve(c, A, np.concatenate([x, zz]))
    if not return_plan:
        return float(res.fun)
    plan = np.zeros((n, n))
    plan[rows, cols] = res.x
    return float(res.fun), plan


def lmo_exact(H, ball: BallSpec, cap: int = DENSE_CAP):
    """Solve ``min <Pi, H>`` over ``{Pi >= 0, Pi 1 = x, <Pi, C> <= delta}`` exactly.

    ``H`` is a block aligned with ``ball.cost``.  Returns ``(value, dense plan)``.
    """
    cost = ball.cost
    if cost.n > cap:
        raise SizeError(f"dense LP requested for n={cost.n}, cap is {cap}")
    if ball.radius < 0:
        raise InfeasibleError("negative transport budget")
    H = as_block(H, cost)
    n = cost.n
    rows = np.broadcast_to(np.arange(n)[:, None], cost.mask.shape)[cost.mask]
    cols = cost.neighbors[cost.mask]
    h = H[cost.mask]
    cvals = cost.costs[cost.mask]
    m = rows.size
    A_eq = sparse.csr_matrix((np.ones(m), (rows, np.arange(m))), shape=(n, m))
    res = _solve(h, A_eq, ball.x, A_ub=cvals[None, :], b_ub=np.array([ball.radius]))
    plan = np.zeros((n, n))
    np.add.at(plan, (rows, cols), res.x)
    return float(res.fun), plan
