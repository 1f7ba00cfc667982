"""Euclidean projection onto scaled simplices, one row at a time.

Sort-and-threshold construction: for a row ``v`` with target mass ``z`` the
projection is ``max(v - theta, 0)`` where ``theta`` is found from the sorted
prefix sums of ``v``.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, InvalidMassError, ShapeError


def _project_masked(values: np.ndarray, mass: np.ndarray, mask: np.ndarray) -> np.ndarray:
    # no validation: called inside bisection loops
    n, m = values.shape
    v = np.where(mask, values, -np.inf)
    u = -np.sort(-v, axis=1)
    live = np.isfinite(u)
    css = np.cumsum(np.where(live, u, 0.0), axis=1) - mass[:, None]
    ind = np.arange(1, m + 1)
    cond = live & (u - css / ind > 0)
    rho = cond.sum(axis=1)
    positive = mass > 0
    rho_safe = np.maximum(rho, 1)
    theta = css[np.arange(n), rho_safe - 1] / rho_safe
    w = np.where(mask, np.maximum(v - theta[:, None], 0.0), 0.0)
    w[~positive] = 0.0
    support = w > 0
    count = support.sum(axis=1)
    drift = np.where(count > 0, (mass - w.sum(axis=1)) / np.maximum(count, 1), 0.0)
    w += support * drift[:, None]
    return w


def project_simplex(v, z: float = 1.0) -> np.ndarray:
    """Project ``v`` onto ``{w >= 0, sum(w) = z}``.

    >>> project_simplex([1.0, 0.0], 2.0)
    array([1.5, 0.5])
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError("project_simplex expects a non-empty 1-d vector")
    if not np.isfinite(z) or z < 0:
        raise InvalidMassError(f"simplex mass must be nonnegative, got {z!r}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vector to project contains NaN or inf")
    return _project_masked(v[None, :], np.array([float(z)]), np.ones((1, v.size), dtype=bool))[0]


def project_rows(values, x, mask=None) -> np.ndarray:
    """Project every row of ``values`` onto the simplex of mass ``x[i]``.

    ``mask`` marks which slots of each row exist; masked-out slots are
    returned as zero and play no part in the projection.
    """
    values = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    if values.ndim != 2 or x.shape != (values.shape[0],):
        raise ShapeError(f"row block {values.shape} does not match mass vector {x.shape}")
    if mask is None:
        mask = np.ones(values.shape, dtype=bool)
    elif mask.shape != values.shape:
        raise ShapeError("mask shape differs from row block shape")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise InvalidMassError("row masses must be finite and nonnegative")
    if not np.all(np.isfinite(values[mask])):
        raise InvalidInputError("row block contains NaN or inf")
    return _project_masked(values, x, mask)


def threshold_certificate(v, w, z: float, atol: float = 1e-10) -> bool:
    """Check that ``w = max(v - theta, 0)`` for a single ``theta`` with ``sum(w) = z``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if abs(w.sum() - z) > atol * max(1.0, z) or np.any(w < -atol):
        return False
    support = w > atol
    if not support.any():
        return z <= atol
    theta = np.mean(v[support] - w[support])
    return bool(np.allclose(w, np.maximum(v - theta, 0.0), atol=atol * 10, rtol=0))
