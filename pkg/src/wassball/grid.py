"""Pixel grids and local-transport cost structures.

A :class:`LocalCost` stores the transport cost restricted to a ``k x k``
neighbourhood of every pixel as a dense ``(n, k*k)`` block.  Row ``i`` lists
the target pixels reachable from pixel ``i``; slots that fall outside the
image are padded (``mask`` is False there, the neighbour index points back at
``i`` and the cost is 0) so that every solver can work on rectangular arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidParameterError, SizeError

DENSE_CAP = 4096

CostFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def euclidean(di: np.ndarray, dj: np.ndarray) -> np.ndarray:
    return np.sqrt(di.astype(float) ** 2 + dj.astype(float) ** 2)


@dataclass(frozen=True)
class GridShape:
    width: int
    height: int
    channels: int = 1

    def __post_init__(self):
        for name in ("width", "height", "channels"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {value!r}")

    @property
    def n(self) -> int:
        return self.width * self.height * self.channels

    @property
    def array_shape(self) -> tuple[int, int, int]:
        """Shape of an image on this grid, ``(channels, height, width)``."""
        return (self.channels, self.height, self.width)

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height, "channels": self.channels}


@dataclass(frozen=True, eq=False)
class LocalCost:
    shape: GridShape
    k: int
    neighbors: np.ndarray  # (n, k*k) int64
    costs: np.ndarray  # (n, k*k) float64
    mask: np.ndarray  # (n, k*k) bool
    min_offdiag: float
    self_slot: int = field(default=0)

    @property
    def n(self) -> int:
        return self.shape.n

    @property
    def width(self) -> int:
        """Number of slots per row (``k*k``)."""
        return self.neighbors.shape[1]

    @property
    def frobenius_sq(self) -> float:
        return float(np.sum(self.costs**2))

    def row_cost_sums(self) -> np.ndarray:
        """``C 1`` over stored entries."""
        return self.costs.sum(axis=1)

    def column_sums(self, block: np.ndarray) -> np.ndarray:
        """``Pi^T 1`` for a block aligned with this cost (padding must be zero)."""
        return np.bincount(self.neighbors.ravel(), weights=block.ravel(), minlength=self.n)

    def gather(self, values: np.ndarray) -> np.ndarray:
        """Broadcast a per-pixel vector onto the block: entry (i, s) gets ``values[neighbors[i, s]]``."""
        return np.where(self.mask, values[self.neighbors], 0.0)

    def identity_block(self, x: np.ndarray) -> np.ndarray:
        """The plan that leaves every pixel's mass in place."""
        block = np.zeros(self.neighbors.shape)
        block[:, self.self_slot] = x
        return block


def build_cost(shape: GridShape, k: int, metric: CostFunction = euclidean) -> LocalCost:
    """Build a local cost on ``shape`` with ``k x k`` neighbourhoods.

    ``metric`` receives integer row and column offsets and must return a
    nonnegative cost that vanishes only at the zero offset.
    """
    if int(k) != k or k < 1 or k % 2 == 0:
        raise InvalidParameterError(f"neighbourhood size k must be a positive odd integer, got {k!r}")
    k = int(k)
    if k > 2 * max(shape.width, shape.height) - 1:
        raise InvalidParameterError(
            f"k={k} exceeds 2*max(width, height)-1 = {2 * max(shape.width, shape.height) - 1}"
        )
    r = k // 2
    offsets = np.arange(-r, r + 1)
    di, dj = (a.ravel() for a in np.meshgrid(offsets, offsets, indexing="ij"))
    slot_cost = np.asarray(metric(di, dj), dtype=float)
    self_slot = int(np.flatnonzero((di == 0) & (dj == 0))[0])
    off = np.ones(k * k, dtype=bool)
    off[self_slot] = False
    if slot_cost[self_slot] != 0 or np.any(slot_cost[off] <= 0) or np.any(~np.isfinite(slot_cost)):
        raise InvalidParameterError("metric must be finite, zero at the origin and positive elsewhere")

    c, h, w = shape.array_shape
    ch, row, col = (a.ravel() for a in np.meshgrid(np.arange(c), np.arange(h), np.arange(w), indexing="ij"))
    src = np.arange(shape.n)
    trow = row[:, None] + di[None, :]
    tcol = col[:, None] + dj[None, :]
    mask = (trow >= 0) & (trow < h) & (tcol >= 0) & (tcol < w)
    target = (ch[:, None] * h + trow) * w + tcol
    neighbors = np.where(mask, target, src[:, None]).astype(np.int64)
    costs = np.where(mask, slot_cost[None, :], 0.0)

    present = costs[mask & off[None, :]]
    min_offdiag = float(present.min()) if present.size else math.inf
    return LocalCost(shape, k, neighbors, costs, mask, min_offdiag, self_slot)


def build_euclidean_cost(shape: GridShape, k: int) -> LocalCost:
    """Local cost with the Euclidean distance between pixel indices."""
    return build_cost(shape, k, euclidean)


def dense_cost(local: LocalCost, cap: int = DENSE_CAP) -> np.ndarray:
    """Expand to a full ``n x n`` table; forbidden pairs are ``+inf``."""
    n = local.n
    if n > cap:
        raise SizeError(f"dense cost requested for n={n} pixels, cap is {cap}")
    table = np.full((n, n), np.inf)
    rows = np.broadcast_to(np.arange(n)[:, None], local.neighbors.shape)
    table[rows[local.mask], local.neighbors[local.mask]] = local.costs[local.mask]
    return table


def cost_from_dense(table: np.ndarray) -> LocalCost:
    """Wrap an arbitrary dense cost (``inf`` = forbidden) as a :class:`LocalCost`.

    Used for small hand-made instances whose costs do not come from a grid;
    the result has a ``1 x n`` shape and rows padded to the widest row.
    """
    table = np.asarray(table, dtype=float)
    n = table.shape[0]
    if table.shape != (n, n):
        raise InvalidParameterError("dense cost must be square")
    if np.any(np.diag(table) != 0):
        raise InvalidParameterError("dense cost must have a zero diagonal")
    allowed = np.isfinite(table)
    off = allowed & ~np.eye(n, dtype=bool)
    if np.any(table[off] <= 0):
        raise InvalidParameterError("off-diagonal costs must be positive")
    width = int(allowed.sum(axis=1).max())
    neighbors = np.tile(np.arange(n)[:, None], (1, width))
    costs = np.zeros((n, width))
    mask = np.zeros((n, width), dtype=bool)
    for i in range(n):
        # self first so that slot 0 is always the identity slot
        targets = [i] + [j for j in np.flatnonzero(allowed[i]) if j != i]
        neighbors[i, : len(targets)] = targets
        costs[i, : len(targets)] = table[i, targets]
        mask[i, : len(targets)] = True
    present = table[off]
    min_offdiag = float(present.min()) if present.size else math.inf
    return LocalCost(GridShape(n, 1, 1), 2 * n - 1, neighbors, costs, mask, min_offdiag, 0)
