"""Transport plans in the row-sparse ``n x k^2`` layout, and Wasserstein balls."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, ShapeError
from .grid import LocalCost


@dataclass(frozen=True, eq=False)
class BallSpec:
    """Ball of transport budget ``delta = epsilon * sum(center)`` around ``center``."""

    center: np.ndarray
    epsilon: float
    cost: LocalCost

    def __post_init__(self):
        x = np.asarray(self.center, dtype=float).ravel()
        if x.shape != (self.cost.n,):
            raise ShapeError(f"center has {x.size} pixels, cost grid has {self.cost.n}")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise InvalidInputError("ball center must be finite and nonnegative")
        if x.sum() <= 0:
            raise InvalidInputError("ball center must carry positive mass")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise InvalidParameterError(f"epsilon must be nonnegative, got {self.epsilon!r}")
        object.__setattr__(self, "center", x)

    @classmethod
    def with_radius(cls, center, delta: float, cost: LocalCost) -> "BallSpec":
        center = np.asarray(center, dtype=float).ravel()
        return cls(center, float(delta) / float(center.sum()), cost)

    @property
    def x(self) -> np.ndarray:
        return self.center

    @property
    def radius(self) -> float:
        return float(self.epsilon * self.center.sum())

    delta = radius


@dataclass
class DualBracket:
    """Final state of a one-dimensional dual bisection."""

    lower: float
    upper: float
    lam: float
    derivative: float
    iterations: int

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lambda": self.lam,
            "derivative": self.derivative,
            "iterations": self.iterations,
        }


@dataclass(eq=False)
class Coupling:
    """A plan ``Pi`` stored as ``block[i, s] = Pi[i, cost.neighbors[i, s]]``."""

    cost: LocalCost
    block: np.ndarray
    bracket: DualBracket | None = field(default=None, repr=False)

    def __post_init__(self):
        self.block = np.asarray(self.block, dtype=float)
        if self.block.shape != self.cost.neighbors.shape:
            raise ShapeError(f"block shape {self.block.shape} != layout {self.cost.neighbors.shape}")
        self.block = np.where(self.cost.mask, self.block, 0.0)
        self.row_mass = self.block.sum(axis=1)
        self.transport_cost = float(np.sum(self.block * self.cost.costs))

    @classmethod
    def identity(cls, cost: LocalCost, x) -> "Coupling":
        return cls(cost, cost.identity_block(np.asarray(x, dtype=float).ravel()))

    @property
    def target(self) -> np.ndarray:
        """The transported image ``Pi^T 1``."""
        return self.cost.column_sums(self.block)

    def inner(self, other) -> float:
        other = other.block if isinstance(other, Coupling) else other
        return float(np.sum(self.block * other))

    def to_dense(self) -> np.ndarray:
        n = self.cost.n
        dense = np.zeros((n, n))
        rows = np.broadcast_to(np.arange(n)[:, None], self.block.shape)
        np.add.at(dense, (rows[self.cost.mask], self.cost.neighbors[self.cost.mask]), self.block[self.cost.mask])
        return dense

    def check(self, x, delta: float, *, nonneg_tol=1e-12, mass_rtol=1e-9, budget_tol=1e-4) -> list[str]:
        """Return a list of violated invariants (empty when feasible)."""
        x = np.asarray(x, dtype=float).ravel()
        problems = []
        if self.block.min() < -nonneg_tol:
            problems.append(f"negative entry {self.block.min():.3e}")
        mass_err = np.abs(self.row_mass - x).sum()
        if mass_err > mass_rtol * max(np.abs(x).sum(), 1e-300):
            problems.append(f"row mass error {mass_err:.3e}")
        if self.transport_cost > delta + budget_tol:
            problems.append(f"transport cost {self.transport_cost:.6g} exceeds budget {delta:.6g}")
        cached = np.sum(self.block * self.cost.costs)
        if abs(cached - self.transport_cost) > 1e-9 * max(1.0, abs(cached)):
            problems.append("stale transport cost cache")
        return problems


def as_block(G, cost: LocalCost) -> np.ndarray:
    """Accept a :class:`Coupling` or a raw block; zero the padding slots."""
    if isinstance(G, Coupling):
        return G.block
    G = np.asarray(G, dtype=float)
    if G.shape != cost.neighbors.shape:
        raise ShapeError(f"block shape {G.shape} != layout {cost.neighbors.shape}")
    return np.where(cost.mask, G, 0.0)
