import numpy as np
import pytest

from wassball.coupling import BallSpec
from wassball.grid import GridShape, build_euclidean_cost, cost_from_dense


def dense_to_block(M, cost):
    """Read a dense n x n matrix into the block layout of ``cost``."""
    return np.where(cost.mask, np.take_along_axis(np.asarray(M, dtype=float), cost.neighbors, axis=1), 0.0)


def random_instance(rng, side=6, k=5, noise=0.3, eps=None):
    """A random projection problem: perturbed identity plan and a ball around a random image."""
    cost = build_euclidean_cost(GridShape(side, side), k)
    x = rng.uniform(0.1, 1.0, cost.n)
    G = cost.identity_block(x) + noise * rng.standard_normal(cost.costs.shape) * cost.mask
    eps = rng.uniform(0.05, 0.5) if eps is None else eps
    return G, BallSpec(x, eps, cost)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_pixel_lmo():
    """Two-pixel LMO instance with a known dual maximiser at 2 and LP optimum 0."""
    cost = cost_from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    x = np.array([1.0, 0.0])
    H = dense_to_block([[1.0, -1.0], [0.0, 0.0]], cost)
    return H, BallSpec(x, 0.5, cost)
