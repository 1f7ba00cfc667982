import numpy as np
import pytest
from conftest import random_instance

from wassball.coupling import Coupling
from wassball.dykstra import (
    DykstraState,
    cyclic_dykstra,
    dykstra_project,
    dykstra_step,
    project_capacity,
    project_halfspace,
)
from wassball.errors import DegenerateError, InvalidParameterError
from wassball.grid import GridShape, LocalCost
from wassball.simplex import _project_masked


def test_halfspace_interior_unchanged(rng):
    G, ball = random_instance(rng)
    big = Coupling(ball.cost, G).inner(ball.cost.costs) + 1.0
    np.testing.assert_array_equal(project_halfspace(G, ball.cost, big), G * ball.cost.mask)


def test_halfspace_lands_on_boundary(rng):
    G, ball = random_instance(rng)
    cost = ball.cost
    delta = float(np.sum(G * cost.costs)) - cost.frobenius_sq
    out = project_halfspace(G, cost, delta)
    assert np.sum(out * cost.costs) == pytest.approx(delta, abs=1e-10)
    step = (G - out)[cost.mask]
    np.testing.assert_allclose(step, cost.costs[cost.mask])


def test_halfspace_direction_parallel_to_cost(rng):
    G, ball = random_instance(rng)
    cost = ball.cost
    out = project_halfspace(G, cost, 0.01)
    d = (G - out)[cost.mask]
    c = cost.costs[cost.mask]
    assert abs(d @ c) == pytest.approx(np.linalg.norm(d) * np.linalg.norm(c), rel=1e-12)


def test_halfspace_degenerate():
    cost = LocalCost(GridShape(2, 1), 1, np.array([[0], [1]]), np.zeros((2, 1)), np.ones((2, 1), bool), 0.0)
    with pytest.raises(DegenerateError):
        project_halfspace(np.ones((2, 1)), cost, 0.0)


def test_feasible_input_converges_at_once(rng):
    _, ball = random_instance(rng)
    G = ball.cost.identity_block(ball.x)
    out, log = dykstra_project(G, ball, max_iter=50, tol=1e-12)
    assert len(log) == 1
    np.testing.assert_allclose(out.block, G)


def test_increment_identities(rng):
    G, ball = random_instance(rng)
    cost = ball.cost
    zeros = np.zeros_like(G)
    state = DykstraState(G.copy(), G.copy(), zeros, zeros.copy())
    proj_s = lambda P: _project_masked(P, ball.x, cost.mask)  # noqa: E731
    proj_h = lambda P: project_halfspace(P, cost, ball.radius)  # noqa: E731
    for _ in range(5):
        Ph, Is, Ih = state.Pi_h.copy(), state.I_s.copy(), state.I_h.copy()
        dykstra_step(state, proj_s, proj_h)
        np.testing.assert_allclose(state.I_s, state.Pi_s - (Ph - Is), atol=1e-15)
        np.testing.assert_allclose(state.I_h, state.Pi_h - (state.Pi_s - Ih), atol=1e-15)


def test_residuals_decrease(rng):
    G, ball = random_instance(rng, side=10)
    _, log = dykstra_project(G, ball, max_iter=1000)
    res = np.array(log)[:, 1:]
    windows = res.reshape(10, 100, 2).mean(axis=1)
    assert np.all(np.diff(windows[:, 0]) <= 0)
    assert np.all(np.diff(windows[:, 1]) <= 0)
    assert res[-1].max() < 0.05 * res[0].max()


def test_max_iter_validation(rng):
    G, ball = random_instance(rng)
    with pytest.raises(InvalidParameterError):
        dykstra_project(G, ball, max_iter=0)


def test_capacity_projection_closed_form(rng):
    G, ball = random_instance(rng)
    cost = ball.cost
    caps = np.full(cost.n, 0.4)
    out = project_capacity(G, cost, caps)
    assert np.all(cost.column_sums(out) <= caps + 1e-12)
    unchanged = cost.column_sums(G) <= caps
    np.testing.assert_allclose(cost.column_sums(out)[unchanged], cost.column_sums(G)[unchanged])


def test_cyclic_two_sets_matches_dykstra(rng):
    G, ball = random_instance(rng)
    cost = ball.cost
    ref, _ = dykstra_project(G, ball, max_iter=3000, record=False)
    out, _ = cyclic_dykstra(G, [lambda P: _project_masked(P, ball.x, cost.mask),
                                lambda P: project_halfspace(P, cost, ball.radius)], max_iter=3000)
    np.testing.assert_allclose(out, ref.block, atol=1e-12)
