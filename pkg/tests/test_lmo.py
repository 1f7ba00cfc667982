import numpy as np
import pytest

from wassball.coupling import BallSpec
from wassball.errors import DegenerateError, InvalidParameterError
from wassball.grid import GridShape, build_euclidean_cost
from wassball.lmo import (
    LmoConfig,
    entropic_dual_bound,
    entropic_dual_value,
    entropic_lmo,
    exact_dual_bound,
    exact_dual_solve,
    exact_dual_value,
)
from wassball.oracle import lmo_exact


def small_instance(rng, side=3, k=3):
    cost = build_euclidean_cost(GridShape(side, side), k)
    x = rng.uniform(0.1, 1.0, cost.n)
    H = rng.normal(size=cost.costs.shape) * cost.mask
    return H, BallSpec(x, rng.uniform(0.1, 0.6), cost)


def entropic_optimum(H, ball, gamma):
    Pi, _ = entropic_lmo(H, ball, LmoConfig(gamma=gamma, tol=1e-10))
    return Pi.inner(H)


def test_two_pixel_exact_dual(two_pixel_lmo):
    H, ball = two_pixel_lmo
    lam = exact_dual_solve(H, ball.x, ball.cost, ball.radius)
    assert lam == pytest.approx(2.0, abs=1e-4)
    assert exact_dual_value(lam, H, ball.x, ball.cost, ball.radius) == pytest.approx(0.0, abs=1e-12)


def test_two_pixel_entropic(two_pixel_lmo):
    H, ball = two_pixel_lmo
    Pi, lam = entropic_lmo(H, ball, LmoConfig(gamma=1e-3))
    assert Pi.inner(H) <= 5e-3
    assert Pi.transport_cost <= 0.5
    np.testing.assert_allclose(Pi.row_mass, ball.x)


def test_exact_dual_trivial_cases(rng):
    H, ball = small_instance(rng)
    mins = np.where(ball.cost.mask, H, np.inf).min(axis=1)
    assert exact_dual_value(0.0, H, ball.x, ball.cost, ball.radius) == pytest.approx(ball.x @ mins)
    zero = np.zeros_like(H)
    assert exact_dual_value(0.7, zero, ball.x, ball.cost, ball.radius) == pytest.approx(-0.7 * ball.radius)
    assert exact_dual_solve(zero, ball.x, ball.cost, ball.radius) == 0.0


def test_strong_duality(rng):
    for _ in range(10):
        H, ball = small_instance(rng)
        lam = exact_dual_solve(H, ball.x, ball.cost, ball.radius)
        dual = exact_dual_value(lam, H, ball.x, ball.cost, ball.radius)
        primal, _ = lmo_exact(H, ball)
        assert dual == pytest.approx(primal, abs=1e-6)


def test_entropic_zero_objective_uniform_rows(rng):
    cost = build_euclidean_cost(GridShape(4, 4), 3)
    x = rng.uniform(0.2, 1.0, cost.n)
    mean_cost = cost.row_cost_sums() / cost.mask.sum(axis=1)
    ball = BallSpec.with_radius(x, float(x @ mean_cost) * 1.01, cost)
    Pi, lam = entropic_lmo(np.zeros(cost.costs.shape), ball)
    assert lam == 0.0
    expected = np.where(cost.mask, (x / cost.mask.sum(axis=1))[:, None], 0.0)
    np.testing.assert_allclose(Pi.block, expected, atol=1e-15)


def test_entropic_feasibility(rng):
    for _ in range(10):
        H, ball = small_instance(rng, side=5, k=5)
        Pi, _ = entropic_lmo(H, ball)
        assert np.all(Pi.block[ball.cost.mask] >= 0)
        assert np.abs(Pi.row_mass - ball.x).sum() <= 1e-9 * ball.x.sum()
        assert Pi.transport_cost <= ball.radius + 1e-4


def test_entropic_bound_examples(rng):
    H, ball = small_instance(rng)
    assert entropic_dual_bound(H, ball, 1e-14) == pytest.approx(exact_dual_bound(H, ball.cost))
    huge = BallSpec.with_radius(ball.x, 1e12, ball.cost)
    assert entropic_dual_bound(np.zeros_like(H), huge, 1.0) == 0.0
    with pytest.raises(DegenerateError):
        entropic_dual_bound(H, BallSpec(ball.x, 0.0, ball.cost), 1e-3)


def test_normalized_bound_between_two_and_three(rng):
    cost = build_euclidean_cost(GridShape(8, 8), 5)
    x = rng.uniform(0, 1, cost.n)
    x /= x.sum()
    H = cost.gather(rng.normal(size=cost.n))
    H /= np.abs(H).max()
    bound = entropic_dual_bound(H, BallSpec(x, 0.1, cost), 1e-3)
    assert 2.0 <= bound <= 3.0


def test_smoothing_gap_shrinks(rng):
    for _ in range(5):
        H, ball = small_instance(rng)
        lp, _ = lmo_exact(H, ball)
        gaps = [entropic_optimum(H, ball, g) - lp for g in (1e-1, 1e-2, 1e-3)]
        assert min(gaps) >= -1e-9
        assert gaps[2] <= gaps[0] + 1e-12


def test_translation_invariance(rng):
    H, ball = small_instance(rng, side=4)
    Pi, _ = entropic_lmo(H, ball, LmoConfig(tol=1e-8))
    shift = ball.cost.mask * rng.normal(size=ball.cost.n)[:, None]
    lam = Pi.bracket.upper
    from wassball.lmo import entropic_plan

    np.testing.assert_allclose(entropic_plan(lam, H + shift, ball, 1e-3), entropic_plan(lam, H, ball, 1e-3),
                               atol=1e-13)


def test_entropic_derivative_monotone(rng):
    H, ball = small_instance(rng)
    from wassball.lmo import entropic_plan

    lams = np.linspace(0, entropic_dual_bound(H, ball, 1e-2), 40)
    slopes = [np.sum(entropic_plan(lam, H, ball, 1e-2) * ball.cost.costs) - ball.radius for lam in lams]
    assert np.all(np.diff(slopes) <= 1e-12)
    values = [entropic_dual_value(lam, H, ball, 1e-2) for lam in lams]
    # concave: second differences nonpositive
    assert np.all(np.diff(values, 2) <= 1e-10)


def test_zero_mass_rows_skipped(rng):
    H, ball = small_instance(rng)
    x = ball.x.copy()
    x[[1, 4]] = 0.0
    Pi, _ = entropic_lmo(H, BallSpec(x, 0.3, ball.cost))
    assert np.all(Pi.block[[1, 4]] == 0)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        LmoConfig(gamma=0.0)
    with pytest.raises(InvalidParameterError):
        LmoConfig(mode="newton")
    LmoConfig(gamma=0.0, mode="exact-dual")
