import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wassball.errors import InvalidInputError, InvalidMassError, ShapeError
from wassball.simplex import project_rows, project_simplex, threshold_certificate

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vectors = st.lists(finite, min_size=1, max_size=6).map(np.array)
masses = st.floats(0, 5, allow_nan=False)


def brute_force(v, z):
    """Try every support set; keep the feasible KKT point."""
    m = len(v)
    best = None
    for size in range(1, m + 1):
        for support in itertools.combinations(range(m), size):
            s = list(support)
            theta = (v[s].sum() - z) / size
            w = np.zeros(m)
            w[s] = v[s] - theta
            if np.any(w[s] < 0):
                continue
            outside = [j for j in range(m) if j not in support]
            if outside and np.max(v[outside]) > theta + 1e-12:
                continue
            dist = np.sum((w - v) ** 2)
            if best is None or dist < best[0]:
                best = (dist, w)
    return best[1]


def test_examples():
    np.testing.assert_allclose(project_simplex([0.5, 0.5], 1.0), [0.5, 0.5])
    np.testing.assert_allclose(project_simplex([2.0, 0.0, 0.0], 1.0), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(project_simplex([1.0, 0.0], 2.0), [1.5, 0.5])


def test_zero_mass():
    np.testing.assert_array_equal(project_simplex([3.0, -1.0, 2.0], 0.0), [0.0, 0.0, 0.0])


def test_errors():
    with pytest.raises(InvalidMassError):
        project_simplex([1.0, 2.0], -1.0)
    with pytest.raises(InvalidInputError):
        project_simplex([1.0, np.nan], 1.0)
    with pytest.raises(ShapeError):
        project_simplex([], 1.0)
    with pytest.raises(ShapeError):
        project_rows(np.zeros((3, 2)), np.ones(2))


@settings(max_examples=300, deadline=None)
@given(vectors, masses)
def test_brute_force_equivalence(v, z):
    np.testing.assert_allclose(project_simplex(v, z), brute_force(v, z), atol=1e-10)


@settings(max_examples=300, deadline=None)
@given(vectors, masses)
def test_certificate_and_feasibility(v, z):
    w = project_simplex(v, z)
    assert np.all(w >= 0)
    assert abs(w.sum() - z) <= 1e-12 * max(1.0, z)
    assert threshold_certificate(v, w, z)


@settings(max_examples=200, deadline=None)
@given(vectors, masses)
def test_idempotent(v, z):
    w = project_simplex(v, z)
    np.testing.assert_allclose(project_simplex(w, z), w, atol=1e-12)


def test_dominant_entry_gives_vertex(rng):
    for _ in range(1000):
        m = rng.integers(1, 10)
        v = rng.normal(size=m)
        z = rng.uniform(0, 3)
        i = rng.integers(m)
        others = np.delete(v, i)
        v[i] = (others.max() if others.size else 0.0) + z + rng.uniform(0, 1)
        w = project_simplex(v, z)
        expected = np.zeros(m)
        expected[i] = z
        np.testing.assert_allclose(w, expected, atol=1e-12)


def test_rows_match_scalar_kernel(rng):
    values = rng.normal(size=(4, 7))
    x = rng.uniform(0, 2, 4)
    x[2] = 0.0
    out = project_rows(values, x)
    for i in range(4):
        np.testing.assert_allclose(out[i], project_simplex(values[i], x[i]), atol=1e-14)
    assert np.all(out[2] == 0)


def test_single_slot_row(rng):
    mask = np.zeros((3, 4), dtype=bool)
    mask[:, 0] = True
    x = np.array([0.3, 1.2, 0.0])
    out = project_rows(rng.normal(size=(3, 4)) * 10, x, mask)
    np.testing.assert_allclose(out[:, 0], x)
    assert np.all(out[:, 1:] == 0)


def test_masked_slots_ignored(rng):
    values = rng.normal(size=(5, 6))
    mask = rng.random((5, 6)) < 0.6
    mask[:, 0] = True
    x = rng.uniform(0.1, 2, 5)
    out = project_rows(values, x, mask)
    assert np.all(out[~mask] == 0)
    for i in range(5):
        np.testing.assert_allclose(out[i, mask[i]], project_simplex(values[i, mask[i]], x[i]), atol=1e-14)
