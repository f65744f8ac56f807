import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gdlab.projection import FeasibleSet, project_simplex, project_simplex_tangent

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def tangent_oracle(x, v, tol=1e-10):
    """Enumerate which active coordinates are pinned at zero; keep the best feasible solution."""
    active = np.flatnonzero(x <= tol)
    best, best_d = None, np.inf
    for r in range(len(active) + 1):
        for pinned in itertools.combinations(active, r):
            z = np.zeros_like(v)
            free = np.setdiff1d(np.arange(v.size), pinned)
            if free.size == 0:
                continue
            z[free] = v[free] - v[free].mean()
            if np.all(z[active] >= -1e-12):
                d = np.linalg.norm(z - v)
                if d < best_d - 1e-15:
                    best, best_d = z, d
    return best


def test_simplex_examples():
    assert np.allclose(project_simplex([2.0, 0.0]), [1.0, 0.0])
    assert np.allclose(project_simplex([0.6, 0.6]), [0.5, 0.5])
    x = np.array([0.2, 0.3, 0.5])
    assert np.array_equal(project_simplex(x), x)


@given(arrays(float, st.integers(1, 7), elements=finite))
def test_simplex_matches_batched_path(v):
    single = project_simplex(v)
    batched = project_simplex(np.stack([v, v]))
    assert np.allclose(single, batched[0], atol=1e-14)
    assert abs(single.sum() - 1) < 1e-12 and single.min() >= 0


@given(arrays(float, st.integers(1, 6), elements=finite))
def test_simplex_variational_characterization(v):
    p = project_simplex(v)
    for z in np.eye(v.size):
        assert np.dot(v - p, z - p) <= 1e-10


def test_simplex_ties_are_deterministic():
    v = np.array([0.5, 0.5, 0.5, -1.0])
    assert np.allclose(project_simplex(v), [1 / 3, 1 / 3, 1 / 3, 0])


def test_nonexpansive_and_idempotent_random_pairs():
    rng = np.random.default_rng(0)
    sets = [FeasibleSet.simplex_product((2, 3)), FeasibleSet.box([-1, 0, 2], [1, 0.5, 3])]
    for fs in sets:
        Y = rng.normal(scale=3, size=(10_000, fs.dim))
        Z = rng.normal(scale=3, size=(10_000, fs.dim))
        PY, PZ = fs.project(Y), fs.project(Z)
        lhs = np.linalg.norm(PY - PZ, axis=1)
        assert np.all(lhs <= np.linalg.norm(Y - Z, axis=1) + 1e-10)
        assert np.max(np.abs(fs.project(PY) - PY)) <= 1e-12


def test_tangent_cone_examples():
    fs = FeasibleSet.simplex_product((2,))
    assert np.allclose(fs.project_tangent_cone([1.0, 0.0], [1.0, -1.0]), [0.0, 0.0])
    assert np.allclose(fs.project_tangent_cone([1.0, 0.0], [-1.0, 1.0]), [-1.0, 1.0])
    interior = FeasibleSet.simplex_product((3,))
    v = np.array([0.3, -0.1, 0.4])
    assert np.allclose(interior.project_tangent_cone([0.2, 0.3, 0.5], v), v - v.mean())
    box = FeasibleSet.box([0, 0], [1, 1])
    assert np.array_equal(box.project_tangent_cone([0.5, 0.5], [3.0, -2.0]), [3.0, -2.0])
    assert np.array_equal(box.project_tangent_cone([0.0, 1.0], [-3.0, 2.0]), [0.0, 0.0])


@st.composite
def simplex_point_with_zeros(draw):
    d = draw(st.integers(2, 6))
    raw = np.array(draw(st.lists(st.floats(0, 1), min_size=d, max_size=d)))
    mask = np.array(draw(st.lists(st.booleans(), min_size=d, max_size=d)))
    if mask.all():
        mask[draw(st.integers(0, d - 1))] = False
    raw = np.where(mask, 0.0, raw + 0.05)
    x = raw / raw.sum()
    v = np.array(draw(st.lists(finite, min_size=d, max_size=d)))
    return x, v


@given(simplex_point_with_zeros())
def test_tangent_cone_matches_enumeration(case):
    x, v = case
    z = project_simplex_tangent(x, v)
    assert np.allclose(z, tangent_oracle(x, v), atol=1e-9)


@given(simplex_point_with_zeros())
def test_tangent_cone_moreau_and_feasibility(case):
    x, v = case
    fs = FeasibleSet.simplex_product((x.size,))
    z = fs.project_tangent_cone(x, v)
    assert abs(np.dot(v - z, z)) <= 1e-10 * max(1.0, np.dot(v, v))
    assert fs.contains(x + 1e-8 * z, tol=1e-12)


def test_tangent_cone_product_is_blockwise():
    fs = FeasibleSet.simplex_product((2, 3))
    x = np.array([1.0, 0.0, 0.0, 0.5, 0.5])
    v = np.array([1.0, -1.0, 2.0, -1.0, 0.0])
    z = fs.project_tangent_cone(x, v)
    assert np.allclose(z[:2], 0.0)
    assert np.allclose(z[2:], tangent_oracle(x[2:], v[2:]))


def test_tangent_cone_rejects_infeasible_base():
    with pytest.raises(ValueError):
        FeasibleSet.simplex_product((2,)).project_tangent_cone([0.7, 0.7], [1.0, 0.0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        FeasibleSet.simplex_product((2, 2)).project(np.zeros(3))


def test_active_constraints_and_basis():
    fs = FeasibleSet.simplex_product((3, 2))
    assert fs.active_constraints([0.5, 0.5, 0.0, 1.0, 0.0]) == [(2, "lower"), (4, "lower")]
    B = fs.tangent_basis()
    assert B.shape == (5, 3)
    assert np.allclose(B.T @ B, np.eye(3))
    assert np.allclose(B[:3].sum(axis=0), 0) and np.allclose(B[3:].sum(axis=0), 0)
