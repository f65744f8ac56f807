import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gdlab.catalog import load_builtin
from gdlab.equilibrium import (
    MONOTONE,
    NONE,
    STRONG,
    enumerate_pure_nash,
    fixed_point_residual,
    fixed_point_solve,
    interior_root_solve,
    monotonicity_report,
    strategic_complements,
    vi_gap,
)
from gdlab.games import BimatrixGame, FiniteGame, NumericalError, ParameterError, discretize


def test_pd_unique_strict(pd):
    eqs = enumerate_pure_nash(pd)
    assert [e.profile for e in eqs] == [(1, 1)]
    assert eqs[0].strict and eqs[0].vi_gap == 0.0


def test_bos_two_strict_in_lex_order(bos):
    eqs = enumerate_pure_nash(bos)
    assert [e.profile for e in eqs] == [(0, 0), (1, 1)]
    assert all(e.strict for e in eqs)


def test_mp_has_no_pure_equilibrium(mp):
    assert enumerate_pure_nash(mp) == []


def test_ties_make_equilibria_weak():
    g = BimatrixGame(np.zeros((2, 2)), np.zeros((2, 2)))
    eqs = enumerate_pure_nash(g)
    assert len(eqs) == 4 and not any(e.strict for e in eqs)


def test_three_player_enumeration():
    # coordination: everyone gets 1 when all actions agree
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 1
    g = FiniteGame([p, p, p])
    assert [e.profile for e in enumerate_pure_nash(g)] == [(0, 0, 0), (1, 1, 1)]


def test_cournot_discretized_weak_equilibria():
    g = discretize(load_builtin("cournot"), 8)
    eqs = enumerate_pure_nash(g)
    points = {tuple(round(v * 7) for v in e.labels) for e in eqs}
    assert points == {(4, 5), (5, 4), (5, 5)}
    assert not any(e.strict for e in eqs)


@given(st.integers(0, 2**32 - 1))
def test_enumeration_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    A1, A2 = rng.integers(-3, 4, size=(2, 3, 3)).astype(float)
    g = BimatrixGame(A1, A2)
    brute = [(a, b) for a in range(3) for b in range(3)
             if A1[a, b] >= A1[:, b].max() and A2[a, b] >= A2[a, :].max()]
    assert [e.profile for e in enumerate_pure_nash(g)] == brute


def test_vi_gap_values(pd, bos):
    assert vi_gap(pd, [0, 1, 0, 1]) == 0.0
    assert vi_gap(pd, [1, 0, 1, 0]) > 0
    assert vi_gap(bos, [0.6, 0.4, 0.4, 0.6]) == pytest.approx(0, abs=1e-12)
    batch = vi_gap(pd, np.array([[0, 1, 0, 1], [1, 0, 1, 0.0]]))
    assert batch.shape == (2,) and batch[0] == 0


@given(st.integers(0, 2**32 - 1))
def test_vi_gap_nonnegative(seed):
    rng = np.random.default_rng(seed)
    for name in ("battle_of_sexes", "tullock", "cournot"):
        g = load_builtin(name)
        x = g.feasible_set().sample(rng, 5)
        assert np.all(vi_gap(g, x) >= -1e-12)


def test_fixed_point_solve_continuous():
    sol = fixed_point_solve(load_builtin("tullock"), [0.7, 0.3])
    assert sol.converged and np.allclose(sol.point, 0.5, atol=1e-6)
    sol = fixed_point_solve(load_builtin("cournot"), [0.1, 0.9])
    assert np.allclose(sol.point, 2 / 3, atol=1e-8)
    assert sol.kind == "interior_continuous"
    assert fixed_point_residual(load_builtin("cournot"), sol.point) <= 1e-10


def test_fixed_point_solve_pd_reaches_pure(pd):
    sol = fixed_point_solve(pd, [0.5, 0.5, 0.5, 0.5])
    assert sol.kind == "pure" and sol.profile == (1, 1)


def test_fixed_point_reports_non_convergence(mp):
    sol = fixed_point_solve(mp, [0.6, 0.4, 0.5, 0.5], max_iter=50)
    assert not sol.converged and sol.iterations == 50


def test_fixed_point_rejects_bad_gamma(pd):
    with pytest.raises(ParameterError):
        fixed_point_solve(pd, [0.5] * 4, gamma=0)


def test_interior_root_bos(bos):
    x = interior_root_solve(bos, np.full(4, 0.5))
    assert np.allclose(x, [0.6, 0.4, 0.4, 0.6], atol=1e-12)


def test_interior_root_spiral():
    x = interior_root_solve(load_builtin("spiral"), [0.3, -0.2])
    assert np.allclose(x, 0, atol=1e-12)


def test_interior_root_singular():
    g = BimatrixGame(np.zeros((2, 2)), np.zeros((2, 2)))
    # zero gradient: already a root
    assert np.allclose(interior_root_solve(g, np.full(4, 0.5)), 0.5)
    # dominant row: constant nonzero residual, zero Jacobian
    g = BimatrixGame([[1, 1], [0, 0]], [[0, 0], [0, 0]])
    with pytest.raises(NumericalError):
        interior_root_solve(g, np.full(4, 0.5))


def test_monotonicity_mp_exactly_monotone(mp):
    rep = monotonicity_report(mp)
    assert rep.classification == MONOTONE and rep.exact
    assert rep.evidence["max_abs_pairwise_inner"] <= 1e-12
    assert rep.evidence["strict_violations"] == rep.n_pairs


def test_monotonicity_cournot_strong():
    rep = monotonicity_report(load_builtin("cournot"))
    assert rep.classification == STRONG
    assert rep.strong_modulus == pytest.approx(0.5, rel=0.05)


@pytest.mark.parametrize("name", ["prisoners_dilemma", "spiral"])
def test_monotonicity_none(name):
    assert monotonicity_report(load_builtin(name)).classification == NONE


def test_monotonicity_reproducible(bos):
    a = monotonicity_report(bos, seed=4)
    b = monotonicity_report(bos, seed=4)
    assert a.to_dict() == b.to_dict()


def test_strategic_complements():
    pts = np.array([[0.2, 0.3], [0.6, 0.1]])
    assert not strategic_complements(load_builtin("cournot"), pts)["complements"]
    res = strategic_complements(load_builtin("spiral"), pts)
    assert res["min_cross_derivative"] == -4.0
