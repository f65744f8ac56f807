import csv
import json
import warnings

import numpy as np
import pytest

from gdlab.catalog import load_builtin
from gdlab.games import BimatrixGame, ParameterError
from gdlab.projection import FeasibleSet
from gdlab.stability import (
    MARGINAL,
    NO_VERDICT,
    STABLE,
    QuadraticLyapunov,
    certify_basin,
    lie_derivative,
    linear_stability,
    lyapunov_scan_continuous,
    lyapunov_scan_discrete,
    make_grid,
    pure_deviation_vs_check,
    strong_vs_alpha,
    vs_scan,
)


def test_lyapunov_validation():
    with pytest.raises(ParameterError):
        QuadraticLyapunov([0, 0], [[1, 2], [0, 1]])
    with pytest.raises(ParameterError):
        QuadraticLyapunov([0, 0], [[1, 0], [0, -1]])
    V = QuadraticLyapunov([1.0, 0.0], np.diag([1.0, 2.0]))
    assert V([2.0, 1.0]) == 3.0
    assert np.array_equal(V.gradient([2.0, 1.0]), [2.0, 4.0])


def test_linear_stability_spiral():
    ls = linear_stability(load_builtin("spiral"), [0, 0])
    assert ls.verdict == STABLE
    assert np.allclose(ls.eigenvalues, [-0.75 - 0.75 * 7**0.5 * 1j, -0.75 + 0.75 * 7**0.5 * 1j], atol=1e-12)


def test_linear_stability_mp_marginal(mp):
    ls = linear_stability(mp, np.full(4, 0.5))
    assert ls.verdict == MARGINAL
    assert np.allclose(sorted(ls.eigenvalues.imag), [-2, 2])


def test_linear_stability_boundary_warns(pd):
    with pytest.warns(RuntimeWarning):
        ls = linear_stability(pd, [0, 1, 0, 1])
    assert ls.verdict == NO_VERDICT and not ls.interior


def test_box_grid():
    g = make_grid(FeasibleSet.box([0, 0], [1, 2]), 0.5)
    assert g.shape == (3, 5) and len(g) == 15
    assert g.on_boundary.sum() == 12


def test_simplex_grid_is_feasible():
    region = FeasibleSet.simplex_product([3, 2])
    g = make_grid(region, 11)
    assert np.all(region.contains(g.points))
    # 66 points on the 2-simplex lattice times 11 on the segment
    assert len(g) == 66 * 11


def test_vs_scan_pd_strong(pd):
    alpha = strong_vs_alpha(pd, [0, 1, 0, 1])
    assert alpha == pytest.approx(0.5)
    assert vs_scan(pd, [0, 1, 0, 1]).violations.sum() == 0


def test_vs_scan_mp_not_strong(mp):
    assert strong_vs_alpha(mp, np.full(4, 0.5), resolution=21) is None


def test_spiral_vs_fails_on_antidiagonal():
    g = load_builtin("spiral")
    t = 1e-3
    assert np.dot(g.gradient([t, -t]), [t, -t]) > 0
    scan = vs_scan(g, [0, 0], resolution=201)
    assert scan.violations.any()


def test_tullock_vs_radius():
    scan = vs_scan(load_builtin("tullock"), [0.5, 0.5], resolution=1e-3 * 2)
    assert 0.32 <= scan.vs_radius <= 0.36


def test_lie_derivative_spiral():
    g = load_builtin("spiral")
    V = QuadraticLyapunov([0, 0], np.diag([1.0, 2.0]))
    x = np.random.default_rng(0).uniform(-1, 1, size=(200, 2))
    assert np.allclose(lie_derivative(g, V, x), -2 * (x[:, 0] + x[:, 1]) ** 2, atol=1e-12)


def test_spiral_certification_needs_lasalle():
    g = load_builtin("spiral")
    V = QuadraticLyapunov([0, 0], np.diag([1.0, 2.0]))
    scan = lyapunov_scan_continuous(g, V, resolution=101)
    assert certify_basin(scan, V) is None
    assert certify_basin(scan, V, game=g, lasalle=True) == pytest.approx(1.0)


def test_lasalle_requires_game():
    g = load_builtin("spiral")
    V = QuadraticLyapunov([0, 0])
    scan = lyapunov_scan_continuous(g, V, resolution=11)
    with pytest.raises(ParameterError):
        certify_basin(scan, V, lasalle=True)


def test_certify_rejects_mismatched_lyapunov():
    g = load_builtin("spiral")
    scan = lyapunov_scan_continuous(g, QuadraticLyapunov([0, 0]), resolution=11)
    with pytest.raises(ParameterError):
        certify_basin(scan, QuadraticLyapunov([0, 0], np.diag([1.0, 2.0])))


def test_bos_discrete_certificate(bos):
    x_star = np.array([1, 0, 1, 0.0])
    V = QuadraticLyapunov(x_star)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        scan = lyapunov_scan_discrete(bos, V, 0.05)
    c = certify_basin(scan, V)
    assert c >= 0.8
    assert scan.meta["Uc_within_exact_V"]


def test_corrected_bound_dominates(bos):
    V = QuadraticLyapunov([1, 0, 1, 0.0])
    scan = lyapunov_scan_discrete(bos, V, 0.05, resolution=51, bound="corrected")
    assert scan.meta["dominance_holds"]
    assert np.all(scan.deltaVbar >= scan.deltaV - 1e-10)


def test_stated_bound_dominates_at_interior_equilibrium():
    g = load_builtin("cournot")
    V = QuadraticLyapunov([2 / 3, 2 / 3])
    scan = lyapunov_scan_discrete(g, V, 0.1, region=FeasibleSet.box([0.4, 0.4], [0.9, 0.9]), resolution=51)
    assert scan.meta["dominance_holds"]


def test_pure_deviation_check(pd, bos):
    assert pure_deviation_vs_check(pd, (1, 1)) == (True, None)
    ok, witness = pure_deviation_vs_check(bos, (0, 0))
    assert not ok and witness == (1, 1)
    with pytest.raises(ParameterError):
        pure_deviation_vs_check(pd, (2, 0))


def test_pure_deviation_agrees_with_scan():
    g = BimatrixGame([[2, 0], [0, 1]], [[2, 0], [0, 1]])
    for prof in [(0, 0), (1, 1)]:
        ok, _ = pure_deviation_vs_check(g, prof)
        scan = vs_scan(g, g.pure_point(prof), resolution=41)
        assert ok == (scan.violations.sum() == 0)


def test_scan_csv(tmp_path, pd):
    V = QuadraticLyapunov([0, 1, 0, 1.0])
    scan = lyapunov_scan_discrete(pd, V, 0.05, resolution=5, bound="corrected")
    certify_basin(scan, V)
    scan.to_csv(tmp_path / "s.csv", tmp_path / "s.json")
    rows = list(csv.reader((tmp_path / "s.csv").open()))
    assert rows[0][-3:] == ["in_V", "in_Vbar", "in_Uc"]
    assert len(rows) == len(scan.points) + 1
    side = json.loads((tmp_path / "s.json").read_text())
    assert side["certified_c"] == scan.certified_c and side["mode"] == "discrete"


def test_threaded_scan_identical(monkeypatch, bos):
    V = QuadraticLyapunov([1, 0, 1, 0.0])
    a = lyapunov_scan_discrete(bos, V, 0.05, resolution=101, bound="corrected")
    monkeypatch.setenv("GDL_THREADS", "4")
    monkeypatch.setattr("gdlab.stability.CHUNK", 500)
    b = lyapunov_scan_discrete(bos, V, 0.05, resolution=101, bound="corrected")
    assert a.deltaV.tobytes() == b.deltaV.tobytes()
