"""Stability certificates on grids: linearization, variational stability,
Lyapunov decrease scans and certified sublevel sets."""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from gdlab.dynamics import fmt
from gdlab.games import FiniteGame, Game, ParameterError, check_point
from gdlab.projection import FeasibleSet

EIG_TOL = 1e-10
VS_TOL = 1e-12
CENTER_EXCLUSION = 1e-9
DOMINANCE_TOL = 1e-10
CHUNK = 20_000

STABLE = "asymptotically_stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"
NO_VERDICT = "no_verdict_boundary"


@dataclass(frozen=True)
class QuadraticLyapunov:
    """``V(x) = (x - center)^T Q (x - center)``."""

    center: np.ndarray
    Q: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        Q = np.eye(c.size) if self.Q is None else np.asarray(self.Q, dtype=float)
        if Q.shape != (c.size, c.size):
            raise ParameterError(f"Q must be {c.size}x{c.size}")
        if np.max(np.abs(Q - Q.T)) > 1e-12:
            raise ParameterError("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise ParameterError("Q must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "Q", Q)

    def __call__(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", d, self.Q, d)

    def gradient(self, x) -> np.ndarray:
        return 2 * (np.asarray(x, dtype=float) - self.center) @ self.Q


@dataclass
class LinearStability:
    eigenvalues: np.ndarray
    verdict: str
    interior: bool
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "verdict": self.verdict, "interior": self.interior, "message": self.message,
        }


def _reduced_jacobian(game: Game, x: np.ndarray) -> np.ndarray:
    J = game.jacobian(x)
    if isinstance(game, FiniteGame):
        B = game.feasible_set().tangent_basis()
        return B.T @ J @ B
    return J


def linear_stability(game: Game, x_star) -> LinearStability:
    """Eigenvalues of the Jacobian at ``x_star`` along feasible directions.

    At a boundary point linearization says nothing about the projected
    dynamics, so no verdict is given there.
    """
    x = check_point(game, x_star)
    eig = np.linalg.eigvals(_reduced_jacobian(game, x))
    eig = eig[np.lexsort((eig.imag, eig.real))]
    interior = game.feasible_set().is_interior(x)
    if not interior:
        msg = "x* is on the boundary; use vs_scan or lyapunov_scan_discrete instead"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return LinearStability(eig, NO_VERDICT, False, msg)
    re = eig.real
    if re.size and np.all(re < -EIG_TOL):
        verdict = STABLE
    elif np.any(re > EIG_TOL):
        verdict = UNSTABLE
    else:
        verdict = MARGINAL
    return LinearStability(eig, verdict, True)


# ----------------------------------------------------------------- grids


@dataclass
class Grid:
    """Feasible grid points with their integer lattice coordinates.

    Box regions use a tensor grid over every coordinate. Simplex blocks are
    parametrized by their first ``d - 1`` entries on ``[0, 1]``; lattice
    points outside the simplex are dropped.
    """

    points: np.ndarray
    index: np.ndarray
    shape: tuple[int, ...]
    spacing: np.ndarray
    on_boundary: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def _points_per_dim(lo: float, hi: float, resolution) -> int:
    if isinstance(resolution, (int, np.integer)) and not isinstance(resolution, bool):
        n = int(resolution)
    else:
        n = int(round((hi - lo) / float(resolution))) + 1
    if n < 2:
        raise ParameterError("a grid needs at least two points per dimension")
    return n


def make_grid(region: FeasibleSet, resolution) -> Grid:
    """``resolution`` is a point count per free dimension (int) or a spacing (float)."""
    if region.kind == "box":
        axes = [np.linspace(lo, hi, _points_per_dim(lo, hi, resolution))
                for lo, hi in zip(region.lower, region.upper)]
        shape = tuple(a.size for a in axes)
        idx = np.indices(shape).reshape(len(shape), -1).T
        pts = np.stack([axes[k][idx[:, k]] for k in range(len(axes))], axis=-1)
        spacing = np.array([a[1] - a[0] for a in axes])
        boundary = np.any((idx == 0) | (idx == np.array(shape) - 1), axis=1)
        return Grid(pts, idx, shape, spacing, boundary)
    n = _points_per_dim(0.0, 1.0, resolution)
    free = [d - 1 for d in region.sizes]
    k = sum(free)
    shape = (n,) * k
    if n ** k > 5 * 10**7:
        raise ParameterError(f"grid with {n}^{k} lattice points is too large")
    idx = np.indices(shape).reshape(k, -1).T
    coords = idx / (n - 1)
    keep = np.ones(len(idx), dtype=bool)
    blocks = []
    pos = 0
    for f in free:
        c = coords[:, pos:pos + f]
        s = c.sum(axis=1)
        keep &= s <= 1 + 1e-12
        blocks.append(np.column_stack([c, 1 - s]) if f else np.ones((len(idx), 1)))
        pos += f
    pts = np.concatenate(blocks, axis=1)[keep]
    pts = np.clip(pts, 0.0, 1.0)
    return Grid(pts, idx[keep], shape, np.full(k, 1 / (n - 1)), np.zeros(int(keep.sum()), dtype=bool))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("GDL_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(fun, pts: np.ndarray) -> list:
    """Evaluate ``fun`` on row chunks; results are returned in grid order."""
    chunks = [pts[i:i + CHUNK] for i in range(0, len(pts), CHUNK)] or [pts]
    n = min(_threads(), len(chunks))
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fun, chunks))
    return [fun(c) for c in chunks]


# ----------------------------------------------------------------- scans


@dataclass
class RegionScan:
    points: np.ndarray
    center: np.ndarray
    V: np.ndarray
    s: np.ndarray
    deltaV: np.ndarray
    deltaVbar: np.ndarray | None
    in_V: np.ndarray
    in_Vbar: np.ndarray
    mode: str
    grid: Grid
    certified_c: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def distance(self) -> np.ndarray:
        return np.linalg.norm(self.points - self.center, axis=1)

    @property
    def in_Uc(self) -> np.ndarray:
        if self.certified_c is None:
            return np.zeros(len(self.points), dtype=bool)
        return self.V <= self.certified_c

    @property
    def violations(self) -> np.ndarray:
        """Grid points where variational stability fails."""
        return (self.s >= -VS_TOL) & (self.distance > CENTER_EXCLUSION)

    @property
    def vs_radius(self) -> float:
        """Largest ball around the center free of violations (inf if none)."""
        bad = self.violations
        return float(self.distance[bad].min()) if bad.any() else math.inf

    def sidecar(self) -> dict:
        return {
            "mode": self.mode, "n_points": int(len(self.points)),
            "grid_shape": list(self.grid.shape), "spacing": [float(h) for h in self.grid.spacing],
            "center": [float(v) for v in self.center], "certified_c": self.certified_c,
            "vs_radius": None if math.isinf(self.vs_radius) else self.vs_radius,
            "n_violations": int(self.violations.sum()), **self.meta,
        }

    def to_csv(self, path, sidecar_path=None) -> None:
        D = self.points.shape[1]
        cols = [f"x_{j}" for j in range(D)] + ["V", "s", "deltaV", "deltaVbar", "in_V", "in_Vbar", "in_Uc"]
        dvb = self.deltaVbar if self.deltaVbar is not None else np.full(len(self.points), np.nan)
        in_uc = self.in_Uc
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for k in range(len(self.points)):
                row = [fmt(v) for v in self.points[k]]
                row += [fmt(self.V[k]), fmt(self.s[k]), fmt(self.deltaV[k]), fmt(dvb[k])]
                row += [str(int(self.in_V[k])), str(int(self.in_Vbar[k])), str(int(in_uc[k]))]
                fh.write(",".join(row) + "\n")
        if sidecar_path is not None:
            with open(sidecar_path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
                fh.write("\n")


def _scan(game: Game, V: QuadraticLyapunov, region: FeasibleSet | None, resolution,
          eta: float | None, mode: str, bound: str = "stated") -> RegionScan:
    region = region or game.feasible_set()
    x_star = check_point(game, V.center)
    grid = make_grid(region, resolution)
    F_star = game.gradient(x_star)
    feasible = game.feasible_set()

    def evaluate(pts):
        F = game.gradient(pts)
        d = pts - x_star
        s = np.einsum("ij,ij->i", F, d)
        v = V(pts)
        if mode == "discrete":
            nxt = feasible.project(pts + eta * F)
            dv = V(nxt) - v
            dF = F - F_star
            inner = s if bound == "stated" else np.einsum("ij,ij->i", dF, d)
            dvb = eta**2 * np.einsum("ij,ij->i", dF, dF) + 2 * eta * inner
        else:
            dv = 2 * np.einsum("ij,jk,ik->i", d, V.Q, F)
            dvb = None
        return v, s, dv, dvb

    parts = _chunked(evaluate, grid.points)
    v = np.concatenate([p[0] for p in parts])
    s = np.concatenate([p[1] for p in parts])
    dv = np.concatenate([p[2] for p in parts])
    dvb = np.concatenate([p[3] for p in parts]) if mode == "discrete" else None
    pos = v > 0
    in_V = pos & (dv < 0)
    in_Vbar = pos & (dvb < 0) if dvb is not None else in_V.copy()
    meta = {"resolution": resolution if not isinstance(resolution, np.generic) else resolution.item(),
            "Q": V.Q.tolist()}
    if eta is not None:
        meta["eta"] = float(eta)
    scan = RegionScan(grid.points, x_star, v, s, dv, dvb, in_V, in_Vbar, mode, grid, meta=meta)
    if dvb is not None:
        excess = float((dv - dvb).max()) if dv.size else 0.0
        meta["bound"] = bound
        meta["max_dominance_excess"] = excess
        meta["dominance_holds"] = excess <= DOMINANCE_TOL
        meta["Vbar_subset_V"] = bool(not np.any(in_Vbar & ~in_V))
        if excess > DOMINANCE_TOL:
            warnings.warn(f"deltaVbar undercuts deltaV by up to {excess:.3g} on the grid",
                          RuntimeWarning, stacklevel=3)
    return scan


def vs_scan(game: Game, x_star, region: FeasibleSet | None = None, resolution=201) -> RegionScan:
    """Sign of ``<F(x), x - x*>`` over a grid; see ``RegionScan.vs_radius``."""
    return _scan(game, QuadraticLyapunov(np.asarray(x_star, dtype=float)), region, resolution, None, "vs")


def strong_vs_alpha(game: Game, x_star, region: FeasibleSet | None = None, resolution=201) -> float | None:
    scan = vs_scan(game, x_star, region, resolution)
    d2 = scan.distance ** 2
    keep = scan.distance > CENTER_EXCLUSION
    if not keep.any():
        return None
    alpha = float(np.min(-scan.s[keep] / d2[keep]))
    return alpha if alpha > 0 else None


def pure_deviation_vs_check(game: FiniteGame, a_star) -> tuple[bool, tuple[int, ...] | None]:
    """Sum of unilateral gains from switching back to ``a_star`` at every pure profile.

    Returns ``(True, None)`` when ``sum_i u_i(a) - u_i(a*_i, a_-i) < 0`` for all
    ``a != a_star``, otherwise ``(False, witness)`` with the first violating
    profile in lexicographic order.
    """
    a_star = tuple(int(a) for a in a_star)
    if len(a_star) != game.n_players or any(not 0 <= a < d for a, d in zip(a_star, game.action_counts)):
        raise ParameterError(f"invalid pure profile {a_star}")
    total = np.zeros(game.action_counts)
    for i, p in enumerate(game.payoffs):
        back = np.take(p, [a_star[i]], axis=i)
        total += p - back
    bad = total >= 0
    bad[a_star] = False
    if not bad.any():
        return True, None
    witness = min(tuple(int(v) for v in w) for w in zip(*np.nonzero(bad)))
    return False, witness


def lyapunov_scan_discrete(game: Game, V: QuadraticLyapunov, eta: float,
                           region: FeasibleSet | None = None, resolution=201,
                           bound: str = "stated") -> RegionScan:
    """Exact one-step change of ``V`` and a projection-free estimate of it.

    ``bound="stated"`` uses ``eta^2 |F(x) - F(x*)|^2 + 2 eta <F(x), x - x*>``.
    That dominates ``deltaV`` only when ``<F(x*), x - x*> = 0``, e.g. at
    interior equilibria; at a boundary equilibrium it can undercut it, which
    the scan records in ``meta``. ``bound="corrected"`` uses
    ``<F(x) - F(x*), x - x*>`` and always dominates.
    """
    if not eta > 0:
        raise ParameterError("eta must be positive")
    if bound not in ("stated", "corrected"):
        raise ParameterError(f"unknown bound {bound!r}")
    return _scan(game, V, region, resolution, eta, "discrete", bound)


def lyapunov_scan_continuous(game: Game, V: QuadraticLyapunov, region: FeasibleSet | None = None,
                             resolution=201) -> RegionScan:
    """Lie derivative of ``V`` along ``F`` on a grid (stored in ``deltaV``)."""
    return _scan(game, V, region, resolution, None, "continuous")


def lie_derivative(game: Game, V: QuadraticLyapunov, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    out = np.einsum("...i,...i->...", V.gradient(x), game.gradient(x))
    return float(out) if np.ndim(out) == 0 else out


def certify_basin(scan: RegionScan, V: QuadraticLyapunov, game: Game | None = None,
                  lasalle: bool = False, lasalle_tau: float = 1e-3, zero_tol: float = 1e-12) -> float | None:
    """Largest ``c`` whose grid sublevel set ``{V <= c}`` is certified.

    A grid point is rejected when it or any lattice neighbour fails the
    decrease test (``deltaVbar < 0`` in discrete mode, ``V-dot < 0`` in
    continuous mode); the center itself always passes. ``c`` is the largest
    grid value of ``V`` strictly below every rejected point. In continuous
    mode ``c`` is also capped by ``V`` on the region boundary so that the
    sublevel set stays inside the region.

    With ``lasalle=True`` (continuous mode, needs ``game``) points with
    ``V-dot = 0`` are accepted when ``V-dot`` is negative a short time later,
    i.e. the flow does not stay on the zero set.
    """
    if not np.allclose(scan.center, V.center) or not np.allclose(scan.meta["Q"], V.Q):
        raise ParameterError("scan was computed with a different Lyapunov function")
    center = scan.distance <= CENTER_EXCLUSION
    if scan.mode == "discrete":
        good = scan.in_Vbar | center
    elif scan.mode == "continuous":
        good = (scan.deltaV < 0) | center
        if lasalle:
            if game is None:
                raise ParameterError("the LaSalle option needs the game")
            zero = ~good & (np.abs(scan.deltaV) <= zero_tol)
            if zero.any():
                pts = scan.points[zero]
                ahead = pts + lasalle_tau * game.gradient(pts)
                good[np.flatnonzero(zero)[lie_derivative(game, V, ahead) < 0]] = True
    else:
        raise ParameterError("certification needs a Lyapunov scan")
    if not (good & ~center).any():
        scan.certified_c = None
        return None
    lattice_bad = np.zeros(scan.grid.shape, dtype=bool)
    lattice_bad[tuple(scan.grid.index.T)] = ~good
    structure = np.ones((3,) * len(scan.grid.shape), dtype=bool)
    rejected = ndimage.binary_dilation(lattice_bad, structure=structure)[tuple(scan.grid.index.T)]
    rejected &= ~center
    limit = float(scan.V[rejected].min()) if rejected.any() else math.inf
    below = scan.V[scan.V < limit]
    c = float(below.max()) if below.size else 0.0
    if scan.mode == "continuous" and scan.grid.on_boundary.any():
        c = min(c, float(scan.V[scan.grid.on_boundary].min()))
    if c <= 0:
        scan.certified_c = None
        return None
    scan.certified_c = c
    scan.meta["certified_c"] = c
    if scan.mode == "discrete":
        # independent check against the exact one-step decrease
        inside = (scan.V <= c) & ~center
        scan.meta["Uc_within_exact_V"] = bool(np.all(scan.in_V[inside]))
    return c
