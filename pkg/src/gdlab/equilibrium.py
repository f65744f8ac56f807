"""Locating and checking equilibria: pure enumeration, VI gap, fixed-point
iteration, Newton on interior roots, and sampled monotonicity tests."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from gdlab.games import (
    ContinuousGame,
    FiniteGame,
    Game,
    NumericalError,
    ParameterError,
    check_point,
)
from gdlab.projection import FeasibleSet

MAX_PROFILES = 10**7
PAYOFF_TIE_TOL = 1e-12
VI_TOL = 1e-10
DEFAULT_GAMMA = 0.1
NEWTON_HALVINGS = 30

STRONG = "strongly_monotone"
STRICT = "strictly_monotone"
MONOTONE = "monotone"
PSEUDO = "pseudomonotone_only"
NONE = "none_detected"


@dataclass
class EquilibriumCandidate:
    point: np.ndarray
    kind: str
    strict: bool | None
    vi_gap: float
    profile: tuple[int, ...] | None = None
    labels: tuple | None = None
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["point"] = [float(v) for v in self.point]
        d["profile"] = list(self.profile) if self.profile is not None else None
        d["labels"] = list(self.labels) if self.labels is not None else None
        return d


def enumerate_pure_nash(game: FiniteGame, tol: float = PAYOFF_TIE_TOL) -> list[EquilibriumCandidate]:
    """All pure equilibria in lexicographic profile order.

    Payoffs within ``tol`` of the best reply count as ties, so a profile with
    a tied deviation is an equilibrium but not a strict one.
    """
    total = math.prod(game.action_counts)
    if total > MAX_PROFILES:
        raise ParameterError(f"{total} pure profiles exceed the limit of {MAX_PROFILES}")
    is_ne = np.ones(game.action_counts, dtype=bool)
    is_strict = np.ones(game.action_counts, dtype=bool)
    for i, p in enumerate(game.payoffs):
        best = p.max(axis=i, keepdims=True)
        near = p >= best - tol * max(1.0, float(np.abs(best).max()))
        is_ne &= near
        is_strict &= near & (near.sum(axis=i, keepdims=True) == 1)
    out = []
    for prof in zip(*np.nonzero(is_ne)):
        prof = tuple(int(a) for a in prof)
        x = game.pure_point(prof)
        out.append(EquilibriumCandidate(
            point=x, kind="pure", strict=bool(is_strict[prof]), vi_gap=vi_gap(game, x),
            profile=prof, labels=tuple(game.actions[i][a] for i, a in enumerate(prof)),
        ))
    return out


def vi_gap(game: Game, x, feasible: FeasibleSet | None = None) -> np.ndarray | float:
    """``max_z <F(x), z - x>`` over the feasible set; batched over leading axes.

    The maximum of a linear function is attained at a vertex, so simplex
    blocks contribute their best-response value and box coordinates their
    better endpoint.
    """
    feasible = feasible or game.feasible_set()
    x = np.asarray(x, dtype=float)
    F = game.gradient(x)
    if feasible.kind == "box":
        gap = np.maximum(F * (feasible.upper - x), F * (feasible.lower - x)).sum(axis=-1)
    else:
        gap = sum(F[..., sl].max(axis=-1) - np.einsum("...i,...i->...", F[..., sl], x[..., sl])
                  for sl in feasible.slices)
    return float(gap) if np.ndim(gap) == 0 else gap


def _kind_of(game: Game, x: np.ndarray) -> str:
    if isinstance(game, ContinuousGame):
        return "interior_continuous"
    return "pure" if np.all(np.isclose(x, 0.0, atol=1e-9) | np.isclose(x, 1.0, atol=1e-9)) else "mixed"


def fixed_point_solve(game: Game, x0, gamma: float = DEFAULT_GAMMA, tol: float = 1e-12,
                      max_iter: int = 100_000, feasible: FeasibleSet | None = None) -> EquilibriumCandidate:
    """Iterate ``x <- proj(x + gamma F(x))`` until the step is below ``tol``.

    Running out of iterations is reported through ``converged=False``.
    """
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    feasible = feasible or game.feasible_set()
    x = check_point(game, x0).astype(float).copy()
    step = np.inf
    k = 0
    for k in range(1, max_iter + 1):
        x_new = feasible.project(x + gamma * game.gradient(x))
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step < tol:
            break
    residual = float(np.linalg.norm(feasible.project(x + gamma * game.gradient(x)) - x))
    profile = None
    if isinstance(game, FiniteGame) and _kind_of(game, x) == "pure":
        profile = tuple(int(np.argmax(b)) for b in game.split(x))
    return EquilibriumCandidate(
        point=x, kind=_kind_of(game, x), strict=None, vi_gap=vi_gap(game, x, feasible),
        profile=profile, converged=step < tol, iterations=k, residual=residual,
    )


def fixed_point_residual(game: Game, x, gamma: float = DEFAULT_GAMMA) -> float:
    feasible = game.feasible_set()
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(feasible.project(x + gamma * game.gradient(x)) - x))


def interior_root_solve(game: Game, x0, tol: float = 1e-10, max_iter: int = 100) -> np.ndarray:
    """Damped Newton iteration for an interior equilibrium.

    For a continuous game this solves ``F(x) = 0``. For a finite game it
    solves for equal payoffs within each block, i.e. ``F`` orthogonal to the
    simplex directions, in coordinates ``x = x0 + B y``. Feasibility of the
    result is not checked.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (game.dim,):
        raise ParameterError(f"x0 must have length {game.dim}")
    if isinstance(game, FiniteGame):
        B = game.feasible_set().tangent_basis()
    else:
        B = np.eye(game.dim)

    def residual(y):
        return B.T @ game.gradient(x0 + B @ y)

    y = np.zeros(B.shape[1])
    r = residual(y)
    norm = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if norm < tol:
            return x0 + B @ y
        J = B.T @ game.jacobian(x0 + B @ y) @ B
        try:
            if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e14:
                raise np.linalg.LinAlgError
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise NumericalError("singular Jacobian during Newton iteration") from None
        t = 1.0
        for _ in range(NEWTON_HALVINGS + 1):
            r_new = residual(y + t * delta)
            norm_new = float(np.linalg.norm(r_new))
            if np.isfinite(norm_new) and norm_new < norm:
                break
            t /= 2
        else:
            raise NumericalError("Newton step failed to reduce the residual")
        y, r, norm = y + t * delta, r_new, norm_new
    if norm < tol:
        return x0 + B @ y
    raise NumericalError(f"Newton iteration did not converge (residual {norm:.3g})")


@dataclass
class MonotonicityReport:
    classification: str
    strong_modulus: float | None
    evidence: dict
    jacobian_definiteness: dict
    n_pairs: int
    exact: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _tangent_sym_eigs(game: Game, J: np.ndarray, feasible: FeasibleSet) -> np.ndarray:
    """Eigenvalues of the symmetrized Jacobian restricted to feasible directions."""
    B = feasible.tangent_basis()
    S = (J + np.swapaxes(J, -1, -2)) / 2
    return np.linalg.eigvalsh(B.T @ S @ B)


def monotonicity_report(game: Game, region: FeasibleSet | None = None, n_samples: int = 500,
                        seed: int = 0, tol: float = 1e-12) -> MonotonicityReport:
    """Sampled monotonicity classification, with an exact test when J is constant.

    Pairs ``(x_k, y_k)`` are drawn uniformly from ``region``. A class is
    reported when none of the sampled pairs violates it. For constant
    Jacobians the eigenvalue test decides monotone and strong monotonicity
    exactly; the sampled counts are still reported.
    """
    if n_samples < 2:
        raise ParameterError("n_samples must be at least 2")
    region = region or game.feasible_set()
    rng = np.random.default_rng(seed)
    X = region.sample(rng, n_samples)
    Y = region.sample(rng, n_samples)
    FX, FY = game.gradient(X), game.gradient(Y)
    diff = X - Y
    dist2 = np.einsum("ij,ij->i", diff, diff)
    keep = dist2 > 1e-24
    diff, dist2, FX, FY = diff[keep], dist2[keep], FX[keep], FY[keep]
    inner = np.einsum("ij,ij->i", FX - FY, diff)
    fy_dir = np.einsum("ij,ij->i", FY, diff)  # <F(y), x - y>
    fx_dir = np.einsum("ij,ij->i", FX, diff)  # <F(x), x - y>
    # the implication is checked for both orderings of each pair
    pseudo_viol = int(np.sum((fy_dir <= tol) & (fx_dir > tol)) + np.sum((-fx_dir <= tol) & (-fy_dir > tol)))
    ratios = -inner / dist2
    alpha_sampled = float(ratios.min()) if ratios.size else None
    evidence = {
        "monotone_violations": int(np.sum(inner > tol)),
        "strict_violations": int(np.sum(inner >= -tol)),
        "pseudomonotone_violations": pseudo_viol,
        "max_pairwise_inner": float(inner.max()) if inner.size else None,
        "min_pairwise_inner": float(inner.min()) if inner.size else None,
        "max_abs_pairwise_inner": float(np.abs(inner).max()) if inner.size else None,
        "alpha_sampled": alpha_sampled,
    }
    pts = X[: min(n_samples, 200)]
    J = game.jacobian(pts)
    eigs = _tangent_sym_eigs(game, J, region)
    lam_max = eigs.max(axis=-1) if eigs.shape[-1] else np.zeros(len(pts))
    jac = {"max_eigenvalue": float(lam_max.max()), "min_of_max_eigenvalue": float(lam_max.min()),
           "n_points": int(len(pts))}
    exact = bool(game.constant_jacobian)
    notes = []
    if exact:
        J0 = game.jacobian(region.center()[None, :])[0]
        ev = _tangent_sym_eigs(game, J0, region)
        top = float(ev.max()) if ev.size else 0.0
        jac["exact_max_eigenvalue"] = top
        if top < -1e-10:
            cls, alpha = STRONG, -top
        elif top <= 1e-10:
            cls, alpha = MONOTONE, None
        else:
            cls, alpha = (PSEUDO if pseudo_viol == 0 else NONE), None
        notes.append("constant Jacobian: exact eigenvalue test on the feasible directions")
    else:
        if evidence["monotone_violations"] == 0 and alpha_sampled is not None and alpha_sampled > 1e-9:
            cls, alpha = STRONG, alpha_sampled
        elif evidence["strict_violations"] == 0:
            cls, alpha = STRICT, None
        elif evidence["monotone_violations"] == 0:
            cls, alpha = MONOTONE, None
        elif pseudo_viol == 0:
            cls, alpha = PSEUDO, None
        else:
            cls, alpha = NONE, None
        notes.append("sampling certificate only")
    return MonotonicityReport(cls, alpha, evidence, jac, int(keep.sum()), exact, notes)


def strategic_complements(game: Game, points) -> dict:
    """Check that all cross-player second derivatives are non-negative."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    J = game.jacobian(pts)
    if isinstance(game, FiniteGame):
        owner = np.repeat(np.arange(game.n_players), game.action_counts)
    else:
        owner = np.repeat(np.arange(game.n_players), game.dims)
    cross = owner[:, None] != owner[None, :]
    values = J[..., cross]
    low = float(values.min()) if values.size else 0.0
    return {"complements": bool(low >= -1e-10), "min_cross_derivative": low}
