"""Builtin games: contests, oligopoly, and classic matrix games."""

from __future__ import annotations

import numpy as np

from gdlab.games import BimatrixGame, ContinuousGame, ParameterError

TULLOCK_EPS = 1e-3


def _take(params: dict, defaults: dict, game: str) -> dict:
    unknown = set(params) - set(defaults)
    if unknown:
        raise ParameterError(f"unknown parameters for {game}: {sorted(unknown)}")
    out = dict(defaults)
    out.update(params)
    return out


def _positive(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be positive, got {value}")
    return value


def tullock(V=1.0, r=2.0, eps=TULLOCK_EPS) -> ContinuousGame:
    """Two-player Tullock contest on ``[eps, V]^2``.

    ``u_i = V x_i^r / (x_i^r + x_j^r) - x_i``. Zero bids are excluded, which
    avoids the discontinuity of the contest success function at the origin.
    """
    V, r, eps = _positive(V, "V"), _positive(r, "r"), _positive(eps, "eps")
    if eps >= V:
        raise ParameterError("eps must be smaller than V")

    def utilities(x):
        x1, x2 = x[..., 0], x[..., 1]
        S = x1**r + x2**r
        return np.stack([V * x1**r / S - x1, V * x2**r / S - x2], axis=-1)

    def gradient(x):
        x1, x2 = x[..., 0], x[..., 1]
        S = x1**r + x2**r
        return np.stack([
            V * r * x1 ** (r - 1) * x2**r / S**2 - 1,
            V * r * x2 ** (r - 1) * x1**r / S**2 - 1,
        ], axis=-1)

    def jacobian(x):
        x1, x2 = x[..., 0], x[..., 1]
        S = x1**r + x2**r
        S3 = S**3
        cross = V * r**2 * x1 ** (r - 1) * x2 ** (r - 1) / S3
        J = np.empty(x.shape[:-1] + (2, 2))
        J[..., 0, 0] = V * r * x2**r * x1 ** (r - 2) * ((r - 1) * S - 2 * r * x1**r) / S3
        J[..., 0, 1] = cross * (x1**r - x2**r)
        J[..., 1, 0] = cross * (x2**r - x1**r)
        J[..., 1, 1] = V * r * x1**r * x2 ** (r - 2) * ((r - 1) * S - 2 * r * x2**r) / S3
        return J

    return ContinuousGame(
        name="tullock", dims=(1, 1), lower=np.full(2, eps), upper=np.full(2, V),
        gradient_oracle=gradient, jacobian_oracle=jacobian, utility_oracle=utilities,
        params={"V": V, "r": r, "eps": eps},
    )


def spiral(C=1.0) -> ContinuousGame:
    """``u_1 = -x_1^2/2 - 4 x_1 x_2``, ``u_2 = -x_2^2/4 + x_1 x_2`` on ``[-C, C]^2``."""
    C = _positive(C, "C")
    J = np.array([[-1.0, -4.0], [1.0, -0.5]])

    def utilities(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([-0.5 * x1**2 - 4 * x1 * x2, -0.25 * x2**2 + x1 * x2], axis=-1)

    def gradient(x):
        return x @ J.T

    def jacobian(x):
        return np.broadcast_to(J, x.shape[:-1] + (2, 2)).copy()

    return ContinuousGame(
        name="spiral", dims=(1, 1), lower=np.full(2, -C), upper=np.full(2, C),
        gradient_oracle=gradient, jacobian_oracle=jacobian, utility_oracle=utilities,
        affine_gradient=True, params={"C": C},
    )


def cournot(b0=1.0, b=(0.5, 0.5), c=(0.0, 0.0), upper=1.0) -> ContinuousGame:
    """Linear-demand Cournot oligopoly, ``u_i = a_i (b0 - sum_j b_j a_j) - c_i a_i``."""
    b0 = float(b0)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    upper = _positive(upper, "upper")
    if b.ndim != 1 or b.shape != c.shape:
        raise ParameterError("b and c need one entry per firm")
    if np.any(b <= 0):
        raise ParameterError("price sensitivities b must be positive")
    if np.any(c < 0):
        raise ParameterError("marginal costs c must be non-negative")
    n = b.size
    J = -(np.diag(b) + b[None, :])

    def utilities(a):
        price = b0 - a @ b
        return a * (price[..., None] - c)

    def gradient(a):
        return b0 - (a @ b)[..., None] - b * a - c

    def jacobian(a):
        return np.broadcast_to(J, a.shape[:-1] + (n, n)).copy()

    return ContinuousGame(
        name="cournot", dims=(1,) * n, lower=np.zeros(n), upper=np.full(n, upper),
        gradient_oracle=gradient, jacobian_oracle=jacobian, utility_oracle=utilities,
        affine_gradient=True, params={"b0": b0, "b": b.tolist(), "c": c.tolist(), "upper": upper},
    )


def prisoners_dilemma() -> BimatrixGame:
    return BimatrixGame([[3, 0], [5, 1]], [[3, 5], [0, 1]],
                        actions=[("C", "D"), ("C", "D")], name="prisoners_dilemma")


def battle_of_sexes() -> BimatrixGame:
    return BimatrixGame([[3, 0], [0, 2]], [[2, 0], [0, 3]],
                        actions=[("opera", "football")] * 2, name="battle_of_sexes")


def matching_pennies() -> BimatrixGame:
    A1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return BimatrixGame(A1, -A1.T, actions=[("H", "T")] * 2, name="matching_pennies")


def extended_matching_pennies(r=1.0, q=2.0) -> BimatrixGame:
    """Matching pennies on actions 2-3 plus a strict equilibrium at (1, 1) worth ``r``."""
    r, q = _positive(r, "r"), _positive(q, "q")
    if q <= 1:
        raise ParameterError(f"q must exceed 1, got {q}")
    A1 = [[r, -q, -q], [-q / 2, 1, -1], [-q / 2, -1, 1]]
    A2 = [[r, -q / 2, -q / 2], [-q, -1, 1], [-q, 1, -1]]
    return BimatrixGame(A1, A2, name="extended_matching_pennies")


def milionis_cycle() -> BimatrixGame:
    """Several weak pure equilibria; projected gradient play cycles."""
    A1 = [[1, 0, -1], [-1, 0, -1], [1, 0, -2]]
    A2 = [[1, -1, 1], [0, 0, 0], [-1, -1, 2]]
    return BimatrixGame(A1, A2, name="milionis_cycle")


def weak_pne_cycle() -> BimatrixGame:
    """A single weak pure equilibrium that gradient play does not reach."""
    A1 = [[1, 2, 3], [0, 2, 0], [3, 2, 1]]
    A2 = [[3, 0, 1], [1, 2, 2], [1, 0, 3]]
    return BimatrixGame(A1, A2, name="weak_pne_cycle")


BUILTINS = {
    "tullock": (tullock, {"V": 1.0, "r": 2.0, "eps": TULLOCK_EPS}),
    "spiral": (spiral, {"C": 1.0}),
    "cournot": (cournot, {"b0": 1.0, "b": (0.5, 0.5), "c": (0.0, 0.0), "upper": 1.0}),
    "prisoners_dilemma": (prisoners_dilemma, {}),
    "battle_of_sexes": (battle_of_sexes, {}),
    "matching_pennies": (matching_pennies, {}),
    "extended_matching_pennies": (extended_matching_pennies, {"r": 1.0, "q": 2.0}),
    "milionis_cycle": (milionis_cycle, {}),
    "weak_pne_cycle": (weak_pne_cycle, {}),
}


def load_builtin(name: str, params: dict | None = None):
    try:
        factory, defaults = BUILTINS[name]
    except KeyError:
        raise ParameterError(f"unknown builtin game {name!r}; choose from {sorted(BUILTINS)}") from None
    kwargs = _take(dict(params or {}), defaults, name)
    game = factory(**kwargs)
    if isinstance(game, BimatrixGame):
        game.params = {k: kwargs[k] for k in defaults}
    return game
