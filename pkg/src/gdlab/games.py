"""Finite games, their mixed extensions, and box-constrained continuous games.

Points are flat numpy vectors. For a finite game the point stacks one mixed
strategy per player; for a continuous game it stacks one coordinate block per
player. Every oracle also accepts a leading batch axis, ``(..., D)``.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from gdlab.projection import FeasibleSet

FD_STEP = 1e-6
SIMPLEX_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


class DimensionError(ValueError):
    pass


class DomainError(ValueError):
    pass


class ParameterError(ValueError):
    pass


class NumericalError(RuntimeError):
    """Raised when an iterative solver fails (singular Jacobian, divergence)."""


@dataclass(frozen=True)
class MixedProfile:
    """One probability vector per player."""

    blocks: tuple[np.ndarray, ...]

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[float]]) -> "MixedProfile":
        arrs = []
        for i, b in enumerate(blocks):
            b = np.asarray(b, dtype=float)
            if b.ndim != 1 or b.size == 0:
                raise DimensionError(f"block {i} must be a nonempty vector")
            if np.any(~np.isfinite(b)):
                raise DomainError(f"block {i} has non-finite entries")
            violation = max(abs(b.sum() - 1.0), max(0.0, -b.min()), max(0.0, b.max() - 1.0))
            if violation > RENORMALIZE_TOL:
                raise DomainError(f"block {i} is not a probability vector (violation {violation:.3g})")
            if violation > SIMPLEX_TOL:
                b = np.clip(b, 0.0, None)
                b = b / b.sum()
            arrs.append(b)
        return cls(tuple(arrs))

    @classmethod
    def from_flat(cls, x, sizes: Sequence[int]) -> "MixedProfile":
        x = np.asarray(x, dtype=float)
        if x.shape != (sum(sizes),):
            raise DimensionError(f"expected a vector of length {sum(sizes)}, got shape {x.shape}")
        return cls.from_blocks(np.split(x, np.cumsum(sizes)[:-1]))

    @classmethod
    def pure(cls, actions: Sequence[int], sizes: Sequence[int]) -> "MixedProfile":
        blocks = []
        for a, d in zip(actions, sizes):
            e = np.zeros(d)
            e[a] = 1.0
            blocks.append(e)
        return cls(tuple(blocks))

    @classmethod
    def uniform(cls, sizes: Sequence[int]) -> "MixedProfile":
        return cls(tuple(np.full(d, 1.0 / d) for d in sizes))

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.blocks)


class FiniteGame:
    """Normal-form game with dense payoff tensors, one per player.

    ``payoffs[i][a_1, ..., a_n]`` is player ``i``'s payoff. ``actions`` holds
    optional labels (strings or numbers) for each player's actions.
    """

    def __init__(self, payoffs, actions=None, name: str = "finite"):
        payoffs = [np.array(p, dtype=float) for p in payoffs]
        if not payoffs:
            raise DimensionError("a game needs at least one player")
        n = len(payoffs)
        shape = payoffs[0].shape
        if len(shape) != n:
            raise DimensionError(f"{n} players need payoff tensors of rank {n}, got rank {len(shape)}")
        for i, p in enumerate(payoffs):
            if p.shape != shape:
                raise DimensionError(f"payoff tensor of player {i} has shape {p.shape}, expected {shape}")
            if not np.all(np.isfinite(p)):
                raise DomainError(f"payoff tensor of player {i} has non-finite entries")
            if min(p.shape) < 1:
                raise DimensionError("every player needs at least one action")
            p.setflags(write=False)
        if actions is None:
            actions = [tuple(range(d)) for d in shape]
        actions = tuple(tuple(a) for a in actions)
        if tuple(len(a) for a in actions) != shape:
            raise DimensionError(f"action labels {tuple(len(a) for a in actions)} do not match payoffs {shape}")
        self.payoffs = tuple(payoffs)
        self.actions = actions
        self.name = name
        self._offsets = np.concatenate([[0], np.cumsum(shape)]).astype(int)
        self._slices = [slice(int(lo), int(hi)) for lo, hi in zip(self._offsets[:-1], self._offsets[1:])]

    @property
    def n_players(self) -> int:
        return len(self.payoffs)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.payoffs[0].shape

    @property
    def dim(self) -> int:
        return sum(self.action_counts)

    @property
    def offsets(self) -> np.ndarray:
        return self._offsets

    @property
    def constant_jacobian(self) -> bool:
        return self.n_players <= 2

    def feasible_set(self) -> FeasibleSet:
        return FeasibleSet.simplex_product(self.action_counts)

    def split(self, x):
        x = np.asarray(x, dtype=float)
        return [x[..., sl] for sl in self._slices]

    def _contract(self, tensor, blocks, keep):
        # Contract a payoff tensor with every block except the axes in ``keep``.
        n = self.n_players
        letters = string.ascii_lowercase
        others = [j for j in range(n) if j not in keep]
        out_keep = "".join(letters[j] for j in keep)
        batch_shape = blocks[0].shape[:-1]
        if not others:
            return np.broadcast_to(tensor, batch_shape + tensor.shape).copy()
        subs = [letters[:n]] + ["..." + letters[j] for j in others]
        expr = ",".join(subs) + "->..." + out_keep
        return np.einsum(expr, tensor, *(blocks[j] for j in others))

    def utilities(self, x) -> np.ndarray:
        """Expected utilities of all players, shape ``(..., n)``."""
        blocks = self.split(x)
        return np.stack([self._contract(p, blocks, ()) for p in self.payoffs], axis=-1)

    def gradient(self, x) -> np.ndarray:
        blocks = self.split(x)
        parts = [self._contract(p, blocks, (i,)) for i, p in enumerate(self.payoffs)]
        return np.concatenate(parts, axis=-1)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        blocks = self.split(x)
        off = self.offsets
        J = np.zeros(x.shape[:-1] + (self.dim, self.dim))
        for i, p in enumerate(self.payoffs):
            for j in range(self.n_players):
                if j == i:
                    continue
                block = self._contract(p, blocks, (i, j) if i < j else (j, i))
                if j < i:
                    block = np.swapaxes(block, -1, -2)
                J[..., off[i]:off[i + 1], off[j]:off[j + 1]] = block
        return J

    def pure_payoff(self, profile: Sequence[int]) -> np.ndarray:
        return np.array([p[tuple(profile)] for p in self.payoffs])

    def profiles(self):
        return itertools.product(*(range(d) for d in self.action_counts))

    def pure_point(self, profile: Sequence[int]) -> np.ndarray:
        return MixedProfile.pure(profile, self.action_counts).flat

    def __repr__(self) -> str:
        return f"FiniteGame(name={self.name!r}, actions={self.action_counts})"


class BimatrixGame(FiniteGame):
    """Two-player finite game given by row and column payoff matrices."""

    def __init__(self, A1, A2, actions=None, name: str = "bimatrix"):
        A1 = np.array(A1, dtype=float)
        A2 = np.array(A2, dtype=float)
        if A1.ndim != 2 or A1.shape != A2.shape:
            raise DimensionError(f"A1 {A1.shape} and A2 {A2.shape} must be matrices of equal shape")
        super().__init__([A1, A2], actions=actions, name=name)

    @property
    def A1(self) -> np.ndarray:
        return self.payoffs[0]

    @property
    def A2(self) -> np.ndarray:
        return self.payoffs[1]

    def utilities(self, x):
        x1, x2 = self.split(x)
        u1 = np.einsum("...i,ij,...j->...", x1, self.A1, x2)
        u2 = np.einsum("...i,ij,...j->...", x1, self.A2, x2)
        return np.stack([u1, u2], axis=-1)

    def gradient(self, x):
        x1, x2 = self.split(x)
        return np.concatenate([x2 @ self.A1.T, x1 @ self.A2], axis=-1)

    def jacobian(self, x=None):
        m, n = self.A1.shape
        J = np.zeros((m + n, m + n))
        J[:m, m:] = self.A1
        J[m:, :m] = self.A2.T
        if x is None:
            return J
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(J, x.shape[:-1] + J.shape).copy()


@dataclass(frozen=True)
class ContinuousGame:
    """Game on a box with one coordinate block per player.

    Oracles take ``(..., D)`` arrays. ``gradient_oracle`` returns the stacked
    own-strategy gradients, ``utility_oracle`` the ``(..., n)`` utilities.
    ``affine_gradient`` marks games whose Jacobian is constant.
    """

    name: str
    dims: tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray
    gradient_oracle: Callable[[np.ndarray], np.ndarray]
    jacobian_oracle: Callable[[np.ndarray], np.ndarray] | None = None
    utility_oracle: Callable[[np.ndarray], np.ndarray] | None = None
    affine_gradient: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != (sum(self.dims),) or upper.shape != lower.shape:
            raise DimensionError("bounds must have one entry per coordinate")
        if np.any(lower > upper):
            raise ParameterError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_players(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        return sum(self.dims)

    @property
    def constant_jacobian(self) -> bool:
        return self.affine_gradient

    def feasible_set(self) -> FeasibleSet:
        return FeasibleSet.box(self.lower, self.upper)

    def gradient(self, x):
        return np.asarray(self.gradient_oracle(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        if self.jacobian_oracle is not None:
            return np.asarray(self.jacobian_oracle(x), dtype=float)
        return finite_difference_jacobian(self.gradient, x)

    def utilities(self, x):
        if self.utility_oracle is None:
            raise ParameterError(f"game {self.name!r} has no utility oracle")
        return np.asarray(self.utility_oracle(np.asarray(x, dtype=float)), dtype=float)


Game = FiniteGame | ContinuousGame


def finite_difference_jacobian(fun, x, h: float = FD_STEP) -> np.ndarray:
    """Central differences, column ``j`` holds ``d fun / d x_j``."""
    x = np.asarray(x, dtype=float)
    D = x.shape[-1]
    cols = []
    for j in range(D):
        e = np.zeros(D)
        e[j] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def finite_difference_gradient(game: ContinuousGame, x, h: float = FD_STEP) -> np.ndarray:
    """Own-strategy gradients of ``utility_oracle`` by central differences."""
    x = np.asarray(x, dtype=float)
    owner = np.repeat(np.arange(game.n_players), game.dims)
    out = np.empty_like(x)
    for j in range(game.dim):
        e = np.zeros(game.dim)
        e[j] = h
        du = (game.utilities(x + e) - game.utilities(x - e)) / (2 * h)
        out[..., j] = du[..., owner[j]]
    return out


def check_point(game: Game, x, tol: float = RENORMALIZE_TOL) -> np.ndarray:
    """Validate ``x`` against the game's domain and return it as a float vector."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (game.dim,):
        raise DimensionError(f"expected points of dimension {game.dim}, got shape {x.shape}")
    if not np.all(game.feasible_set().contains(x, tol=tol)):
        raise DomainError(f"point outside the domain of {game.name!r}")
    return x


def expected_utility(game: FiniteGame, x, player: int) -> float:
    if not isinstance(x, MixedProfile):
        x = MixedProfile.from_flat(x, game.action_counts)
    if x.sizes != tuple(game.action_counts):
        raise DimensionError(f"profile sizes {x.sizes} do not match game {game.action_counts}")
    if not 0 <= player < game.n_players:
        raise DimensionError(f"no player {player}")
    return float(game.utilities(x.flat)[player])


def game_gradient(game: Game, x) -> np.ndarray:
    if isinstance(x, MixedProfile):
        x = x.flat
    return game.gradient(check_point(game, x))


def game_jacobian(game: Game, x) -> np.ndarray:
    if isinstance(x, MixedProfile):
        x = x.flat
    return game.jacobian(check_point(game, x))


def is_potential_candidate(game: Game, points, tol: float = 1e-8) -> bool:
    """True when the Jacobian is symmetric at every sampled point."""
    J = game.jacobian(np.atleast_2d(points))
    return bool(np.all(np.abs(J - np.swapaxes(J, -1, -2)) <= tol))


def discretize(game: ContinuousGame, points_per_dim: int) -> FiniteGame:
    """Restrict each player to a closed uniform grid and tabulate utilities."""
    if game.utility_oracle is None:
        raise ParameterError(f"game {game.name!r} has no utility oracle to discretize")
    if points_per_dim < 2:
        raise ParameterError("points_per_dim must be at least 2")
    if any(d != 1 for d in game.dims):
        raise ParameterError("discretization supports one-dimensional strategies only")
    k = np.arange(points_per_dim) / (points_per_dim - 1)
    grids = []
    for lo, hi in zip(game.lower, game.upper):
        g = lo + (hi - lo) * k
        g[0], g[-1] = lo, hi
        grids.append(g)
    mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1)
    u = game.utilities(mesh)
    payoffs = [u[..., i] for i in range(game.n_players)]
    return FiniteGame(payoffs, actions=[tuple(float(v) for v in g) for g in grids],
                      name=f"{game.name}_discrete{points_per_dim}")
