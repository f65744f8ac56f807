"""Exp3 self-play with bandit feedback and external-regret accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from gdlab.dynamics import fmt
from gdlab.games import FiniteGame, ParameterError

RENORMALIZE_ABOVE = 1e100
DEFAULT_EXPLORATION = 0.05


@dataclass(frozen=True)
class BanditState:
    weights: np.ndarray
    gamma: float
    eta: float
    cumulative_payoff: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ParameterError("weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ParameterError("weights must be finite and positive")
        if not 0 <= self.gamma < 1:
            raise ParameterError("exploration rate must lie in [0, 1)")
        if not self.eta > 0:
            raise ParameterError("learning rate must be positive")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, k: int, gamma: float, eta: float) -> "BanditState":
        return cls(np.ones(k), gamma, eta)

    @property
    def k(self) -> int:
        return self.weights.size

    def probabilities(self) -> np.ndarray:
        w = self.weights
        return (1 - self.gamma) * w / w.sum() + self.gamma / w.size


def exp3_sample(state: BanditState, rng: np.random.Generator) -> int:
    """Draw an action by inverting the CDF of the induced distribution."""
    if state.k == 1:
        return 0
    cdf = np.cumsum(state.probabilities())
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), state.k - 1))


def exp3_update(state: BanditState, action: int, reward: float) -> BanditState:
    """Importance-weighted exponential update of the played arm only."""
    if not 0.0 <= reward <= 1.0:
        raise ParameterError(f"reward {reward} outside [0, 1]")
    if not 0 <= action < state.k:
        raise ParameterError(f"action {action} out of range")
    if reward == 0.0:
        return state
    p = state.probabilities()[action]
    w = state.weights.copy()
    w[action] *= math.exp(state.eta * reward / p)
    if w.max() > RENORMALIZE_ABOVE:
        w /= w.max()
    return replace(state, weights=w, cumulative_payoff=state.cumulative_payoff + reward)


def default_exploration(k: int, T: int | None) -> float:
    if T is None or k < 2:
        return DEFAULT_EXPLORATION if k > 1 else 0.0
    return min(1.0, math.sqrt(k * math.log(k) / ((math.e - 1) * T)))


@dataclass(frozen=True)
class Exp3Config:
    """``None`` picks the horizon-tuned defaults per player (``eta = gamma / K``)."""

    gamma: float | None = None
    eta: float | None = None
    snapshot_every: int = 1000

    def for_player(self, k: int, T: int | None) -> tuple[float, float]:
        gamma = default_exploration(k, T) if self.gamma is None else float(self.gamma)
        gamma = min(gamma, 1 - 1e-12)
        eta = self.eta if self.eta is not None else max(gamma, 1e-12) / k
        return gamma, float(eta)


@dataclass
class PlayHistory:
    actions: np.ndarray          # (T, n) action indices
    payoffs: np.ndarray          # (T, n) payoffs in the game's units
    strategies: list             # per player, (T, K_i) mixed strategies used at round t
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        T = len(self.actions)
        if len(self.payoffs) != T or any(len(s) != T for s in self.strategies):
            raise ValueError("history fields have inconsistent lengths")

    def __len__(self) -> int:
        return len(self.actions)

    def average_strategy(self, player: int) -> np.ndarray:
        return self.strategies[player].mean(axis=0)

    def profile_frequency(self, profile, start: int = 0) -> float:
        a = self.actions[start:]
        return float(np.mean(np.all(a == np.asarray(profile), axis=1)))

    def to_csv(self, path) -> None:
        n = self.actions.shape[1]
        header = ["t"] + [f"a_{i + 1}" for i in range(n)] + [f"u_{i + 1}" for i in range(n)]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for t in range(len(self)):
                row = [str(t + 1)] + [str(int(a)) for a in self.actions[t]]
                row += [fmt(u) for u in self.payoffs[t]]
                fh.write(",".join(row) + "\n")

    def strategies_to_csv(self, path, every: int | None = None) -> None:
        every = every or self.meta.get("snapshot_every", 1000)
        cols = ["t"] + [f"p_{i + 1}_{a}" for i, s in enumerate(self.strategies) for a in range(s.shape[1])]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for t in range(0, len(self), every):
                row = [str(t + 1)] + [fmt(v) for s in self.strategies for v in s[t]]
                fh.write(",".join(row) + "\n")


def simulate_selfplay(game: FiniteGame, config: Exp3Config | None, T: int, seed: int) -> PlayHistory:
    """Every player runs its own Exp3 and sees only its realized payoff.

    Rewards are mapped to ``[0, 1]`` by one affine map built from the smallest
    and largest payoff entry of the game. Player ``i`` draws from the ``i``-th
    child of ``SeedSequence(seed)``.
    """
    if T < 1:
        raise ParameterError("T must be at least 1")
    config = config or Exp3Config()
    n = game.n_players
    lo = min(float(p.min()) for p in game.payoffs)
    hi = max(float(p.max()) for p in game.payoffs)
    scale = hi - lo if hi > lo else 1.0
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
    states = []
    for k in game.action_counts:
        gamma, eta = config.for_player(k, T)
        states.append(BanditState.uniform(k, gamma, eta))
    actions = np.zeros((T, n), dtype=int)
    payoffs = np.zeros((T, n))
    strategies = [np.zeros((T, k)) for k in game.action_counts]
    for t in range(T):
        for i in range(n):
            strategies[i][t] = states[i].probabilities()
        profile = tuple(exp3_sample(states[i], rngs[i]) for i in range(n))
        actions[t] = profile
        for i in range(n):
            u = float(game.payoffs[i][profile])
            payoffs[t, i] = u
            reward = min(1.0, max(0.0, (u - lo) / scale))
            states[i] = exp3_update(states[i], profile[i], reward)
    meta = {
        "seed": seed, "T": T, "reward_map": {"offset": lo, "scale": scale},
        "gamma": [s.gamma for s in states], "eta": [s.eta for s in states],
        "snapshot_every": config.snapshot_every,
    }
    return PlayHistory(actions, payoffs, strategies, meta)


def _counterfactual(history: PlayHistory, game: FiniteGame, player: int) -> np.ndarray:
    """``(T, K)`` payoffs the player would have received with each fixed action."""
    idx = [history.actions[:, j] for j in range(game.n_players)]
    cols = []
    for a in range(game.action_counts[player]):
        idx[player] = np.full(len(history), a)
        cols.append(game.payoffs[player][tuple(idx)])
    return np.stack(cols, axis=1)


def external_regret(history: PlayHistory, game: FiniteGame, player: int) -> float:
    """Best fixed action in hindsight minus realized payoff, in payoff units.

    Each candidate sum is rounded once with ``math.fsum``; the maximum of
    correctly rounded values equals the correctly rounded maximum.
    """
    if not 0 <= player < game.n_players:
        raise ParameterError(f"no player {player}")
    cf = _counterfactual(history, game, player)
    realized = -history.payoffs[:, player]
    return max(math.fsum(np.concatenate([cf[:, a], realized])) for a in range(cf.shape[1]))


def regret_curve(history: PlayHistory, game: FiniteGame, player: int) -> np.ndarray:
    """R(t) for t = 1..T from exact running sums; R(T) equals ``external_regret``."""
    cf = _counterfactual(history, game, player)
    realized = history.payoffs[:, player]
    sums = [Fraction(0)] * cf.shape[1]
    out = np.empty(len(history))
    for t in range(len(history)):
        r = Fraction(float(realized[t]))
        sums = [s + Fraction(float(v)) - r for s, v in zip(sums, cf[t])]
        out[t] = float(max(sums))
    return out
