import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gdlab.games import ParameterError
from gdlab.learning import (
    BanditState,
    Exp3Config,
    PlayHistory,
    default_exploration,
    exp3_sample,
    exp3_update,
    external_regret,
    regret_curve,
    simulate_selfplay,
)


def test_state_validation():
    with pytest.raises(ParameterError):
        BanditState(np.array([1.0, 0.0]), 0.1, 0.1)
    with pytest.raises(ParameterError):
        BanditState.uniform(2, 1.0, 0.1)
    with pytest.raises(ParameterError):
        BanditState.uniform(2, 0.1, 0.0)


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6), st.floats(0, 0.99))
def test_probabilities_form_distribution(w, gamma):
    p = BanditState(np.array(w), gamma, 0.1).probabilities()
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= gamma / len(w) - 1e-15)


def test_update_touches_played_arm_only():
    s = BanditState.uniform(3, 0.3, 0.1)
    t = exp3_update(s, 1, 0.5)
    p = s.probabilities()[1]
    assert t.weights[1] == pytest.approx(math.exp(0.1 * 0.5 / p))
    assert t.weights[0] == t.weights[2] == 1.0
    assert s.weights[1] == 1.0  # original untouched


def test_zero_reward_is_noop_and_bad_reward_raises():
    s = BanditState.uniform(2, 0.1, 0.1)
    assert exp3_update(s, 0, 0.0) is s
    with pytest.raises(ParameterError):
        exp3_update(s, 0, 1.5)
    with pytest.raises(ParameterError):
        exp3_update(s, 2, 0.5)


def test_weights_renormalized():
    s = BanditState(np.array([1e99, 1.0]), 0.01, 50.0)
    t = exp3_update(s, 0, 1.0)
    assert t.weights.max() == 1.0 and np.all(np.isfinite(t.weights))


def test_sample_frequencies():
    s = BanditState(np.array([1.0, 3.0]), 0.0, 0.1)
    rng = np.random.default_rng(0)
    draws = [exp3_sample(s, rng) for _ in range(20_000)]
    assert np.mean(draws) == pytest.approx(0.75, abs=0.015)


def test_default_exploration():
    assert default_exploration(2, 10**5) == pytest.approx(math.sqrt(2 * math.log(2) / ((math.e - 1) * 1e5)))
    assert default_exploration(1, 100) == 0.0
    assert default_exploration(5, 1) == 1.0
    assert Exp3Config().for_player(2, 10**5)[1] == pytest.approx(default_exploration(2, 10**5) / 2)


def test_selfplay_deterministic(pd):
    a = simulate_selfplay(pd, None, 500, seed=7)
    b = simulate_selfplay(pd, None, 500, seed=7)
    c = simulate_selfplay(pd, None, 500, seed=8)
    assert np.array_equal(a.actions, b.actions)
    assert not np.array_equal(a.actions, c.actions)


def test_history_shapes(bos):
    h = simulate_selfplay(bos, Exp3Config(gamma=0.1, eta=0.05), 200, seed=0)
    assert h.actions.shape == (200, 2) and h.payoffs.shape == (200, 2)
    assert [s.shape for s in h.strategies] == [(200, 2), (200, 2)]
    assert np.allclose(h.strategies[0][0], 0.5)
    for t in range(200):
        assert np.array_equal(h.payoffs[t], bos.pure_payoff(tuple(h.actions[t])))
    with pytest.raises(ValueError):
        PlayHistory(h.actions, h.payoffs[:10], h.strategies)


def test_regret_matches_definition(mp):
    h = simulate_selfplay(mp, None, 300, seed=1)
    for i in range(2):
        best = max(sum(mp.pure_payoff(tuple(a if j == i else h.actions[t, j] for j in range(2)))[i]
                       for t in range(300)) for a in range(2))
        assert external_regret(h, mp, i) == pytest.approx(best - h.payoffs[:, i].sum(), abs=1e-9)
        curve = regret_curve(h, mp, i)
        assert curve[-1] == external_regret(h, mp, i)


def test_regret_zero_when_always_best():
    from gdlab.games import BimatrixGame
    g = BimatrixGame([[1, 1], [0, 0]], [[1, 1], [1, 1]])
    h = PlayHistory(np.zeros((5, 2), dtype=int), np.tile([1.0, 1.0], (5, 1)),
                    [np.tile([1.0, 0.0], (5, 1))] * 2)
    assert external_regret(h, g, 0) == 0.0
    with pytest.raises(ParameterError):
        external_regret(h, g, 3)


def test_history_csv(tmp_path, pd):
    h = simulate_selfplay(pd, Exp3Config(snapshot_every=10), 25, seed=0)
    h.to_csv(tmp_path / "h.csv")
    h.strategies_to_csv(tmp_path / "s.csv")
    rows = list(csv.reader((tmp_path / "h.csv").open()))
    assert rows[0] == ["t", "a_1", "a_2", "u_1", "u_2"]
    assert rows[1][0] == "1" and len(rows) == 26
    srows = list(csv.reader((tmp_path / "s.csv").open()))
    assert [r[0] for r in srows[1:]] == ["1", "11", "21"]


@pytest.mark.slow
def test_pd_selfplay_learns_defection(pd):
    h = simulate_selfplay(pd, None, 20_000, seed=3)
    assert h.profile_frequency((1, 1), start=18_000) >= 0.8
