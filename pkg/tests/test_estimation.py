import numpy as np
import pytest

from conftest import random_policy
from posr.envs import generate_random_game
from posr.estimation import (BlockConfig, TrajectoryBatch, block_seed_sequence, estimate_q,
                             min_reachability, min_reachability_bruteforce, sample_episode,
                             sample_episodes)
from posr.game import MarkovGame, evaluate, induce_mdp, occupancy


def _setup(seed=0, m=2, H=2, w=2, A=2):
    rng = np.random.default_rng(seed)
    g = generate_random_game(m, H, w, A, rng)
    profile = [random_policy(rng, g.n_states, a, floor=0.1) for a in g.action_counts]
    return g, profile


def test_episode_shapes_and_returns():
    g, prof = _setup()
    ep = sample_episode(g, prof, np.random.default_rng(0))
    assert ep.states.shape == (g.horizon,) and ep.actions.shape == (g.horizon, 2)
    assert ep.states[0] == g.initial
    np.testing.assert_allclose(ep.returns, ep.losses.sum(0))
    layer_of = g.layer_of()
    assert list(layer_of[ep.states]) == list(range(g.horizon))


def test_state_frequencies_match_occupancy():
    g, prof = _setup(1, H=3)
    batch = sample_episodes(g, prof, 40000, np.random.default_rng(2))
    q = occupancy(induce_mdp(g, prof, 0), prof[0])
    freq = np.bincount(batch.states.ravel(), minlength=g.n_states) / 40000
    for s in g.nonterminal:
        assert abs(freq[s] - q[s]) < 5 * np.sqrt(q[s] * (1 - q[s]) / 40000) + 1e-12


def test_mean_return_matches_value():
    g, prof = _setup(2)
    batch = sample_episodes(g, prof, 50000, np.random.default_rng(3))
    for i in range(2):
        v = evaluate(induce_mdp(g, prof, i), prof[i]).V[g.initial]
        r = batch.losses[:, :, i].sum(1)
        assert abs(r.mean() - v) < 5 * r.std() / np.sqrt(50000)


def test_visit_normalized_estimate_is_unbiased():
    g, prof = _setup(4)
    n = 100000
    batch = sample_episodes(g, prof, n, np.random.default_rng(5))
    for i in range(2):
        Q = evaluate(induce_mdp(g, prof, i), prof[i]).Q
        est = estimate_q(batch, i, g)
        for s in g.nonterminal:
            for a in range(2):
                c = est.counts[s, a]
                assert c > 1000
                assert abs(est.q_hat[s, a] - Q[s, a]) < 5 * g.horizon / np.sqrt(c)


def test_block_normalized_estimate_scales_by_occupancy():
    g, prof = _setup(6)
    n = 100000
    batch = sample_episodes(g, prof, n, np.random.default_rng(7))
    mdp = induce_mdp(g, prof, 0)
    Q = evaluate(mdp, prof[0]).Q
    q = occupancy(mdp, prof[0])[:, None] * prof[0]
    est = estimate_q(batch, 0, g, normalization="block")
    for s in g.nonterminal:
        np.testing.assert_allclose(est.q_hat[s], q[s] * Q[s], atol=5 * g.horizon / np.sqrt(n))


def test_estimator_hand_computed():
    # two episodes on a 2-step game; tails summed from each step to the end
    g, _ = _setup(0)
    states = np.array([[0, 1], [0, 2]])
    actions = np.array([[[0, 0], [1, 0]], [[0, 1], [1, 1]]])
    losses = np.array([[[0.5, 0.0], [0.25, 0.0]], [[0.1, 0.0], [0.3, 0.0]]])
    batch = TrajectoryBatch(states, actions, losses, g.terminal)
    est = estimate_q(batch, 0, g)
    assert est.q_hat[0, 0] == pytest.approx((0.75 + 0.4) / 2)
    assert est.q_hat[1, 1] == pytest.approx(0.25)
    assert est.q_hat[2, 1] == pytest.approx(0.3)
    assert est.counts[0, 0] == 2 and est.counts[1, 0] == 0
    assert est.unvisited[1, 0] and est.q_hat[1, 0] == 0 and est.flagged
    assert not est.unvisited[g.terminal].any()
    lst = estimate_q([batch[0], batch[1]], 0, g)
    np.testing.assert_array_equal(lst.q_hat, est.q_hat)
    with pytest.raises(ValueError):
        estimate_q(batch, 0, g, normalization="other")


def test_block_streams_are_reproducible_and_distinct():
    a = np.random.default_rng(block_seed_sequence(3, 7)).random(4)
    b = np.random.default_rng(block_seed_sequence(3, 7)).random(4)
    c = np.random.default_rng(block_seed_sequence(3, 8)).random(4)
    d = np.random.default_rng(block_seed_sequence(4, 7)).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)


def test_block_config_rejects_empty_block():
    with pytest.raises(ValueError):
        BlockConfig(0, 0.1, 0.1, 0.1)


@pytest.mark.parametrize("seed", range(6))
def test_min_reachability_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    H = 2 + seed % 2
    g = generate_random_game(2, H, 2, 2, rng)
    beta, z = min_reachability(g)
    bb, bz = min_reachability_bruteforce(g)
    assert beta == pytest.approx(bb, abs=1e-12)
    assert beta >= 0.01


def test_min_reachability_detects_unreachable_state():
    g = generate_random_game(1, 2, 2, 2, np.random.default_rng(0))
    t = g.transition.copy()
    t[0, 0] = 0
    t[0, 0, 1] = 1.0
    g2 = MarkovGame(g.horizon, g.layers, g.action_counts, t, g.losses)
    beta, z = min_reachability(g2)
    assert beta == 0.0 and z == 2
