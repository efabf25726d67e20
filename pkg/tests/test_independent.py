import itertools

import numpy as np
import pytest

from conftest import random_policy
from posr.envs import generate_independent_transition_game
from posr.game import MarkovGame, apply_swap, evaluate, joint_value, stack_profiles, validate_game
from posr.metrics import swap_regret_exact


def product_game(ig):
    """The same game on the product state space, as an ordinary MarkovGame."""
    m, H = ig.n_players, ig.horizon
    joint_layers, index = [], {}
    for h in range(H + 1):
        layer = []
        for combo in itertools.product(*(ig.layers[j][h] for j in range(m))):
            index[combo] = len(index)
            layer.append(index[combo])
        joint_layers.append(layer)
    N = len(index)
    acts = ig.action_counts
    P = np.zeros((N, *acts, N))
    L = np.zeros((m, N, *acts))
    for h in range(H):
        for combo in itertools.product(*(ig.layers[j][h] for j in range(m))):
            s = index[combo]
            pos = tuple(ig.layers[j][h].index(combo[j]) for j in range(m))
            for i in range(m):
                L[i, s] = ig.losses[i][h][pos]
            for ja in itertools.product(*(range(a) for a in acts)):
                for nxt in itertools.product(*(ig.layers[j][h + 1] for j in range(m))):
                    P[(s, *ja, index[nxt])] = np.prod([ig.kernels[j][combo[j], ja[j], nxt[j]] for j in range(m)])
    return MarkovGame(H, joint_layers, acts, P, L), index


def lift(ig, index, profile):
    """Player policies on own states -> policies on product states."""
    N = len(index)
    out = []
    for i, pi in enumerate(profile):
        lifted = np.full((N, ig.action_counts[i]), 1.0 / ig.action_counts[i])
        for combo, s in index.items():
            lifted[s] = pi[combo[i]]
        out.append(lifted)
    return out


@pytest.mark.parametrize("seed,m,spl", [(0, 2, 2), (1, 3, 2), (2, 2, [2, [1, 3]])])
def test_induced_values_match_product_game(seed, m, spl):
    rng = np.random.default_rng(seed)
    ig = generate_independent_transition_game(m, 3, spl, 2, rng)
    assert ig.validate() == []
    pg, index = product_game(ig)
    assert validate_game(pg).ok
    profile = [random_policy(rng, ig.n_states(i), 2) for i in range(m)]
    lifted = lift(ig, index, profile)
    for i in range(m):
        mdp = ig.induced(profile, i)
        assert evaluate(mdp, profile[i]).V[ig.layers[i][0][0]] == pytest.approx(joint_value(pg, lifted, i), abs=1e-12)
        # a swapped own policy agrees as well
        phi = rng.integers(0, 2, size=(ig.n_states(i), 2))
        dev = list(lifted)
        dev[i] = lift(ig, index, [apply_swap(profile[j], phi) if j == i else profile[j] for j in range(m)])[i]
        v_dev = evaluate(mdp, apply_swap(profile[i], phi)).V[ig.layers[i][0][0]]
        assert v_dev == pytest.approx(joint_value(pg, dev, i), abs=1e-12)


def test_single_player_reduces_to_mdp():
    rng = np.random.default_rng(3)
    ig = generate_independent_transition_game(1, 3, 2, 3, rng)
    pi = random_policy(rng, ig.n_states(0), 3)
    mdp = ig.induced([pi], 0)
    np.testing.assert_array_equal(mdp.kernel, ig.kernels[0])
    for h, layer in enumerate(ig.layers[0][:-1]):
        np.testing.assert_array_equal(mdp.loss[layer], ig.losses[0][h])


def test_opponent_perturbation_changes_losses_not_kernel():
    rng = np.random.default_rng(4)
    ig = generate_independent_transition_game(2, 2, 2, 2, rng)
    prof = [random_policy(rng, ig.n_states(i), 2) for i in range(2)]
    base = ig.induced(prof, 0)
    bumped = [prof[0], prof[1].copy()]
    s = ig.layers[1][1][0]
    bumped[1][s] = [0.9, 0.1] if prof[1][s, 0] < 0.5 else [0.1, 0.9]
    moved = ig.induced(bumped, 0)
    np.testing.assert_array_equal(base.kernel, moved.kernel)
    assert np.abs(base.loss - moved.loss).max() > 1e-6
    # the derivative of the induced loss along the perturbation is linear in it
    half = [prof[0], 0.5 * (prof[1] + bumped[1])]
    np.testing.assert_allclose(ig.induced(half, 0).loss, 0.5 * (base.loss + moved.loss), atol=1e-14)


def test_batch_matches_single_and_kernel_invariant():
    rng = np.random.default_rng(5)
    ig = generate_independent_transition_game(3, 2, 2, 2, rng)
    hist = [np.stack([random_policy(rng, ig.n_states(i), 2) for _ in range(4)]) for i in range(3)]
    loss, kernel = ig.induced_batch(hist, 2)
    assert kernel.shape[0] == 1
    for t in range(4):
        mdp = ig.induced([h[t] for h in hist], 2, t + 1)
        np.testing.assert_allclose(loss[t], mdp.loss, atol=1e-14)
        np.testing.assert_array_equal(mdp.kernel, kernel[0])


def test_swap_regret_matches_product_game_per_table():
    rng = np.random.default_rng(6)
    ig = generate_independent_transition_game(2, 2, 2, 2, rng)
    pg, index = product_game(ig)
    profiles = [[random_policy(rng, ig.n_states(i), 2) for i in range(2)] for _ in range(4)]
    value, phi = swap_regret_exact(ig, profiles, 0)
    total = 0.0
    for prof in profiles:
        lifted = lift(ig, index, prof)
        dev = lift(ig, index, [apply_swap(prof[0], phi), prof[1]])
        total += joint_value(pg, lifted, 0) - joint_value(pg, [dev[0], lifted[1]], 0)
    assert value == pytest.approx(total, abs=1e-12)
    assert value >= 0
    assert stack_profiles(profiles)[0].shape == (4, ig.n_states(0), 2)


def test_validation_flags_bad_kernel():
    ig = generate_independent_transition_game(2, 2, 2, 2, np.random.default_rng(0))
    ig.kernels[1][0, 0, 1] += 0.5
    assert any("not a distribution" in x for x in ig.validate())
