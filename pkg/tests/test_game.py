import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_mdp, random_policy
from posr.envs import generate_random_game
from posr.game import (MarkovGame, apply_swap, backward_induction, evaluate, forward_occupancy,
                       induce_mdp, induce_mdp_batch, joint_value, occupancy, path_lengths,
                       policy_distance, validate_game)
from posr.gamefile import GameFormatError, dumps_game, game_from_dict, game_to_dict, load_game, save_game


def _game(seed, m=2, H=2, w=2, A=2):
    return generate_random_game(m, H, w, A, np.random.default_rng(seed))


def test_generated_game_is_valid_and_shaped():
    g = _game(0, m=3, H=3, w=2, A=(2, 3, 2))
    assert validate_game(g).ok
    assert g.transition.shape == (g.n_states, 2, 3, 2, g.n_states)
    assert g.layers[0] == [0] and len(g.layers[-1]) == 1
    assert g.S == 1 + 2 + 2


def test_generator_desk_bounds():
    with pytest.raises(ValueError, match="desk-scale"):
        generate_random_game(5, 2, 2, 2, np.random.default_rng(0))
    generate_random_game(5, 2, 2, 2, np.random.default_rng(0), allow_large=True)


def test_generator_rows_are_floored():
    g = _game(1, m=2, H=3, w=3, A=2)
    for h, layer in enumerate(g.layers[:-1]):
        nxt = g.layers[h + 1]
        for s in layer:
            rows = g.transition[s][..., nxt]
            assert rows.min() >= 0.05 / (1 + 0.05 * len(nxt)) - 1e-12


def test_fixed_seed_regenerates_identical_file():
    assert dumps_game(_game(7)) == dumps_game(_game(7))
    assert dumps_game(_game(7)) != dumps_game(_game(8))


def test_single_player_game_runs_downstream():
    g = _game(3, m=1, H=3, w=2, A=3)
    mdp = induce_mdp(g, g.uniform_profile(), 0)
    np.testing.assert_array_equal(mdp.kernel, g.transition)
    assert joint_value(g, g.uniform_profile(), 0) == pytest.approx(evaluate(mdp, g.uniform_profile()[0]).V[0])


@pytest.mark.parametrize("seed", range(5))
def test_induced_value_matches_joint_value(seed):
    rng = np.random.default_rng(seed)
    g = _game(seed, m=3, H=2, w=2, A=2)
    profile = [random_policy(rng, g.n_states, a) for a in g.action_counts]
    for i in range(g.n_players):
        mdp = induce_mdp(g, profile, i)
        v = evaluate(mdp, profile[i]).V[g.initial]
        assert v == pytest.approx(joint_value(g, profile, i), abs=1e-12)
        # rows of the induced kernel stay stochastic
        for s in g.nonterminal:
            np.testing.assert_allclose(mdp.kernel[s].sum(-1), 1.0, atol=1e-12)


def test_induced_batch_matches_single():
    rng = np.random.default_rng(4)
    g = _game(4)
    hist = [np.stack([random_policy(rng, g.n_states, 2) for _ in range(5)]) for _ in range(2)]
    loss, kernel = induce_mdp_batch(g, hist, 1)
    for t in range(5):
        mdp = induce_mdp(g, [h[t] for h in hist], 1)
        np.testing.assert_allclose(loss[t], mdp.loss, atol=1e-14)
        np.testing.assert_allclose(kernel[t], mdp.kernel, atol=1e-14)


def _loop_backward(mdp, pi):
    V = np.zeros(mdp.loss.shape[0])
    Q = np.zeros_like(mdp.loss)
    for layer in reversed(mdp.layers[:-1]):
        for s in layer:
            for a in range(mdp.loss.shape[1]):
                Q[s, a] = mdp.loss[s, a] + sum(mdp.kernel[s, a, s2] * V[s2] for s2 in range(len(V)))
            V[s] = float(pi[s] @ Q[s])
    return V, Q


def test_backward_induction_matches_loop_and_batches():
    rng = np.random.default_rng(0)
    mdp = random_mdp(rng, H=4, width=3, A=3)
    pis = np.stack([random_policy(rng, mdp.loss.shape[0], 3) for _ in range(4)])
    Vb, Qb = backward_induction(mdp.layers, mdp.loss, mdp.kernel, pis)
    for k in range(4):
        V, Q = _loop_backward(mdp, pis[k])
        np.testing.assert_allclose(Vb[k], V, atol=1e-13)
        np.testing.assert_allclose(Qb[k], Q, atol=1e-13)


def test_value_equals_occupancy_weighted_loss():
    rng = np.random.default_rng(2)
    mdp = random_mdp(rng, H=3, width=2, A=2)
    pi = random_policy(rng, mdp.loss.shape[0], 2)
    q = occupancy(mdp, pi)
    assert evaluate(mdp, pi).V[0] == pytest.approx(float((q[:, None] * pi * mdp.loss).sum()), abs=1e-12)
    for layer in mdp.layers:
        assert q[layer].sum() == pytest.approx(1.0, abs=1e-12)


def test_terminal_state_has_zero_value():
    rng = np.random.default_rng(5)
    mdp = random_mdp(rng)
    vt = evaluate(mdp, random_policy(rng, mdp.loss.shape[0], 3))
    t = mdp.layers[-1][0]
    assert vt.V[t] == 0 and np.all(vt.Q[t] == 0)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=50, deadline=None)
def test_apply_swap_keeps_distributions(seed):
    rng = np.random.default_rng(seed)
    pi = random_policy(rng, 4, 3)
    phi = rng.integers(0, 3, size=(4, 3))
    out = apply_swap(pi, phi)
    np.testing.assert_allclose(out.sum(-1), 1.0, atol=1e-12)
    for s in range(4):
        for b in range(3):
            assert out[s, b] == pytest.approx(pi[s][phi[s] == b].sum())
    np.testing.assert_allclose(apply_swap(pi, np.tile(np.arange(3), (4, 1))), pi)


def test_path_lengths_and_distance():
    a = np.array([[0.5, 0.5], [1.0, 0.0]])
    b = np.array([[0.25, 0.75], [1.0, 0.0]])
    assert policy_distance(a, b) == pytest.approx(0.5)
    first, second = path_lengths([[a], [b], [a]])
    assert first[0] == pytest.approx(1.0) and second[0] == pytest.approx(0.5)


# -- validation ----------------------------------------------------------------

def test_validation_reports_bad_rows_and_losses():
    g = _game(0)
    g.transition[0, 0, 0, 1] += 0.1
    g.losses[1, 1, 0, 0] = 1.5
    issues = validate_game(g).issues
    assert any("sums to" in x for x in issues)
    assert any("outside [0, 1]" in x for x in issues)


def test_validation_reports_layer_skips_and_terminal():
    g = _game(0, H=3)
    s = g.layers[0][0]
    g.transition[s, 0, 0] = 0
    g.transition[s, 0, 0, g.terminal] = 1.0
    g.losses[0, g.terminal, 0, 0] = 0.5
    issues = validate_game(g).issues
    assert any("non-adjacent" in x for x in issues)
    assert any("terminal" in x for x in issues)


def test_validation_reports_shape_mismatch():
    g = _game(0)
    bad = MarkovGame(g.horizon, g.layers, (2, 3), g.transition, g.losses)
    assert not validate_game(bad).ok


# -- game files ------------------------------------------------------------------

def test_game_file_round_trip_is_exact(tmp_path):
    g = _game(11, m=2, H=3, w=2, A=(2, 3))
    save_game(g, tmp_path / "g.json")
    h = load_game(tmp_path / "g.json")
    np.testing.assert_array_equal(g.transition, h.transition)
    np.testing.assert_array_equal(g.losses, h.losses)
    assert dumps_game(h) == dumps_game(g)


def test_game_file_missing_transition_is_error():
    data = game_to_dict(_game(1))
    data["transition"].pop(3)
    with pytest.raises(GameFormatError, match="missing transition"):
        game_from_dict(data)


def test_game_file_missing_loss_is_error():
    data = game_to_dict(_game(1))
    data["losses"][1].pop(0)
    with pytest.raises(GameFormatError, match="missing loss"):
        game_from_dict(data)


def test_game_file_bad_json(tmp_path):
    p = tmp_path / "g.json"
    p.write_text("{not json")
    with pytest.raises(GameFormatError):
        load_game(p)


def test_game_file_records_cover_every_joint_action():
    g = _game(2, m=2, A=(2, 3))
    data = json.loads(dumps_game(g))
    assert len(data["transition"]) == g.S * 6
    keys = {(r["state"], tuple(r["joint_action"])) for r in data["transition"]}
    assert keys == {(int(s), ja) for s in g.nonterminal for ja in itertools.product(range(2), range(3))}
