import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (combined_policy_gap, grid_prox_d2, prox_instances, prox_objective, random_truncated_simplex,
                     ratio_check, rvu_check)
from posr.learner import (BaseState, _power_iteration, agent_from_dict, agent_to_dict, base_losses,
                          bregman_prox, bregman_prox_full, dumps_agent, ftrl_init, ftrl_po_update,
                          ftrl_policy, loads_agent, log_barrier_divergence, oomd_step, oomd_trajectory,
                          posr_init, posr_update, prox_kkt_residual, stationary_distribution,
                          stationary_residual)

seeds = st.integers(0, 2 ** 32 - 1)


def test_divergence_of_point_with_itself_is_zero():
    x = np.array([0.2, 0.3, 0.5])
    assert log_barrier_divergence(x, x) == 0.0


def test_divergence_bounded_on_truncated_simplex():
    rng = np.random.default_rng(0)
    for d in (2, 3, 4):
        gamma = 1 / (2 * d)
        for _ in range(200):
            x, y = random_truncated_simplex(rng, 2, d, gamma * rng.random())
            g = min(x.min(), y.min())
            assert log_barrier_divergence(x, y) <= 3 / g


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_prox_stays_in_truncated_simplex(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    gamma = rng.uniform(1e-3, 1 / (2 * d))
    y = random_truncated_simplex(rng, 1, d, gamma)[0]
    g = rng.uniform(0, 10, size=d)
    x = bregman_prox(y, g, rng.uniform(0.001, 5), gamma)
    assert x.sum() == pytest.approx(1.0, abs=1e-12)
    assert x.min() >= gamma - 1e-15


def test_prox_with_zero_loss_returns_input():
    y = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(bregman_prox(y, np.zeros(3), 0.7, 0.1), y)


def test_prox_equal_losses_keep_input():
    y = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(bregman_prox(y, np.full(3, 2.0), 0.7, 0.1), y, atol=1e-12)


def test_prox_moves_mass_away_from_costly_action():
    y = np.array([0.5, 0.5])
    x = bregman_prox(y, np.array([1.0, 0.0]), 1.0, 0.1)
    assert x[0] < 0.5 < x[1]


def test_prox_kkt_and_grid_on_a_sample():
    rng = np.random.default_rng(3)
    for d, y, g, eta, gamma in prox_instances(rng, 600):
        r = bregman_prox_full(y, g, eta, gamma)
        assert prox_kkt_residual(r.x, y, g, eta, gamma, r.multiplier).max() <= 1e-10
        if d == 2:
            assert np.all(prox_objective(r.x, y, g, eta) <= grid_prox_d2(y, g, eta, gamma) + 1e-5)


def test_batched_prox_matches_rowwise():
    rng = np.random.default_rng(4)
    d, y, g, eta, gamma = prox_instances(rng, 90)[1]
    batch = bregman_prox(y, g, eta, gamma)
    for k in range(len(y)):
        np.testing.assert_allclose(batch[k], bregman_prox(y[k], g[k], eta[k], gamma[k]), atol=1e-15)


def test_prox_rejects_empty_domain():
    with pytest.raises(ValueError):
        bregman_prox(np.array([0.5, 0.5]), np.ones(2), 1.0, 0.6)


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_stationary_distribution_is_fixed_point(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 6))
    gamma = rng.uniform(1e-4, 1 / (2 * d))
    rows = random_truncated_simplex(rng, d, d, gamma)
    pi = stationary_distribution(rows)
    assert stationary_residual(rows, pi) <= 1e-10
    assert pi.min() >= gamma - 1e-12
    np.testing.assert_allclose(pi, _power_iteration(rows), atol=1e-9)


def test_stationary_of_identical_rows_is_the_row():
    row = np.array([0.1, 0.6, 0.3])
    np.testing.assert_allclose(stationary_distribution(np.tile(row, (3, 1))), row, atol=1e-14)


def test_stationary_batched():
    rng = np.random.default_rng(0)
    rows = random_truncated_simplex(rng, 5 * 3, 3, 0.05).reshape(5, 3, 3)
    pi = stationary_distribution(rows)
    for k in range(5):
        np.testing.assert_allclose(pi[k], stationary_distribution(rows[k]), atol=1e-14)


def test_oomd_step_uses_two_prox_steps():
    base = BaseState.initial(3)
    g = np.array([1.0, 0.0, 0.5])
    nxt = oomd_step(base, g, 0.3, 0.05)
    xt = bregman_prox(base.x_tilde, g, 0.3, 0.05)
    np.testing.assert_array_equal(nxt.x_tilde, xt)
    np.testing.assert_array_equal(nxt.x, bregman_prox(xt, g, 0.3, 0.05))
    np.testing.assert_array_equal(nxt.hint, g)


def test_oomd_on_constant_losses_concentrates():
    x, _ = oomd_trajectory(np.tile([1.0, 0.0], (500, 1)), 0.5, 0.01)
    assert x[-1, 1] > 0.9
    assert x[-1, 0] >= 0.01 - 1e-15


def test_rvu_on_a_few_runs():
    rng = np.random.default_rng(8)
    for _ in range(10):
        regret, rhs = rvu_check(rng, int(rng.integers(2, 5)), 2, 100)
        assert regret <= rhs


def test_ratio_on_a_few_runs():
    rng = np.random.default_rng(9)
    for _ in range(10):
        assert ratio_check(rng, int(rng.integers(2, 5)), 2, 100) <= 0


def test_combined_policy_identity():
    rng = np.random.default_rng(5)
    for _ in range(10):
        assert combined_policy_gap(rng) <= 1e-10


# -- agents ---------------------------------------------------------------------------

def test_posr_init_is_uniform_and_checks_gamma():
    a = posr_init(0, 4, 3, 1 / 6, 0.1)
    np.testing.assert_allclose(a.policy, 1 / 3)
    np.testing.assert_allclose(a.x, 1 / 3)
    with pytest.raises(ValueError):
        posr_init(0, 4, 3, 0.2, 0.1)
    with pytest.raises(ValueError):
        posr_init(0, 4, 3, 0.1, 0.0)


def test_base_losses_weight_rows_by_policy():
    pi = np.array([[0.25, 0.75]])
    q = np.array([[1.0, 2.0]])
    np.testing.assert_allclose(base_losses(pi, q)[0], [[0.25, 0.5], [0.75, 1.5]])


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_posr_policies_stay_in_truncated_simplex(seed):
    rng = np.random.default_rng(seed)
    A = int(rng.integers(2, 5))
    gamma = rng.uniform(1e-3, 1 / (2 * A))
    agent = posr_init(0, 3, A, gamma, rng.uniform(0.01, 3))
    for _ in range(5):
        agent = posr_update(agent, rng.uniform(0, 3, size=(3, A)))
        assert np.all(agent.policy >= gamma - 1e-12)
        np.testing.assert_allclose(agent.policy.sum(-1), 1.0, atol=1e-12)
        assert np.all(agent.x >= gamma - 1e-15)
        # the policy is stationary for the matrix of base iterates
        assert stationary_residual(agent.x, agent.policy).max() <= 1e-10


def test_posr_state_with_zero_q_is_untouched():
    agent = posr_init(0, 2, 2, 0.1, 1.0)
    q = np.array([[1.0, 0.0], [0.0, 0.0]])
    nxt = posr_update(agent, q)
    np.testing.assert_array_equal(nxt.policy[1], agent.policy[1])
    assert nxt.policy[0, 1] > 0.5


def test_posr_rejects_wrong_shape():
    with pytest.raises(ValueError):
        posr_update(posr_init(0, 2, 2, 0.1, 1.0), np.zeros((3, 2)))


def test_agent_checkpoint_round_trip_is_exact():
    rng = np.random.default_rng(1)
    agent = posr_init(1, 3, 3, 0.1, 0.37)
    for _ in range(3):
        agent = posr_update(agent, rng.uniform(0, 2, size=(3, 3)))
    back = loads_agent(dumps_agent(agent))
    for f in ("x", "x_tilde", "hint", "policy"):
        np.testing.assert_array_equal(getattr(back, f), getattr(agent, f))
    assert (back.player, back.gamma, back.eta) == (agent.player, agent.gamma, agent.eta)
    assert agent_to_dict(agent_from_dict(agent_to_dict(agent))) == agent_to_dict(agent)


# -- FTRL ---------------------------------------------------------------------------

@pytest.mark.parametrize("reg", ["entropy", "log_barrier"])
def test_ftrl_policy_prefers_low_cumulative_loss(reg):
    p = ftrl_policy(np.array([[3.0, 1.0, 2.0]]), 1.0, reg)
    assert p.sum() == pytest.approx(1.0)
    assert p[0, 1] > p[0, 2] > p[0, 0]


def test_ftrl_log_barrier_first_order_condition():
    L = np.array([[0.3, 1.7, 0.9]])
    p = ftrl_policy(L, 2.0, "log_barrier")[0]
    # eta L_a - 1/p_a is the same for every action
    v = 2.0 * L[0] - 1 / p
    assert np.ptp(v) < 1e-9


def test_ftrl_update_accumulates():
    a = ftrl_init(2, 2, 0.5)
    a = ftrl_po_update(a, np.array([[1.0, 0.0], [0.0, 0.0]]))
    a = ftrl_po_update(a, np.array([[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_allclose(a.cum_loss, [[2.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(a.policy[0], ftrl_policy(np.array([[2.0, 0.0]]), 0.5, "entropy")[0])
    with pytest.raises(ValueError):
        ftrl_policy(np.zeros((1, 2)), 1.0, "nope")
