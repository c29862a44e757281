import numpy as np
import pytest

from acgap.agents.sample import (
    SampleAgentConfig,
    actor_g_objective,
    actor_o_objective,
    collect_episode,
    res_actor_objective,
    res_critic_loss,
    run_sample_agent,
    sample_actions,
    sample_critic_loss,
    stack_actor_update,
)
from acgap.buffers import TransitionBatch
from acgap.envs import random_mdp
from acgap.gradients import grad_actor_g, grad_actor_o, grad_policy_exact
from acgap.mdp import SoftmaxPolicy, solve_q_values, solve_stationary
from acgap.verify.harness import exhaustive_batch, sampled_batch

from conftest import make_instance


def _initial_pairs(mdp, policy):
    S, A = mdp.n_states, mdp.n_actions
    states = np.repeat(np.arange(S), A)
    actions = np.tile(np.arange(A), S)
    return states, actions, (mdp.init_dist[:, None] * policy.table).ravel()


def _per_sample_scores(policy, states, actions, values):
    A = policy.n_actions
    out = np.zeros((len(states), policy.dim))
    rows = np.arange(len(states))[:, None]
    cols = states[:, None] * A + np.arange(A)
    out[rows, cols] = -policy.table[states] * values[:, None]
    out[np.arange(len(states)), states * A + actions] += values
    return out


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_actor_g(seed):
    mdp, pol, q = make_instance(seed)
    _, g = actor_g_objective(exhaustive_batch(mdp, pol), pol, q)
    np.testing.assert_allclose(g, grad_actor_g(mdp, pol, q), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_actor_o(seed):
    mdp, pol, q = make_instance(seed)
    s, a, w = _initial_pairs(mdp, pol)
    _, g = actor_o_objective(s, pol, q, actions=a, weights=w)
    np.testing.assert_allclose(g, grad_actor_o(mdp, pol, q) / (1 - mdp.gamma), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_res_actor_with_exact_critics_is_pg(seed):
    mdp, pol, q = make_instance(seed)
    w = solve_q_values(mdp, pol) - q
    _, g = res_actor_objective(exhaustive_batch(mdp, pol), pol, q, w)
    np.testing.assert_allclose(g, grad_policy_exact(mdp, pol), atol=1e-12)


def test_actor_o_statistics():
    mdp, pol, q = make_instance(2)
    rng = np.random.default_rng(5)
    n = 10_000
    states = rng.choice(mdp.n_states, size=n, p=mdp.init_dist)
    actions = sample_actions(pol, states, rng)
    _, g = actor_o_objective(states, pol, q, actions=actions)
    per = _per_sample_scores(pol, states, actions, q[states * mdp.n_actions + actions])
    np.testing.assert_allclose(g, per.mean(axis=0), atol=1e-12)
    se = per.std(axis=0) / np.sqrt(n)
    target = grad_actor_o(mdp, pol, q) / (1 - mdp.gamma)
    assert np.all(np.abs(g - target) <= 3 * se + 1e-12)


def test_actor_g_statistics():
    mdp, pol, q = make_instance(4)
    rng = np.random.default_rng(6)
    n = 10_000
    batch = sampled_batch(mdp, pol, n, rng)
    _, g = actor_g_objective(batch, pol, q)
    per = _per_sample_scores(pol, batch.state, batch.action, q[batch.state * mdp.n_actions + batch.action])
    se = per.std(axis=0) / np.sqrt(n)
    assert np.all(np.abs(g - grad_actor_g(mdp, pol, q)) <= 3 * se + 1e-12)


def test_sample_actions_distribution():
    pol = SoftmaxPolicy(1, 3, np.array([0.0, 1.0, -1.0]))
    a = sample_actions(pol, np.zeros(30_000, dtype=int), np.random.default_rng(0))
    freq = np.bincount(a, minlength=3) / len(a)
    se = np.sqrt(pol.table[0] * (1 - pol.table[0]) / len(a))
    assert np.all(np.abs(freq - pol.table[0]) <= 3 * se)


def _one(s=0, a=0, r=0.0, s2=1, a2=0):
    return TransitionBatch([s], [a], [r], [s2], [a2])


def test_critic_loss_hand_values():
    q = np.array([0.1, 0.0, 0.0, 0.0])
    loss, grad = sample_critic_loss(_one(), q, 0.9, 2)
    assert loss == pytest.approx(0.01)
    np.testing.assert_allclose(grad, [0.2, 0, 0, 0])


def test_res_critic_loss_hand_values():
    # critic TD error 0.5 becomes the res-critic reward; w = 0
    q = np.zeros(4)
    loss, grad = res_critic_loss(_one(r=0.5), q, np.zeros(4), 0.9, 2, clip_c=1.0)
    assert loss == pytest.approx(0.25)
    np.testing.assert_allclose(grad, [-1.0, 0, 0, 0])
    loss, _ = res_critic_loss(_one(r=3.0), q, np.zeros(4), 0.9, 2, clip_c=1.0)
    assert loss == pytest.approx(1.0)
    loss, _ = res_critic_loss(_one(r=3.0), q, np.zeros(4), 0.9, 2)
    assert loss == pytest.approx(9.0)


def test_critic_target_is_stop_gradient():
    rng = np.random.default_rng(3)
    batch = TransitionBatch(rng.integers(3, size=40), rng.integers(2, size=40), rng.random(40),
                            rng.integers(3, size=40), rng.integers(2, size=40))
    q = rng.standard_normal(6)
    _, grad = sample_critic_loss(batch, q, 0.9, 2)
    sa = batch.state * 2 + batch.action
    target = batch.reward + 0.9 * q[batch.next_state * 2 + batch.next_action]
    eps = 1e-6
    for k in range(6):
        e = np.zeros(6)
        e[k] = eps
        plus = np.mean(((q + e)[sa] - target) ** 2)
        minus = np.mean(((q - e)[sa] - target) ** 2)
        assert grad[k] == pytest.approx((plus - minus) / (2 * eps), abs=1e-7)
    unused = np.setdiff1d(np.arange(6), sa)
    np.testing.assert_array_equal(grad[unused], 0.0)


def test_stack_update_large_eta_is_actor_o():
    mdp, pol, q = make_instance(1)
    rng = np.random.default_rng(0)
    batch = sampled_batch(mdp, pol, 300, rng)
    s, a, w = _initial_pairs(mdp, pol)
    upd = stack_actor_update(s, batch, pol, q, 1e12, mdp.gamma, actions=a, initial_weights=w)
    np.testing.assert_allclose(upd.direction, upd.actor_term, atol=1e-10)
    small = stack_actor_update(s, batch, pol, q, 1e-3, mdp.gamma, actions=a, initial_weights=w)
    assert np.linalg.norm(small.correction) > 1e3 * np.linalg.norm(upd.correction)
    with pytest.raises(ValueError):
        stack_actor_update(s, batch, pol, q, 0.0, mdp.gamma, actions=a)


def test_collect_episode_shape_and_validity():
    mdp = random_mdp(5, 2, seed=0)
    pol = SoftmaxPolicy(5, 2)
    batch, s0 = collect_episode(mdp, pol, np.random.default_rng(0), 300)
    assert len(batch) == 300 and batch.state[0] == s0
    np.testing.assert_array_equal(batch.state[1:], batch.next_state[:-1])
    np.testing.assert_array_equal(batch.action[1:], batch.next_action[:-1])
    np.testing.assert_array_equal(batch.reward, mdp.reward[batch.state * 2 + batch.action])


@pytest.fixture(scope="module")
def small_mdp():
    return random_mdp(6, 3, seed=2, gamma=0.9)


@pytest.mark.parametrize("algorithm", ["ActorO", "ActorG", "StackAC", "ResAC"])
def test_run_trace_layout_and_determinism(small_mdp, algorithm):
    cfg = SampleAgentConfig(algorithm=algorithm, episodes=5, episode_length=50, batch_size=50)
    t1 = run_sample_agent(small_mdp, cfg, seed=4)
    t2 = run_sample_agent(small_mdp, cfg, seed=4)
    assert t1.to_csv() == t2.to_csv()
    assert len(t1.rows) == 6
    np.testing.assert_array_equal(t1.column("env_steps"), np.arange(6) * 50)
    assert np.isnan(t1.column("critic_loss")[0])
    assert (algorithm == "ResAC") == (not np.isnan(t1.column("res_critic_loss")[1]))
    d = solve_stationary(small_mdp, SoftmaxPolicy(6, 3)).joint
    assert t1.column("exact_J")[0] == pytest.approx(d @ small_mdp.reward, abs=1e-15)
    assert t1.to_csv() != run_sample_agent(small_mdp, cfg, seed=5).to_csv()


def test_zero_actor_lr_keeps_j_constant(small_mdp):
    cfg = SampleAgentConfig(algorithm="ActorG", episodes=4, episode_length=30, batch_size=30, actor_lr=0.0)
    j = run_sample_agent(small_mdp, cfg, seed=0).column("exact_J")
    assert np.all(j == j[0])


def test_default_hyperparameters():
    cfg = SampleAgentConfig()
    assert (cfg.episodes, cfg.batch_size, cfg.episode_length) == (1000, 300, 300)
    assert (cfg.actor_lr, cfg.critic_lr, cfg.res_critic_lr, cfg.gamma) == (1e-2, 2e-2, 2e-2, 0.9)


@pytest.mark.parametrize("kwargs", [
    {"algorithm": "SAC"}, {"episodes": 0}, {"actor_lr": -1.0}, {"gamma": 1.0},
    {"eta": 0.0}, {"clip_c": -1.0}, {"optimizer": "rmsprop"},
])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        SampleAgentConfig(**kwargs)


def test_gamma_mismatch(small_mdp):
    with pytest.raises(ValueError):
        run_sample_agent(small_mdp, SampleAgentConfig(gamma=0.5, episodes=1), seed=0)


def test_empty_batches():
    pol = SoftmaxPolicy(2, 2)
    empty = TransitionBatch([], [], [], [], [])
    for call in (lambda: actor_g_objective(empty, pol, np.zeros(4)),
                 lambda: sample_critic_loss(empty, np.zeros(4), 0.9, 2),
                 lambda: actor_o_objective([], pol, np.zeros(4), actions=[])):
        with pytest.raises(ValueError):
            call()


def test_symmetric_bandit_expected_gradient_is_zero():
    pol = SoftmaxPolicy(1, 2)
    q = np.array([0.7, 0.7])
    rng = np.random.default_rng(11)
    states = np.zeros(10_000, dtype=np.int64)
    actions = sample_actions(pol, states, rng)
    _, g = actor_o_objective(states, pol, q, actions=actions)
    se = _per_sample_scores(pol, states, actions, q[actions]).std(axis=0) / np.sqrt(len(states))
    assert np.all(np.abs(g) <= 3 * se)
