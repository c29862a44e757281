import numpy as np
import pytest

from acgap.agents.dp import DpAgentConfig, actor_direction, run_dp
from acgap.envs import random_mdp
from acgap.gradients import grad_policy_exact
from acgap.mdp import SoftmaxPolicy, solve_stationary
from acgap.verify import oracles


@pytest.fixture(scope="module")
def mdp():
    return random_mdp(5, 3, seed=8, gamma=0.9)


def _j(trace):
    return np.asarray(trace.column("J"))


def test_defaults():
    cfg = DpAgentConfig()
    assert (cfg.actor_lr, cfg.critic_lr, cfg.iterations) == (1e-2, 2e-2, 2000)


def test_aliases():
    assert DpAgentConfig(critic_rule="BR").critic_rule == "BellmanResidualFull"
    assert DpAgentConfig(critic_rule="TD").critic_rule == "TemporalDifferenceSemi"


@pytest.mark.parametrize("kwargs", [
    {"actor_rule": "SAC"}, {"critic_rule": "MC"}, {"actor_rule": "PG", "critic_rule": "None"},
    {"actor_lr": -1.0}, {"iterations": 0}, {"eta": -1.0}, {"res_critic_rule": "ExactEvaluation"},
])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        DpAgentConfig(**kwargs)


def test_row_zero_is_initial_policy(mdp):
    t = run_dp(mdp, DpAgentConfig(iterations=3))
    assert list(t.column("iteration")) == [0, 1, 2, 3]
    d = solve_stationary(mdp, SoftmaxPolicy(5, 3)).joint
    assert _j(t)[0] == pytest.approx(d @ mdp.reward, abs=1e-15)
    assert np.isnan(t.column("J_w")).all()


def test_exact_critic_makes_actor_g_equal_pg(mdp):
    pg = _j(run_dp(mdp, DpAgentConfig("PG", "Exact", iterations=60)))
    ag = _j(run_dp(mdp, DpAgentConfig("ActorG", "Exact", iterations=60)))
    np.testing.assert_allclose(ag, pg, atol=1e-10)


@pytest.mark.parametrize("critic", ["BR", "TD"])
def test_stackelberg_tracks_pg(mdp, critic):
    pg = _j(run_dp(mdp, DpAgentConfig("PG", critic, iterations=40)))
    for rule in ("StackFull", "StackSemi"):
        st = _j(run_dp(mdp, DpAgentConfig(rule, critic, iterations=40)))
        np.testing.assert_allclose(st, pg, atol=1e-8)


def test_actor_direction_pg(mdp):
    pol = SoftmaxPolicy(5, 3, np.random.default_rng(0).standard_normal(15))
    np.testing.assert_array_equal(actor_direction(mdp, pol, np.zeros(15), np.zeros(15), DpAgentConfig()),
                                  grad_policy_exact(mdp, pol))


def test_policy_iteration(mdp):
    t = run_dp(mdp, DpAgentConfig("Greedy", "Exact", iterations=mdp.n_pairs))
    j = _j(t)
    assert np.all(np.diff(j[1:]) >= -1e-12)
    assert j[-1] == pytest.approx(oracles.optimal_objective(mdp), abs=1e-9)


def test_q_learning_runs(mdp):
    j = _j(run_dp(mdp, DpAgentConfig("Greedy", "TD", iterations=200, critic_lr=0.05)))
    assert np.all(np.isfinite(j))


def test_res_ac_records_res_objective(mdp):
    t = run_dp(mdp, DpAgentConfig("ResAC", "TD", iterations=20))
    jw = np.asarray(t.column("J_w"))
    assert np.all(np.isfinite(jw)) and np.all(jw >= 0)
    assert np.all(np.isfinite(_j(t)))


def test_zero_actor_lr(mdp):
    j = _j(run_dp(mdp, DpAgentConfig("ActorO", "TD", actor_lr=0.0, iterations=10)))
    assert np.all(j == j[0])


def test_pg_improves(mdp):
    j = _j(run_dp(mdp, DpAgentConfig("PG", "Exact", iterations=500)))
    assert j[-1] > j[0]
    assert j[-1] <= oracles.optimal_objective(mdp) + 1e-12
