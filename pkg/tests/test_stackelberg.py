import numpy as np
import pytest

from acgap.buffers import TransitionBatch
from acgap.envs import bandit
from acgap.gradients import gap_corrections, grad_actor_o, grad_policy_exact
from acgap.mdp import SoftmaxPolicy, TabularMdp, critic_objective, solve_q_values, solve_stationary
from acgap.stackelberg import (
    SingularHessianError,
    semi_cross_term,
    stackelberg_cross_term_sampled,
    stackelberg_gradient_full,
    stackelberg_gradient_regularized,
    stackelberg_gradient_semi,
    stackelberg_terms,
)
from acgap.verify import oracles
from acgap.verify.harness import exhaustive_batch

from conftest import make_instance


@pytest.mark.parametrize("seed", range(100))
def test_full_and_semi_equal_pg(seed):
    mdp, pol, critic = make_instance(seed, 2 + seed % 5, 2 + seed % 2, (0.5, 0.9, 0.99)[seed % 3])
    pg = grad_policy_exact(mdp, pol)
    assert np.max(np.abs(stackelberg_gradient_full(mdp, pol, critic) - pg)) < 1e-8
    assert np.max(np.abs(stackelberg_gradient_semi(mdp, pol, critic) - pg)) < 1e-8


def test_exact_critic(instance):
    mdp, pol, _ = instance
    q = solve_q_values(mdp, pol)
    pg = grad_policy_exact(mdp, pol)
    assert np.max(np.abs(stackelberg_gradient_full(mdp, pol, q) - pg)) < 1e-8
    assert np.max(np.abs(stackelberg_gradient_semi(mdp, pol, q) - pg)) < 1e-8


def test_symmetric_bandit():
    mdp = bandit([2.0, 2.0])
    pol = SoftmaxPolicy(1, 2)
    np.testing.assert_allclose(stackelberg_gradient_full(mdp, pol, np.array([0.3, -1.0])), 0.0, atol=1e-12)


def test_semi_equals_actor_o_plus_full_correction(gamma_instance):
    mdp, pol, critic = gamma_instance
    full, _, _ = gap_corrections(mdp, pol, critic)
    expected = grad_actor_o(mdp, pol, critic) + full
    assert np.max(np.abs(stackelberg_gradient_semi(mdp, pol, critic) - expected)) < 1e-8


class TestRegularized:
    def test_eta_zero_is_semi(self, instance):
        mdp, pol, critic = instance
        g0 = stackelberg_gradient_regularized(mdp, pol, critic, 0.0)
        assert np.max(np.abs(g0 - stackelberg_gradient_semi(mdp, pol, critic))) < 1e-10

    def test_large_eta_is_actor_o(self, instance):
        mdp, pol, critic = instance
        g = stackelberg_gradient_regularized(mdp, pol, critic, 1e12)
        assert np.linalg.norm(g - grad_actor_o(mdp, pol, critic)) < 1e-6

    def test_default_eta_is_between(self, instance):
        mdp, pol, critic = instance
        base = grad_actor_o(mdp, pol, critic)
        corr = [np.linalg.norm(stackelberg_gradient_regularized(mdp, pol, critic, eta) - base)
                for eta in (0.0, 0.5, 1e12)]
        assert np.all(np.isfinite(corr))
        assert corr[0] > corr[1] > corr[2]

    def test_continuous_in_eta(self, instance):
        mdp, pol, critic = instance
        a = stackelberg_gradient_regularized(mdp, pol, critic, 0.5)
        b = stackelberg_gradient_regularized(mdp, pol, critic, 0.5 + 1e-6)
        assert np.linalg.norm(a - b) <= 10 * 1e-6

    def test_explicit_weights_without_support_need_eta(self, instance):
        mdp, pol, critic = instance
        w = np.zeros(12)
        w[0] = 1.0
        with pytest.raises(ValueError):
            stackelberg_gradient_regularized(mdp, pol, critic, 0.0, weights=w)
        assert np.all(np.isfinite(stackelberg_gradient_regularized(mdp, pol, critic, 0.5, weights=w)))

    def test_negative_eta(self, instance):
        with pytest.raises(ValueError):
            stackelberg_gradient_regularized(*instance, -1.0)


class TestTerms:
    def test_hessian_spd_and_semi_diag(self, instance):
        mdp, pol, critic = instance
        t = stackelberg_terms(mdp, pol, critic)
        np.testing.assert_allclose(t.hessian, t.hessian.T, atol=1e-14)
        assert np.min(np.linalg.eigvalsh(t.hessian)) > 0
        np.testing.assert_array_equal(np.diag(t.semi_hessian), solve_stationary(mdp, pol).joint)

    def test_hessian_matches_second_differences(self, instance):
        mdp, pol, critic = instance
        d = solve_stationary(mdp, pol).joint
        t = stackelberg_terms(mdp, pol, critic)
        fd = oracles.second_central_difference(lambda q: critic_objective(mdp, pol, q, d), critic)
        assert oracles.relative_error(t.hessian, fd) < 1e-3


class TestSupport:
    def test_zero_initial_mass_rejected(self):
        mdp = TabularMdp(2, 2, np.full((4, 2), 0.5), [1, 0, 0, 1], [1.0, 0.0], 0.9)
        with pytest.raises(ValueError):
            stackelberg_gradient_full(mdp, SoftmaxPolicy(2, 2), np.zeros(4))

    def test_vanishing_occupancy_raises(self):
        # state 1 is never reached: mu0 has mass 1e-250 there, far below the eigenvalue floor
        mdp = TabularMdp(2, 2, [[1, 0], [1, 0], [1, 0], [1, 0]], [1, 0, 0, 1], [1 - 1e-250, 1e-250], 0.9)
        with pytest.raises(SingularHessianError):
            stackelberg_gradient_semi(mdp, SoftmaxPolicy(2, 2), np.zeros(4))
        with pytest.raises(SingularHessianError):
            stackelberg_gradient_full(mdp, SoftmaxPolicy(2, 2), np.zeros(4))


class TestSampledCrossTerm:
    def test_exhaustive_matches_frozen_distribution_term(self, gamma_instance):
        mdp, pol, critic = gamma_instance
        d = solve_stationary(mdp, pol).joint
        sampled = stackelberg_cross_term_sampled(exhaustive_batch(mdp, pol), pol, critic, mdp.gamma)
        frozen = semi_cross_term(mdp, pol, critic, weights=d)
        assert np.max(np.abs(sampled - frozen)) < 1e-8

    def test_sampled_is_biased_against_on_policy_term(self, instance):
        mdp, pol, critic = instance
        sampled = stackelberg_cross_term_sampled(exhaustive_batch(mdp, pol), pol, critic, mdp.gamma)
        assert np.max(np.abs(sampled - semi_cross_term(mdp, pol, critic))) > 1e-3

    def test_single_transition_single_state(self):
        mdp = TabularMdp(1, 2, [[1.0], [1.0]], [0.0, 1.0], [1.0], 0.8)
        pol = SoftmaxPolicy(1, 2, [0.2, -0.4])
        q = np.array([0.5, 2.0])
        batch = TransitionBatch([0], [1], [1.0], [0], [0])
        cross = stackelberg_cross_term_sampled(batch, pol, q, mdp.gamma)

        def frozen_semi(th):
            # -(1) * delta for the single sampled pair, with the sampling weight frozen at 1
            pi = oracles.softmax_probs(th, 1, 2)
            return -(1.0 + 0.8 * pi @ q - q[1])

        fd = oracles.central_difference(frozen_semi, pol.logits)
        np.testing.assert_allclose(cross[:, 1], fd, atol=1e-9)
        np.testing.assert_array_equal(cross[:, 0], 0.0)

    def test_empty_batch(self, instance):
        mdp, pol, critic = instance
        empty = TransitionBatch([], [], [], [], [])
        with pytest.raises(ValueError):
            stackelberg_cross_term_sampled(empty, pol, critic, mdp.gamma)
