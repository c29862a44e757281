"""Closed-form policy, actor and critic gradients for tabular softmax policies.

All actor-side gradients have the form ``H Delta(w) v`` for some state-action
weighting ``w`` and value vector ``v``; they differ only in the choice of the
weighting (initial distribution, on-policy occupancy, next-state occupancy)
and the values (true Q-values, critic, res-critic).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .mdp import (
    CriticTable,
    SoftmaxPolicy,
    TabularMdp,
    psi_matrix,
    psi_transpose_apply,
    residual,
    solve_q_values,
    solve_stationary,
    values_of,
)

GREEDY_GAP = 40.0


def _weighted_jacobian(policy: SoftmaxPolicy, state_weights: np.ndarray, values) -> np.ndarray:
    """``H Delta(Xi^T w_S) v`` for a state weighting ``w_S``."""
    w = np.repeat(np.asarray(state_weights, dtype=float), policy.n_actions)
    return policy.jacobian_vector(w * values_of(values))


def grad_policy_exact(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    """Exact policy gradient ``H Delta(Xi^T d_S) q_theta``."""
    d_s = solve_stationary(mdp, policy).state_marginal
    return _weighted_jacobian(policy, d_s, solve_q_values(mdp, policy))


def grad_actor_o(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> np.ndarray:
    """Actor gradient from the objective view: initial-state weighting."""
    return (1.0 - mdp.gamma) * _weighted_jacobian(policy, mdp.init_dist, critic)


def grad_actor_g(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> np.ndarray:
    """Actor gradient from the gradient view: on-policy state weighting."""
    d_s = solve_stationary(mdp, policy).state_marginal
    return _weighted_jacobian(policy, d_s, critic)


def grad_res_actor(mdp: TabularMdp, policy: SoftmaxPolicy, res_critic) -> np.ndarray:
    """Res-critic correction ``H Delta(Xi^T d_S) w_psi``."""
    return grad_actor_g(mdp, policy, res_critic)


def stationary_derivative(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    """``Upsilon[i, sa] = d d_theta(s, a) / d theta_i``.

    Computed as ``H Delta(Xi^T d_S) Psi^{-1}``; the right multiplication by
    ``Psi^{-1}`` is done as a solve against ``Psi^T``.
    """
    d_s = solve_stationary(mdp, policy).state_marginal
    left = policy.jacobian * np.repeat(d_s, mdp.n_actions)[None, :]
    psi = psi_matrix(mdp, policy)
    return np.linalg.solve(psi.T, left.T).T


def next_state_weights(mdp: TabularMdp, d_joint: np.ndarray) -> np.ndarray:
    """``gamma P^T d``: discounted mass flowing into each next state."""
    return mdp.gamma * (mdp.transition.T @ d_joint)


def gap_corrections(mdp: TabularMdp, policy: SoftmaxPolicy, critic):
    """The three gradient gap terms for a critic.

    Returns ``(full, dprime, deltaprime)`` where ``full`` is the gradient of
    ``d^T delta`` with both dependencies active, ``dprime`` holds the
    occupancy fixed (only ``delta`` varies through the next-state policy) and
    ``deltaprime`` holds the residual fixed (only the occupancy varies).
    """
    d = solve_stationary(mdp, policy).joint
    delta = residual(mdp, policy, critic)
    # E_{(s,a)~d, s'~P} [gamma * sum_a' q(s',a') grad pi(s',a')]
    dprime = _weighted_jacobian(policy, next_state_weights(mdp, d), critic)
    deltaprime = stationary_derivative(mdp, policy) @ delta
    return dprime + deltaprime, dprime, deltaprime


def grad_critic_full(mdp: TabularMdp, policy: SoftmaxPolicy, critic, weights) -> np.ndarray:
    """Bellman-residual gradient ``-Psi^T D delta``."""
    delta = residual(mdp, policy, critic)
    return -psi_transpose_apply(mdp, policy, np.asarray(weights, dtype=float) * delta)


def grad_critic_semi(residual_vector, weights) -> np.ndarray:
    """TD semi-gradient ``-D delta``; the bootstrapped target is held fixed."""
    return -np.asarray(weights, dtype=float) * np.asarray(residual_vector, dtype=float)


def q_learning_update(critic, residual_vector, weights, alpha: float) -> CriticTable:
    """``q + alpha D delta``, i.e. ``(I - alpha D) q + alpha D q'``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    q = values_of(critic)
    return CriticTable(q - alpha * grad_critic_semi(residual_vector, weights))


def greedy_policy(critic, n_states: int, n_actions: int) -> SoftmaxPolicy:
    """Near-greedy softmax policy: logit ``GREEDY_GAP`` on the argmax, 0 elsewhere.

    Ties go to the lowest action index.
    """
    q = values_of(critic).reshape(n_states, n_actions)
    best = np.argmax(q, axis=1)
    logits = np.zeros((n_states, n_actions))
    logits[np.arange(n_states), best] = GREEDY_GAP
    return SoftmaxPolicy(n_states, n_actions, logits)


@dataclass
class GradientReport:
    grad_pg: np.ndarray
    grad_actor_o: np.ndarray
    grad_actor_g: np.ndarray
    correction_full: np.ndarray
    correction_dprime: np.ndarray
    correction_deltaprime: np.ndarray
    upsilon: np.ndarray

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in asdict(self).items()}

    def identity_errors(self) -> dict[str, float]:
        """Max-abs violations of the gap identities; all should be ~0."""

        def err(a, b):
            return float(np.max(np.abs(a - b))) if np.size(a) else 0.0

        return {
            "pg_vs_actor_o": err(self.grad_pg, self.grad_actor_o + self.correction_full),
            "pg_vs_actor_g": err(self.grad_pg, self.grad_actor_g + self.correction_deltaprime),
            "actor_g_vs_actor_o": err(self.grad_actor_g, self.grad_actor_o + self.correction_dprime),
            "upsilon_mass": float(np.max(np.abs(self.upsilon.sum(axis=1)))),
        }


def gradient_report(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> GradientReport:
    full, dprime, deltaprime = gap_corrections(mdp, policy, critic)
    return GradientReport(
        grad_pg=grad_policy_exact(mdp, policy),
        grad_actor_o=grad_actor_o(mdp, policy, critic),
        grad_actor_g=grad_actor_g(mdp, policy, critic),
        correction_full=full,
        correction_dprime=dprime,
        correction_deltaprime=deltaprime,
        upsilon=stationary_derivative(mdp, policy),
    )
