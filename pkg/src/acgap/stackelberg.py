"""Stackelberg (actor-as-leader) gradients for a tabular critic.

The leader's total derivative is
``dJ_pi/dtheta - C @ solve(Hess, dJ_pi/dq)`` where ``C[i, j]`` is the
derivative of the critic's gradient component ``j`` with respect to
``theta_i`` and ``Hess`` is the critic's Hessian (or semi-Hessian).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .buffers import TransitionBatch
from .gradients import grad_actor_o, stationary_derivative
from .mdp import (
    SoftmaxPolicy,
    TabularMdp,
    psi_matrix,
    residual,
    solve_stationary,
    values_of,
)

SUPPORT_FLOOR = 1e-300
SINGULAR_EIG = 1e-12
LSTSQ_EIG = 1e-10


class SingularHessianError(np.linalg.LinAlgError):
    """The critic Hessian is numerically singular (full support violated)."""


@dataclass
class StackelbergTerms:
    cross_term: np.ndarray
    hessian: np.ndarray
    semi_hessian: np.ndarray
    dq_jpi: np.ndarray
    dq_jpi_semi: np.ndarray
    eta: float = 0.0


def _check_full_support(mdp: TabularMdp, policy: SoftmaxPolicy) -> None:
    if np.any(mdp.init_dist <= SUPPORT_FLOOR) or np.any(policy.probs <= SUPPORT_FLOOR):
        raise ValueError("Stackelberg gradient needs full-support mu0 and policy")


def _next_value_jacobian(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> np.ndarray:
    """``M[i, s] = d/dtheta_i sum_a pi(s,a) q(s,a)``, shape ``(dim, S)``."""
    q = values_of(critic)
    return (policy.jacobian * q[None, :]) @ mdp.marginalizer().T


def semi_cross_term(mdp: TabularMdp, policy: SoftmaxPolicy, critic, weights=None) -> np.ndarray:
    """Derivative of the semi-gradient ``-D delta`` with respect to ``theta``.

    ``weights=None`` uses the on-policy occupancy and differentiates through
    it; an explicit ``weights`` vector is treated as fixed.
    """
    M = _next_value_jacobian(mdp, policy, critic)
    d_delta = mdp.gamma * (M @ mdp.transition.T)  # [i, sa] = d delta(sa) / d theta_i
    if weights is None:
        d = solve_stationary(mdp, policy).joint
        delta = residual(mdp, policy, critic)
        return -(stationary_derivative(mdp, policy) * delta[None, :]) - d_delta * d[None, :]
    return -d_delta * np.asarray(weights, dtype=float)[None, :]


def full_cross_term(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> np.ndarray:
    """Derivative of ``-Psi^T D_theta delta`` through ``Psi``, ``D_theta`` and ``delta``."""
    d = solve_stationary(mdp, policy).joint
    delta = residual(mdp, policy, critic)
    psi = psi_matrix(mdp, policy)
    u = mdp.transition.T @ (d * delta)
    through_psi = mdp.gamma * policy.jacobian * np.repeat(u, mdp.n_actions)[None, :]
    M = _next_value_jacobian(mdp, policy, critic)
    inner = stationary_derivative(mdp, policy) * delta[None, :] + mdp.gamma * (M @ mdp.transition.T) * d[None, :]
    return through_psi - inner @ psi


def stackelberg_terms(mdp: TabularMdp, policy: SoftmaxPolicy, critic, eta: float = 0.0) -> StackelbergTerms:
    d = solve_stationary(mdp, policy).joint
    psi = psi_matrix(mdp, policy)
    return StackelbergTerms(
        cross_term=full_cross_term(mdp, policy, critic),
        hessian=psi.T @ (d[:, None] * psi),
        semi_hessian=np.diag(d),
        dq_jpi=(1.0 - mdp.gamma) * policy.expansion.T @ mdp.init_dist,
        dq_jpi_semi=d,
        eta=float(eta),
    )


def _spd_solve(hessian: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    hessian = 0.5 * (hessian + hessian.T)
    smallest = scipy.linalg.eigvalsh(hessian, subset_by_index=[0, 0])[0]
    if smallest < SINGULAR_EIG:
        raise SingularHessianError(f"critic Hessian smallest eigenvalue {smallest:.3e}")
    if smallest < LSTSQ_EIG:
        return np.linalg.lstsq(hessian, rhs, rcond=None)[0]
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(hessian), rhs)


def stackelberg_gradient_full(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> np.ndarray:
    """Leader gradient against a Bellman-residual critic at its best response."""
    _check_full_support(mdp, policy)
    t = stackelberg_terms(mdp, policy, critic)
    return grad_actor_o(mdp, policy, critic) - t.cross_term @ _spd_solve(t.hessian, t.dq_jpi)


def stackelberg_gradient_semi(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> np.ndarray:
    """Leader gradient against a TD (semi-gradient) critic.

    The semi-Hessian is ``D_theta`` and the semi-derivative of the actor
    objective is ``d_theta``, so the solve reduces to a vector of ones.
    """
    _check_full_support(mdp, policy)
    d = solve_stationary(mdp, policy).joint
    if np.min(d) < SINGULAR_EIG:
        raise SingularHessianError(f"occupancy entry {np.min(d):.3e} too small")
    cross = semi_cross_term(mdp, policy, critic)
    return grad_actor_o(mdp, policy, critic) - cross @ (d / d)


def stackelberg_gradient_regularized(
    mdp: TabularMdp, policy: SoftmaxPolicy, critic, eta: float, weights=None
) -> np.ndarray:
    """Semi Stackelberg gradient with ``(D + eta I)`` in place of ``D``.

    ``weights=None`` means on-policy ``d_theta`` (differentiated); explicit
    weights, e.g. an empirical replay distribution, are held fixed.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    d = solve_stationary(mdp, policy).joint
    w = d if weights is None else np.asarray(weights, dtype=float)
    if eta == 0 and np.min(w) <= 0:
        raise ValueError("eta > 0 is required when weights lack full support")
    cross = semi_cross_term(mdp, policy, critic, weights)
    return grad_actor_o(mdp, policy, critic) - cross @ (d / (w + eta))


def stackelberg_cross_term_sampled(batch: TransitionBatch, policy: SoftmaxPolicy, critic, gamma: float) -> np.ndarray:
    """Sample estimate of the semi cross term with the batch distribution frozen.

    Each transition contributes ``-w_k * d delta_k / d theta`` in column
    ``(s_k, a_k)``, where the per-sample residual uses the expected next value
    ``sum_a' pi(s', a') q(s', a')``. The dependence of the sampling
    distribution on ``theta`` is invisible to a batch, so this estimates
    ``d/dtheta(-D' delta)`` with ``D'`` fixed and is biased with respect to the
    on-policy cross term.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    S, A = policy.n_states, policy.n_actions
    q = values_of(critic).reshape(S, A)
    p = policy.table
    grad_next_value = p * (q - (p * q).sum(axis=1, keepdims=True))  # block s' of dV(s')/dtheta
    cross = np.zeros((S, A, S * A))
    sa = batch.state * A + batch.action
    contrib = -gamma * batch.weights()[:, None] * grad_next_value[batch.next_state]
    np.add.at(cross, (batch.next_state, slice(None), sa), contrib)
    return cross.reshape(S * A, S * A)
