"""Reference computations that share no code path with the closed forms.

Series solutions propagate distributions / values step by step, finite
differences perturb raw logits, and value iteration finds the optimum. None
of these call into the solvers they are used to check.
"""
from __future__ import annotations

import numpy as np


def _probs(logits, n_states, n_actions):
    z = np.asarray(logits, dtype=float).reshape(n_states, n_actions)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _horizon(gamma: float, tol: float = 1e-12) -> int:
    if gamma == 0:
        return 1
    return int(np.ceil(np.log(tol) / np.log(gamma))) + 1


def series_occupancy(mdp, logits, tol: float = 1e-12) -> np.ndarray:
    """``(1-gamma) sum_t gamma^t Pr(S_t, A_t)`` rolled forward in distribution space."""
    S, A = mdp.n_states, mdp.n_actions
    pi = _probs(logits, S, A)
    P = mdp.transition.reshape(S, A, S)
    state_dist = mdp.init_dist.copy()
    total = np.zeros((S, A))
    discount = 1.0
    for _ in range(_horizon(mdp.gamma, tol)):
        joint = state_dist[:, None] * pi
        total += discount * joint
        state_dist = np.einsum("sa,sat->t", joint, P)
        discount *= mdp.gamma
    return (1.0 - mdp.gamma) * total.ravel()


def series_values(mdp, logits, reward=None, tol: float = 1e-12) -> np.ndarray:
    """Truncated Neumann series ``sum_t (gamma P Pi)^t reward``."""
    S, A = mdp.n_states, mdp.n_actions
    pi = _probs(logits, S, A)
    P = mdp.transition.reshape(S, A, S)
    term = np.asarray(mdp.reward if reward is None else reward, dtype=float).reshape(S, A)
    total = np.zeros((S, A))
    scale = max(1.0, float(np.max(np.abs(term))))
    for _ in range(_horizon(mdp.gamma, tol / scale)):
        total += term
        next_v = (pi * term).sum(axis=1)
        term = mdp.gamma * np.einsum("sat,t->sa", P, next_v)
    return total.ravel()


def series_objective(mdp, logits) -> float:
    """Discounted return ``(1-gamma) E[sum gamma^t r_t]`` by forward propagation."""
    return float(series_occupancy(mdp, logits) @ mdp.reward)


def _pair_chain(mdp, pi) -> np.ndarray:
    """``SA x SA`` state-action chain built entry by entry from ``P`` and ``pi``."""
    S, A = mdp.n_states, mdp.n_actions
    P = mdp.transition.reshape(S * A, S)
    return (P[:, :, None] * pi[None, :, :]).reshape(S * A, S * A)


def direct_occupancy(mdp, logits) -> np.ndarray:
    """Occupancy from the full state-action flow equation, one dense solve."""
    S, A = mdp.n_states, mdp.n_actions
    pi = _probs(logits, S, A)
    source = (1.0 - mdp.gamma) * (mdp.init_dist[:, None] * pi).ravel()
    lhs = np.eye(S * A) - mdp.gamma * _pair_chain(mdp, pi).T
    return np.linalg.solve(lhs, source)


def direct_values(mdp, logits, reward=None) -> np.ndarray:
    """Q-values from ``q = r + g P Pi q`` solved at the state-action level."""
    S, A = mdp.n_states, mdp.n_actions
    pi = _probs(logits, S, A)
    r = np.asarray(mdp.reward if reward is None else reward, dtype=float).ravel()
    return np.linalg.solve(np.eye(S * A) - mdp.gamma * _pair_chain(mdp, pi), r)


def direct_objective(mdp, logits) -> float:
    return float(direct_occupancy(mdp, logits) @ mdp.reward)


def softmax_probs(logits, n_states, n_actions) -> np.ndarray:
    return _probs(logits, n_states, n_actions).ravel()


def central_difference(func, x, eps: float = 1e-5) -> np.ndarray:
    """Jacobian of ``func`` at ``x`` by central differences, shape ``(len(x), *out)``."""
    x = np.asarray(x, dtype=float)
    rows = []
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        rows.append((np.asarray(func(xp), dtype=float) - np.asarray(func(xm), dtype=float)) / (2 * eps))
    return np.array(rows)


def second_central_difference(func, x, eps: float = 1e-4) -> np.ndarray:
    """Hessian of scalar ``func`` by the four-point central stencil."""
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            vals = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                z = x.copy()
                z[i] += si * eps
                z[j] += sj * eps
                vals.append(func(z))
            out[i, j] = out[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * eps * eps)
    return out


def value_iteration(mdp, tol: float = 1e-13, max_iter: int = 100_000) -> np.ndarray:
    """Optimal Q-values ``q*``."""
    S, A = mdp.n_states, mdp.n_actions
    P = mdp.transition.reshape(S, A, S)
    r = mdp.reward.reshape(S, A)
    q = np.zeros((S, A))
    for _ in range(max_iter):
        q_new = r + mdp.gamma * np.einsum("sat,t->sa", P, q.max(axis=1))
        if np.max(np.abs(q_new - q)) < tol:
            return q_new.ravel()
        q = q_new
    return q.ravel()


def optimal_objective(mdp) -> float:
    """``J* = (1-gamma) mu0^T max_a q*``."""
    q = value_iteration(mdp).reshape(mdp.n_states, mdp.n_actions)
    return float((1.0 - mdp.gamma) * mdp.init_dist @ q.max(axis=1))


def relative_error(actual, expected, floor: float = 1e-8) -> float:
    actual, expected = np.asarray(actual, dtype=float), np.asarray(expected, dtype=float)
    if actual.size == 0:
        return 0.0
    return float(np.max(np.abs(actual - expected)) / max(float(np.max(np.abs(expected))), floor))
