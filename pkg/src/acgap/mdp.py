"""Tabular MDP data model and exact solvers.

Everything is dense and indexed state-major: the flat index of the pair
``(s, a)`` is ``s * n_actions + a``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROW_TOL = 1e-12


def _readonly(x):
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True)
class TabularMdp:
    """Finite MDP ``(P, r, mu0, gamma)``.

    ``transition`` has shape ``(S*A, S)`` with ``transition[s*A + a, s'] =
    Pr(s' | s, a)``; ``reward`` has length ``S*A``.
    """

    n_states: int
    n_actions: int
    transition: np.ndarray
    reward: np.ndarray
    init_dist: np.ndarray
    gamma: float

    def __post_init__(self):
        S, A = int(self.n_states), int(self.n_actions)
        if S < 1 or A < 1:
            raise ValueError("n_states and n_actions must be positive")
        P = _readonly(self.transition).reshape(S * A, S)
        r = _readonly(self.reward).reshape(S * A)
        mu0 = _readonly(self.init_dist).reshape(S)
        object.__setattr__(self, "n_states", S)
        object.__setattr__(self, "n_actions", A)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "init_dist", mu0)
        object.__setattr__(self, "gamma", float(self.gamma))
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > ROW_TOL:
            raise ValueError("transition rows must be probability vectors")
        if np.any(mu0 < 0) or abs(mu0.sum() - 1.0) > ROW_TOL:
            raise ValueError("init_dist must be a probability vector")
        if not np.all(np.isfinite(r)):
            raise ValueError("reward must be finite")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    def marginalizer(self) -> np.ndarray:
        """The ``S x SA`` matrix summing a state-action vector over actions."""
        return np.kron(np.eye(self.n_states), np.ones((1, self.n_actions)))

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.gamma,
            "transition": self.transition.ravel().tolist(),
            "reward": self.reward.tolist(),
            "init_dist": self.init_dist.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TabularMdp":
        return cls(
            n_states=data["n_states"],
            n_actions=data["n_actions"],
            transition=data["transition"],
            reward=data["reward"],
            init_dist=data["init_dist"],
            gamma=data["gamma"],
        )


def save_mdp(mdp: TabularMdp, path) -> None:
    Path(path).write_text(json.dumps(mdp.to_dict()))


def load_mdp(path) -> TabularMdp:
    return TabularMdp.from_dict(json.loads(Path(path).read_text()))


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of an ``(S, A)`` array with max-subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class SoftmaxPolicy:
    """Per-state softmax over tabular logits.

    The probabilities, the expanded matrix ``Pi`` (``S x SA``) and the
    Jacobian ``H[i, j] = d pi_j / d theta_i`` are recomputed whenever
    ``logits`` is assigned.
    """

    def __init__(self, n_states: int, n_actions: int, logits=None):
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        if logits is None:
            logits = np.zeros(self.n_states * self.n_actions)
        self.logits = logits

    @property
    def logits(self) -> np.ndarray:
        return self._logits

    @logits.setter
    def logits(self, value) -> None:
        S, A = self.n_states, self.n_actions
        theta = np.array(value, dtype=float).reshape(S * A)
        if not np.all(np.isfinite(theta)):
            raise ValueError("logits must be finite")
        self._logits = theta
        self._table = softmax_rows(theta.reshape(S, A))
        self._probs = self._table.ravel()
        self._expansion = None
        self._jacobian = None

    @property
    def dim(self) -> int:
        return self.n_states * self.n_actions

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def table(self) -> np.ndarray:
        """Probabilities as an ``(S, A)`` array."""
        return self._table

    @property
    def expansion(self) -> np.ndarray:
        if self._expansion is None:
            S, A = self.n_states, self.n_actions
            Pi = np.zeros((S, S, A))
            Pi[np.arange(S), np.arange(S), :] = self._table
            self._expansion = Pi.reshape(S, S * A)
        return self._expansion

    @property
    def jacobian(self) -> np.ndarray:
        if self._jacobian is None:
            S, A = self.n_states, self.n_actions
            p = self._table
            blocks = p[:, :, None] * (np.eye(A)[None] - p[:, None, :])
            blocks = np.swapaxes(blocks, 1, 2)  # [s, a_i, a] = pi(s,a)(1[a=a_i] - pi(s,a_i))
            H = np.zeros((S, A, S, A))
            H[np.arange(S), :, np.arange(S), :] = blocks
            self._jacobian = H.reshape(S * A, S * A)
        return self._jacobian

    def jacobian_vector(self, x: np.ndarray) -> np.ndarray:
        """``H @ x`` without forming ``H`` (block-wise ``pi * (x - pi.x)``)."""
        xs = np.asarray(x, dtype=float).reshape(self.n_states, self.n_actions)
        p = self._table
        return (p * (xs - (p * xs).sum(axis=1, keepdims=True))).ravel()

    def copy(self) -> "SoftmaxPolicy":
        return SoftmaxPolicy(self.n_states, self.n_actions, self._logits.copy())


@dataclass
class CriticTable:
    """Directly parametrized critic ``q_phi = phi``."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("critic values must be finite")


@dataclass
class ResCriticTable:
    """Directly parametrized residual critic ``w_psi = psi``."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("res-critic values must be finite")


def values_of(x) -> np.ndarray:
    """Accept a critic table or a raw array."""
    return np.asarray(getattr(x, "values", x), dtype=float)


@dataclass(frozen=True)
class StationaryDistribution:
    joint: np.ndarray
    state_marginal: np.ndarray = field(repr=False)


def policy_matrix(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    """``P @ Pi``: the ``SA x SA`` state-action transition matrix."""
    return mdp.transition @ policy.expansion


def psi_matrix(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    """``Psi = I - gamma P Pi``."""
    return np.eye(mdp.n_pairs) - mdp.gamma * policy_matrix(mdp, policy)


def expected_next_values(mdp: TabularMdp, policy: SoftmaxPolicy, values) -> np.ndarray:
    """``P Pi v``: expected next state-action value under the policy."""
    v = np.asarray(values, dtype=float).reshape(mdp.n_states, mdp.n_actions)
    return mdp.transition @ (policy.table * v).sum(axis=1)


def psi_transpose_apply(mdp: TabularMdp, policy: SoftmaxPolicy, x) -> np.ndarray:
    """``Psi^T x = x - gamma Pi^T P^T x`` without forming ``Psi``."""
    x = np.asarray(x, dtype=float)
    inflow = mdp.transition.T @ x
    return x - mdp.gamma * (policy.table * inflow[:, None]).ravel()


def state_transition(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    """``Pi P``: the ``S x S`` state chain induced by the policy."""
    P = mdp.transition.reshape(mdp.n_states, mdp.n_actions, mdp.n_states)
    return np.einsum("sa,sat->st", policy.table, P)


def solve_stationary(mdp: TabularMdp, policy: SoftmaxPolicy) -> StationaryDistribution:
    """Discounted state-action occupancy, solved exactly.

    ``d = (1-gamma) Pi^T mu0 + gamma Pi^T P^T d`` factors as ``d = Pi^T d_S``
    with ``(I - gamma (Pi P)^T) d_S = (1-gamma) mu0``, so one LU solve of size
    ``S`` replaces the ``SA``-sized system.
    """
    lhs = np.eye(mdp.n_states) - mdp.gamma * state_transition(mdp, policy).T
    d_s = np.linalg.solve(lhs, (1.0 - mdp.gamma) * mdp.init_dist)
    d = (policy.table * d_s[:, None]).ravel()
    return StationaryDistribution(joint=d, state_marginal=d.reshape(mdp.n_states, mdp.n_actions).sum(axis=1))


def solve_linear_values(mdp: TabularMdp, policy: SoftmaxPolicy, reward) -> np.ndarray:
    """On-policy values of an arbitrary state-action reward: ``Psi^{-1} reward``.

    Solved through the state values ``v = Pi q``: ``(I - gamma Pi P) v = Pi r``
    and then ``q = r + gamma P v``.
    """
    r = np.asarray(reward, dtype=float)
    r_pi = (policy.table * r.reshape(mdp.n_states, mdp.n_actions)).sum(axis=1)
    v = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * state_transition(mdp, policy), r_pi)
    return r + mdp.gamma * (mdp.transition @ v)


def solve_q_values(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    return solve_linear_values(mdp, policy, mdp.reward)


def solve_res_q_values(mdp: TabularMdp, policy: SoftmaxPolicy, residual_reward) -> np.ndarray:
    """Values ``w`` of the critic's residual treated as a reward."""
    return solve_linear_values(mdp, policy, residual_reward)


def policy_objective_pair(mdp: TabularMdp, policy: SoftmaxPolicy) -> tuple[float, float]:
    """Primal ``(1-gamma) mu0^T Pi q`` and dual ``d^T r`` forms of ``J``."""
    q = solve_q_values(mdp, policy)
    primal = actor_objective(mdp, policy, q)
    dual = solve_stationary(mdp, policy).joint @ mdp.reward
    return float(primal), float(dual)


def policy_objective(mdp: TabularMdp, policy: SoftmaxPolicy, check: bool = True) -> float:
    """Cumulative discounted reward objective ``J(theta)``, normalized by ``1-gamma``.

    With ``check`` the primal and dual forms are both evaluated and must agree
    to 1e-10 (scaled by the reward magnitude).
    """
    if not check:
        return float(solve_stationary(mdp, policy).joint @ mdp.reward)
    primal, dual = policy_objective_pair(mdp, policy)
    scale = max(1.0, float(np.max(np.abs(mdp.reward))))
    if abs(primal - dual) > 1e-10 * scale:
        raise ArithmeticError(f"primal/dual mismatch: {primal!r} vs {dual!r}")
    return dual


def residual(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> np.ndarray:
    """Bellman residual ``delta = r + gamma P Pi q - q``."""
    q = values_of(critic)
    return mdp.reward + mdp.gamma * expected_next_values(mdp, policy, q) - q


def actor_objective(mdp: TabularMdp, policy: SoftmaxPolicy, critic) -> float:
    """``J_pi = (1-gamma) mu0^T Pi q_phi``."""
    q = values_of(critic)
    v = (policy.table * q.reshape(mdp.n_states, mdp.n_actions)).sum(axis=1)
    return float((1.0 - mdp.gamma) * mdp.init_dist @ v)


def critic_objective(mdp: TabularMdp, policy: SoftmaxPolicy, critic, weights) -> float:
    """Weighted squared Bellman residual ``0.5 * sum_sa d(sa) delta(sa)^2``."""
    delta = residual(mdp, policy, critic)
    return float(0.5 * np.dot(np.asarray(weights, dtype=float), delta**2))
