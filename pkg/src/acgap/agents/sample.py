"""Sample-based actor-critic agents on a known tabular MDP.

Four algorithms share one episode loop: collect a fixed-length episode with
the current policy, then apply one actor update followed by critic (and, for
Res-AC, res-critic) updates computed on batches drawn from that episode.

* ``ActorO``  - actor uses fresh actions at stored initial states.
* ``ActorG``  - actor uses the episode's state-action pairs.
* ``StackAC`` - ``ActorO`` plus the regularized semi Stackelberg correction.
* ``ResAC``   - ``ActorG`` with ``q + w`` in place of ``q``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .. import kernels
from ..buffers import ReplayBuffer, TransitionBatch
from ..mdp import SoftmaxPolicy, TabularMdp, actor_objective, solve_stationary, values_of
from ..optim import ASCEND, DESCEND, Optimizer
from ..rng import make_rng
from ..stackelberg import stackelberg_cross_term_sampled
from ..trace import TrainingTrace

ALGORITHMS = ("ActorO", "ActorG", "StackAC", "ResAC")
USES_INITIAL_BUFFER = ("ActorO", "StackAC")


@dataclass
class SampleAgentConfig:
    algorithm: str = "ResAC"
    episodes: int = 1000
    batch_size: int = 300
    episode_length: int = 300
    actor_lr: float = 1e-2
    critic_lr: float = 2e-2
    res_critic_lr: float = 2e-2
    gamma: float = 0.9
    eta: float = 0.5
    clip_c: Optional[float] = None
    critic_steps: int = 1
    res_critic_steps: int = 1
    optimizer: str = "adam"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        for name in ("episodes", "batch_size", "episode_length", "critic_steps", "res_critic_steps"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("actor_lr", "critic_lr", "res_critic_lr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.clip_c is not None and self.clip_c <= 0:
            raise ValueError("clip_c must be positive when given")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")

    def to_dict(self) -> dict:
        return asdict(self)


def _cumulative(rows: np.ndarray) -> np.ndarray:
    cum = np.cumsum(rows, axis=1)
    return cum / cum[:, -1:]


def collect_episode(mdp: TabularMdp, policy: SoftmaxPolicy, rng: np.random.Generator,
                    episode_length: int = 300, cum_transition=None):
    """Roll out one episode from ``s0 ~ mu0``.

    Returns ``(batch, s0)`` with exactly ``episode_length`` SARSA tuples.
    """
    if cum_transition is None:
        cum_transition = _cumulative(mdp.transition)
    s0 = int(rng.choice(mdp.n_states, p=mdp.init_dist))
    uniforms = rng.random(2 * episode_length + 1)
    states, actions = kernels.rollout(_cumulative(policy.table), cum_transition, s0, uniforms,
                                      mdp.n_actions, episode_length)
    sa = states[:-1] * mdp.n_actions + actions[:-1]
    batch = TransitionBatch(states[:-1], actions[:-1], mdp.reward[sa], states[1:], actions[1:])
    return batch, s0


def sample_actions(policy: SoftmaxPolicy, states, rng: np.random.Generator) -> np.ndarray:
    states = np.asarray(states, dtype=np.int64)
    cum = _cumulative(policy.table)[states]
    u = rng.random(len(states))[:, None]
    return np.minimum((u >= cum).sum(axis=1), policy.n_actions - 1)


def _score(policy: SoftmaxPolicy, states, actions, values, weights) -> tuple[float, np.ndarray]:
    """Objective ``sum_k w_k log pi(a_k|s_k) v_k`` and its gradient (values held fixed)."""
    states = np.asarray(states, dtype=np.int64)
    actions = np.asarray(actions, dtype=np.int64)
    coef = weights * values
    logp = np.log(policy.table[states, actions])
    grad = kernels.score_gradient(states, actions, coef, policy.table)
    return float(coef @ logp), grad


def _uniform(n: int) -> np.ndarray:
    if n == 0:
        raise ValueError("empty batch")
    return np.full(n, 1.0 / n)


def actor_o_objective(states, policy: SoftmaxPolicy, critic, rng=None, actions=None, weights=None):
    """Initial-state actor objective ``mean log pi(a|s) q(s,a)`` with ``a ~ pi``.

    The ``(1 - gamma)`` factor of the exact objective is omitted.
    """
    states = np.asarray(states, dtype=np.int64)
    w = _uniform(len(states)) if weights is None else np.asarray(weights, dtype=float)
    if actions is None:
        actions = sample_actions(policy, states, rng)
    q = values_of(critic)
    values = q[states * policy.n_actions + np.asarray(actions)]
    return _score(policy, states, actions, values, w)


def actor_g_objective(batch: TransitionBatch, policy: SoftmaxPolicy, critic):
    if len(batch) == 0:
        raise ValueError("empty batch")
    q = values_of(critic)
    values = q[batch.state * policy.n_actions + batch.action]
    return _score(policy, batch.state, batch.action, values, batch.weights())


def res_actor_objective(batch: TransitionBatch, policy: SoftmaxPolicy, critic, res_critic):
    if len(batch) == 0:
        raise ValueError("empty batch")
    sa = batch.state * policy.n_actions + batch.action
    values = values_of(critic)[sa] + values_of(res_critic)[sa]
    return _score(policy, batch.state, batch.action, values, batch.weights())


def _td_loss(batch: TransitionBatch, table, reward, gamma: float, n_actions: int):
    sa = batch.state * n_actions + batch.action
    nxt = batch.next_state * n_actions + batch.next_action
    err = table[sa] - (reward + gamma * table[nxt])
    w = batch.weights()
    grad = np.bincount(sa, weights=2.0 * w * err, minlength=table.size)
    return float(w @ err**2), grad


def sample_critic_loss(batch: TransitionBatch, critic, gamma: float, n_actions: int):
    """Semi-gradient TD loss ``mean (q(s,a) - (r + gamma q'(s',a')))^2``.

    The gradient flows only through ``q(s,a)``.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    return _td_loss(batch, values_of(critic), batch.reward, gamma, n_actions)


def sample_residual(batch: TransitionBatch, critic, gamma: float, n_actions: int, clip_c=None):
    """Per-transition TD error of the critic, optionally clipped to ``[-c, c]``."""
    q = values_of(critic)
    sa = batch.state * n_actions + batch.action
    nxt = batch.next_state * n_actions + batch.next_action
    delta = batch.reward + gamma * q[nxt] - q[sa]
    if clip_c is not None:
        delta = np.clip(delta, -clip_c, clip_c)
    return delta


def res_critic_loss(batch: TransitionBatch, critic, res_critic, gamma: float, n_actions: int,
                    clip_c=None):
    """TD loss for ``w`` with the critic's (frozen) TD error as reward."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    delta = sample_residual(batch, critic, gamma, n_actions, clip_c)
    return _td_loss(batch, values_of(res_critic), delta, gamma, n_actions)


class StackUpdate(NamedTuple):
    direction: np.ndarray
    actor_term: np.ndarray
    correction: np.ndarray


def stack_actor_update(initial_states, batch: TransitionBatch, policy: SoftmaxPolicy, critic,
                       eta: float, gamma: float, rng=None, actions=None,
                       initial_weights=None) -> StackUpdate:
    """Sampled, eta-regularized semi Stackelberg actor direction.

    The semi-Hessian and the actor's semi-derivative are both estimated by
    the batch's empirical state-action distribution; pairs absent from the
    batch contribute only through ``eta``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive for the sampled Stackelberg update")
    if len(batch) == 0 or len(initial_states) == 0:
        raise ValueError("empty batch")
    _, actor_term = actor_o_objective(initial_states, policy, critic, rng, actions, initial_weights)
    n_pairs = policy.dim
    sa = batch.state * policy.n_actions + batch.action
    emp = np.bincount(sa, weights=batch.weights(), minlength=n_pairs)
    cross = stackelberg_cross_term_sampled(batch, policy, critic, gamma)
    correction = -cross @ (emp / (emp + eta))
    return StackUpdate(actor_term + correction, actor_term, correction)


def _discounted_return(rewards: np.ndarray, gamma: float) -> float:
    return float((1.0 - gamma) * np.dot(gamma ** np.arange(len(rewards)), rewards))


SAMPLE_COLUMNS = ("episode", "env_steps", "exact_J", "empirical_return", "critic_loss",
                  "res_critic_loss", "critic_pred", "res_pred")


def run_sample_agent(mdp: TabularMdp, config: SampleAgentConfig, seed: int) -> TrainingTrace:
    """Train one agent for ``config.episodes`` episodes; row 0 is the initial policy."""
    if abs(config.gamma - mdp.gamma) > 1e-15:
        raise ValueError(f"config gamma {config.gamma} differs from MDP gamma {mdp.gamma}")
    S, A = mdp.n_states, mdp.n_actions
    rng = make_rng(seed, 1)
    policy = SoftmaxPolicy(S, A)
    q = np.zeros(S * A)
    w = np.zeros(S * A)
    actor_opt = Optimizer(S * A, config.actor_lr, ASCEND, config.optimizer)
    critic_opt = Optimizer(S * A, config.critic_lr, DESCEND, config.optimizer)
    res_opt = Optimizer(S * A, config.res_critic_lr, DESCEND, config.optimizer)
    cum_p = _cumulative(mdp.transition)
    initial = ReplayBuffer(kind="initial")
    episode = ReplayBuffer(capacity=config.episode_length, kind="episode")
    algo = config.algorithm
    is_res = algo == "ResAC"

    trace = TrainingTrace(SAMPLE_COLUMNS)

    def record(ep, emp_ret, c_loss, w_loss):
        d = solve_stationary(mdp, policy).joint
        trace.append(
            episode=ep, env_steps=ep * config.episode_length, exact_J=float(d @ mdp.reward),
            empirical_return=emp_ret, critic_loss=c_loss,
            res_critic_loss=w_loss if is_res else None,
            critic_pred=actor_objective(mdp, policy, q),
            res_pred=actor_objective(mdp, policy, q + w) if is_res else None,
        )

    record(0, None, None, None)
    for ep in range(1, config.episodes + 1):
        episode.clear()
        batch_all, s0 = collect_episode(mdp, policy, rng, config.episode_length, cum_p)
        if algo in USES_INITIAL_BUFFER:
            initial.add(s0)
        episode.extend_batch(batch_all)

        if algo in USES_INITIAL_BUFFER:
            init_states = initial.sample(rng, config.batch_size)
        batch = episode.sample(rng, config.batch_size)
        if algo == "ActorO":
            _, g = actor_o_objective(init_states, policy, q, rng)
        elif algo == "ActorG":
            _, g = actor_g_objective(batch, policy, q)
        elif algo == "ResAC":
            _, g = res_actor_objective(batch, policy, q, w)
        else:
            g = stack_actor_update(init_states, batch, policy, q, config.eta, config.gamma, rng).direction
        if config.actor_lr > 0:
            policy.logits = actor_opt.step(policy.logits, g)

        c_loss = None
        for _ in range(config.critic_steps):
            c_loss, gq = sample_critic_loss(episode.sample(rng, config.batch_size), q, config.gamma, A)
            q = critic_opt.step(q, gq)
        w_loss = None
        if is_res:
            for _ in range(config.res_critic_steps):
                w_loss, gw = res_critic_loss(episode.sample(rng, config.batch_size), q, w,
                                             config.gamma, A, config.clip_c)
                w = res_opt.step(w, gw)
        record(ep, _discounted_return(batch_all.reward, config.gamma), c_loss, w_loss)
    trace.final_params = {"logits": policy.logits.copy(), "critic": q, "res_critic": w}
    return trace
