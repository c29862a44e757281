"""Exact (model-based) training loops over the actor-update x critic-update grid.

Each iteration runs the critic phase (and the res-critic phase for ResAC)
against the current policy, then one actor step using the updated critic.
With ``critic_rule="ExactEvaluation"`` the critic is replaced by the true
Q-values; ``actor_rule="Greedy"`` replaces the policy by a near-greedy one.
Greedy + ExactEvaluation is policy iteration, Greedy + TD semi-gradient is
on-policy Q-learning.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..gradients import (
    grad_actor_g,
    grad_actor_o,
    grad_critic_full,
    grad_critic_semi,
    grad_policy_exact,
    grad_res_actor,
    greedy_policy,
)
from ..mdp import (
    SoftmaxPolicy,
    TabularMdp,
    critic_objective,
    expected_next_values,
    psi_transpose_apply,
    residual,
    solve_q_values,
    solve_stationary,
)
from ..optim import ASCEND, DESCEND, Optimizer
from ..stackelberg import (
    stackelberg_gradient_full,
    stackelberg_gradient_regularized,
    stackelberg_gradient_semi,
)
from ..trace import TrainingTrace

ACTOR_RULES = ("PG", "ActorO", "ActorG", "StackFull", "StackSemi", "ResAC", "Greedy")
CRITIC_RULES = ("BellmanResidualFull", "TemporalDifferenceSemi", "ExactEvaluation", "None")
DP_COLUMNS = ("iteration", "J", "J_q", "J_w")

# short names used in configs and on the command line
CRITIC_ALIASES = {"BR": "BellmanResidualFull", "TD": "TemporalDifferenceSemi",
                  "Exact": "ExactEvaluation", None: "None"}


@dataclass
class DpAgentConfig:
    actor_rule: str = "PG"
    critic_rule: str = "ExactEvaluation"
    actor_lr: float = 1e-2
    critic_lr: float = 2e-2
    res_critic_lr: float = 2e-2
    iterations: int = 2000
    eta: float = 0.0
    critic_steps: int = 1
    res_critic_steps: int = 1
    res_critic_rule: str = "TemporalDifferenceSemi"
    optimizer: str = "adam"

    def __post_init__(self):
        self.critic_rule = CRITIC_ALIASES.get(self.critic_rule, self.critic_rule)
        self.res_critic_rule = CRITIC_ALIASES.get(self.res_critic_rule, self.res_critic_rule)
        if self.actor_rule not in ACTOR_RULES:
            raise ValueError(f"actor_rule must be one of {ACTOR_RULES}, got {self.actor_rule!r}")
        if self.critic_rule not in CRITIC_RULES:
            raise ValueError(f"critic_rule must be one of {CRITIC_RULES}, got {self.critic_rule!r}")
        if self.actor_rule == "PG" and self.critic_rule == "None":
            raise ValueError("PG needs a critic rule (ExactEvaluation, BR or TD) for its J_q trace")
        if self.res_critic_rule not in ("BellmanResidualFull", "TemporalDifferenceSemi"):
            raise ValueError("res_critic_rule must be BellmanResidualFull or TemporalDifferenceSemi")
        for name in ("actor_lr", "critic_lr", "res_critic_lr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("iterations", "critic_steps", "res_critic_steps"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")

    def to_dict(self) -> dict:
        return asdict(self)


def _res_critic_gradient(mdp, policy, res_reward, w, weights, rule) -> np.ndarray:
    res_delta = res_reward + mdp.gamma * expected_next_values(mdp, policy, w) - w
    if rule == "TemporalDifferenceSemi":
        return grad_critic_semi(res_delta, weights)
    return -psi_transpose_apply(mdp, policy, weights * res_delta)


def res_critic_objective(mdp, policy, res_reward, w, weights) -> float:
    res_delta = res_reward + mdp.gamma * expected_next_values(mdp, policy, w) - w
    return float(0.5 * np.dot(weights, res_delta**2))


def actor_direction(mdp: TabularMdp, policy: SoftmaxPolicy, q, w, config: DpAgentConfig) -> np.ndarray:
    rule = config.actor_rule
    if rule == "PG":
        return grad_policy_exact(mdp, policy)
    if rule == "ActorO":
        return grad_actor_o(mdp, policy, q)
    if rule == "ActorG":
        return grad_actor_g(mdp, policy, q)
    if rule == "ResAC":
        return grad_actor_g(mdp, policy, q) + grad_res_actor(mdp, policy, w)
    if rule == "StackFull":
        return stackelberg_gradient_full(mdp, policy, q)
    if rule == "StackSemi":
        if config.eta > 0:
            return stackelberg_gradient_regularized(mdp, policy, q, config.eta)
        return stackelberg_gradient_semi(mdp, policy, q)
    raise ValueError(f"no gradient for actor rule {rule!r}")


def run_dp(mdp: TabularMdp, config: DpAgentConfig, seed: int = 0, initial_logits=None) -> TrainingTrace:
    """Exact training loop; row 0 of the trace is the initial state.

    Starts from uniform logits and a zero critic, so ``seed`` only labels the
    run; it is accepted for interface symmetry with the sample agents.
    """
    S, A = mdp.n_states, mdp.n_actions
    policy = SoftmaxPolicy(S, A, initial_logits)
    q = np.zeros(S * A)
    w = np.zeros(S * A)
    actor_opt = Optimizer(S * A, config.actor_lr, ASCEND, config.optimizer)
    critic_opt = Optimizer(S * A, config.critic_lr, DESCEND, config.optimizer)
    res_opt = Optimizer(S * A, config.res_critic_lr, DESCEND, config.optimizer)
    is_res = config.actor_rule == "ResAC"
    trace = TrainingTrace(DP_COLUMNS)

    def record(it):
        d = solve_stationary(mdp, policy).joint
        j_w = None
        if is_res:
            j_w = res_critic_objective(mdp, policy, residual(mdp, policy, q), w, d)
        trace.append(iteration=it, J=float(d @ mdp.reward), J_q=critic_objective(mdp, policy, q, d), J_w=j_w)

    record(0)
    for it in range(1, config.iterations + 1):
        rule = config.critic_rule
        if rule == "ExactEvaluation":
            q = solve_q_values(mdp, policy)
        elif rule != "None":
            for _ in range(config.critic_steps):
                d = solve_stationary(mdp, policy).joint
                if rule == "BellmanResidualFull":
                    g = grad_critic_full(mdp, policy, q, d)
                else:
                    g = grad_critic_semi(residual(mdp, policy, q), d)
                q = critic_opt.step(q, g)
        if is_res:
            d = solve_stationary(mdp, policy).joint
            res_reward = residual(mdp, policy, q)
            for _ in range(config.res_critic_steps):
                g = _res_critic_gradient(mdp, policy, res_reward, w, d, config.res_critic_rule)
                w = res_opt.step(w, g)
        if config.actor_rule == "Greedy":
            policy = greedy_policy(q, S, A)
        elif config.actor_lr > 0:
            policy.logits = actor_opt.step(policy.logits, actor_direction(mdp, policy, q, w, config))
        record(it)
    trace.final_params = {"logits": policy.logits.copy(), "critic": q, "res_critic": w}
    return trace
