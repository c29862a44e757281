"""Identity and oracle checks over seeded families of random tabular MDPs.

Every check compares a closed form against either another closed form
(tight absolute tolerance) or an oracle from :mod:`acgap.verify.oracles`
(finite differences, series or full state-action solves; relative
tolerance). Checks reach the code under test through module attributes, so
monkeypatching e.g. ``acgap.gradients.stationary_derivative`` is seen here.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .. import gradients as _gradients
from .. import mdp as _mdp
from .. import stackelberg as _stackelberg
from ..buffers import TransitionBatch
from ..envs import random_mdp
from ..rng import make_rng
from . import oracles

CLOSED_TOL = 1e-9
STACK_TOL = 1e-8
SCALAR_TOL = 1e-10
FD_TOL = 1e-4
ETA_LIMIT_TOL = 1e-6
ETA_LIMIT = 1e12

DEFAULT_STATES = (2, 3, 4, 6)
DEFAULT_ACTIONS = (2, 3)
DEFAULT_GAMMAS = (0.5, 0.9, 0.99)


class Instance(NamedTuple):
    mdp: _mdp.TabularMdp
    policy: _mdp.SoftmaxPolicy
    critic: np.ndarray
    seed: int


@dataclass(frozen=True)
class InstanceFamily:
    """Seeded generator of ``(mdp, policy, critic)`` triples."""

    states: tuple = DEFAULT_STATES
    actions: tuple = DEFAULT_ACTIONS
    gammas: tuple = DEFAULT_GAMMAS
    logit_scale: float = 1.0
    critic_scale: float = 1.0

    def __post_init__(self):
        if not self.states or not self.actions or not self.gammas:
            raise ValueError("instance family needs at least one S, A and gamma")
        if min(self.states) < 1 or min(self.actions) < 1:
            raise ValueError("S and A must be positive")

    def make(self, seed: int) -> Instance:
        rng = make_rng(seed, 7)
        S = int(rng.choice(self.states))
        A = int(rng.choice(self.actions))
        gamma = float(rng.choice(self.gammas))
        mdp = random_mdp(S, A, seed=int(rng.integers(2**31)), gamma=gamma)
        logits = self.logit_scale * rng.standard_normal(S * A)
        critic = self.critic_scale * rng.standard_normal(S * A)
        return Instance(mdp, _mdp.SoftmaxPolicy(S, A, logits), critic, seed)


def _abs_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def _residual_fn(mdp, critic):
    """``theta -> delta_theta`` built from raw logits (oracle side)."""
    S, A = mdp.n_states, mdp.n_actions
    q = np.asarray(critic, dtype=float)

    def delta(theta):
        pi = oracles.softmax_probs(theta, S, A).reshape(S, A)
        v_next = (pi * q.reshape(S, A)).sum(axis=1)
        return mdp.reward + mdp.gamma * (mdp.transition @ v_next) - q

    return delta


# -- checks: each returns the error measure for one instance ------------------

def check_upsilon_fd(inst: Instance) -> float:
    """Closed-form occupancy derivative vs finite differences of the occupancy."""
    mdp, policy = inst.mdp, inst.policy
    fd = oracles.central_difference(lambda th: oracles.direct_occupancy(mdp, th), policy.logits)
    return oracles.relative_error(_gradients.stationary_derivative(mdp, policy), fd)


def check_gap_closed(inst: Instance) -> float:
    """``PG - actor_o = d(d^T delta)``, ``PG - actor_g = Upsilon delta`` and ``actor_g - actor_o = dprime``."""
    report = _gradients.gradient_report(inst.mdp, inst.policy, inst.critic)
    return max(report.identity_errors().values())


def check_gap_fd(inst: Instance) -> float:
    """PG vs FD of ``J`` and the full gap correction vs FD of ``d^T delta``."""
    mdp, policy, critic = inst.mdp, inst.policy, inst.critic
    delta = _residual_fn(mdp, critic)
    fd_j = oracles.central_difference(lambda th: oracles.direct_objective(mdp, th), policy.logits)
    fd_gap = oracles.central_difference(lambda th: oracles.direct_occupancy(mdp, th) @ delta(th), policy.logits)
    full, _, _ = _gradients.gap_corrections(mdp, policy, critic)
    return max(
        oracles.relative_error(_gradients.grad_policy_exact(mdp, policy), fd_j),
        oracles.relative_error(full, fd_gap),
    )


def check_stackelberg_full(inst: Instance) -> float:
    pg = _gradients.grad_policy_exact(inst.mdp, inst.policy)
    return _abs_err(_stackelberg.stackelberg_gradient_full(inst.mdp, inst.policy, inst.critic), pg)


def check_stackelberg_semi(inst: Instance) -> float:
    pg = _gradients.grad_policy_exact(inst.mdp, inst.policy)
    return _abs_err(_stackelberg.stackelberg_gradient_semi(inst.mdp, inst.policy, inst.critic), pg)


def check_eta_limit(inst: Instance) -> float:
    """Very large ``eta`` switches the correction off, leaving the actor_o gradient."""
    g = _stackelberg.stackelberg_gradient_regularized(inst.mdp, inst.policy, inst.critic, ETA_LIMIT)
    return _abs_err(g, _gradients.grad_actor_o(inst.mdp, inst.policy, inst.critic))


def check_scalar_gap(inst: Instance) -> float:
    """``J(theta) - J_pi(theta, q) = d^T delta`` for an arbitrary critic."""
    mdp, policy, critic = inst.mdp, inst.policy, inst.critic
    j = oracles.direct_objective(mdp, policy.logits)
    j_pi = _mdp.actor_objective(mdp, policy, critic)
    d = _mdp.solve_stationary(mdp, policy).joint
    return abs((j - j_pi) - d @ _mdp.residual(mdp, policy, critic))


def check_res_closure(inst: Instance) -> float:
    """Exact res-critic for an arbitrary critic closes both the value and the gradient gap."""
    mdp, policy, critic = inst.mdp, inst.policy, inst.critic
    w = _mdp.solve_res_q_values(mdp, policy, _mdp.residual(mdp, policy, critic))
    direction = _gradients.grad_actor_g(mdp, policy, critic) + _gradients.grad_res_actor(mdp, policy, w)
    q_true = oracles.direct_values(mdp, policy.logits)
    return max(_abs_err(direction, _gradients.grad_policy_exact(mdp, policy)),
               _abs_err(critic + w, q_true))


def check_critic_gradients_fd(inst: Instance) -> float:
    """Critic gradients and cross terms vs finite differences.

    BR: ``d/dq 0.5 d^T delta^2`` and its ``theta``-derivative (full cross
    term). TD: ``theta``-derivative of ``-D delta`` (semi cross term).
    """
    mdp, policy, critic = inst.mdp, inst.policy, inst.critic
    S, A = mdp.n_states, mdp.n_actions
    d = oracles.direct_occupancy(mdp, policy.logits)

    def br_loss(q):
        return 0.5 * d @ _residual_fn(mdp, q)(policy.logits) ** 2

    def br_grad(theta):
        delta = _residual_fn(mdp, critic)(theta)
        d_th = oracles.direct_occupancy(mdp, theta)
        pi = oracles.softmax_probs(theta, S, A).reshape(S, A)
        inflow = mdp.transition.T @ (d_th * delta)
        return -(d_th * delta - mdp.gamma * (pi * inflow[:, None]).ravel())

    def semi_grad(theta):
        return -oracles.direct_occupancy(mdp, theta) * _residual_fn(mdp, critic)(theta)

    errs = [
        oracles.relative_error(
            _gradients.grad_critic_full(mdp, policy, critic, _mdp.solve_stationary(mdp, policy).joint),
            oracles.central_difference(br_loss, critic),
        ),
        oracles.relative_error(_stackelberg.full_cross_term(mdp, policy, critic),
                               oracles.central_difference(br_grad, policy.logits)),
        oracles.relative_error(_stackelberg.semi_cross_term(mdp, policy, critic),
                               oracles.central_difference(semi_grad, policy.logits)),
    ]
    return max(errs)


class Check(NamedTuple):
    name: str
    func: Callable[[Instance], float]
    tolerance: float
    relative: bool


CHECKS = (
    Check("stationary_derivative_fd", check_upsilon_fd, FD_TOL, True),
    Check("gap_identities_closed", check_gap_closed, CLOSED_TOL, False),
    Check("gap_identities_fd", check_gap_fd, FD_TOL, True),
    Check("stackelberg_full_equals_pg", check_stackelberg_full, STACK_TOL, False),
    Check("stackelberg_semi_equals_pg", check_stackelberg_semi, STACK_TOL, False),
    Check("stackelberg_eta_limit", check_eta_limit, ETA_LIMIT_TOL, False),
    Check("scalar_gap", check_scalar_gap, SCALAR_TOL, False),
    Check("res_critic_closure", check_res_closure, CLOSED_TOL, False),
    Check("critic_gradients_fd", check_critic_gradients_fd, FD_TOL, True),
)
CHECK_NAMES = tuple(c.name for c in CHECKS)


@dataclass
class CheckResult:
    name: str
    instances_run: int
    max_abs_error: float
    tolerance: float
    passed: bool
    relative: bool = False
    worst_seed: Optional[int] = None
    errors: list = field(default_factory=list, repr=False)


@dataclass
class VerificationReport:
    checks: list
    seed_range: tuple
    wall_time: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        out = []
        for c in self.checks:
            row = asdict(c)
            row.pop("errors")
            out.append(row)
        return {"passed": self.passed, "seed_range": list(self.seed_range),
                "wall_time": self.wall_time, "checks": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"seeds {self.seed_range[0]}..{self.seed_range[1] - 1}, {self.wall_time:.2f}s"]
        for c in self.checks:
            kind = "rel" if c.relative else "abs"
            flag = "PASS" if c.passed else "FAIL"
            lines.append(f"{flag}  {c.name:<28} n={c.instances_run:<4} "
                         f"err={c.max_abs_error:.3e} ({kind}) tol={c.tolerance:.0e}")
        lines.append("all checks passed" if self.passed else "verification FAILED")
        return "\n".join(lines)


def _run_instance(args):
    family, seed, names = args
    inst = family.make(seed)
    return [(c.name, float(c.func(inst))) for c in CHECKS if c.name in names]


def verify_all(family: Optional[InstanceFamily] = None, tolerances: Optional[dict] = None,
               seed_range=(0, 100), checks=None, jobs: int = 1) -> VerificationReport:
    """Run the registered checks on every seed in ``range(*seed_range)``.

    Parameters
    ----------
    family : InstanceFamily, optional
        Instance generator; defaults to S in {2,3,4,6}, A in {2,3},
        gamma in {0.5, 0.9, 0.99}.
    tolerances : dict, optional
        Per-check overrides of the default tolerance.
    checks : iterable of str, optional
        Subset of ``CHECK_NAMES``.
    jobs : int
        Worker processes; monkeypatched checks only take effect with 1.
    """
    family = family or InstanceFamily()
    tolerances = dict(tolerances or {})
    names = tuple(CHECK_NAMES if checks is None else checks)
    unknown = set(names) - set(CHECK_NAMES) | set(tolerances) - set(CHECK_NAMES)
    if unknown:
        raise KeyError(f"unknown checks {sorted(unknown)}")
    lo, hi = int(seed_range[0]), int(seed_range[1])
    if hi <= lo:
        raise ValueError("empty seed range")
    start = time.perf_counter()
    work = [(family, s, names) for s in range(lo, hi)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_seed = list(pool.map(_run_instance, work))
    else:
        per_seed = [_run_instance(w) for w in work]
    results = []
    for check in CHECKS:
        if check.name not in names:
            continue
        errs = [dict(row)[check.name] for row in per_seed]
        tol = float(tolerances.get(check.name, check.tolerance))
        worst = int(np.argmax(errs))
        results.append(CheckResult(
            name=check.name, instances_run=len(errs), max_abs_error=float(errs[worst]),
            tolerance=tol, passed=bool(all(e <= tol for e in errs)), relative=check.relative,
            worst_seed=lo + worst, errors=errs,
        ))
    return VerificationReport(results, (lo, hi), time.perf_counter() - start)


# -- sampled Stackelberg bias --------------------------------------------------

EXHAUSTIVE = None


def exhaustive_batch(mdp: _mdp.TabularMdp, policy: _mdp.SoftmaxPolicy) -> TransitionBatch:
    """Every ``(s, a, s')`` triple weighted by ``d(s, a) P(s'|s, a)``.

    The batch stands for the on-policy replay distribution with infinitely
    many samples; next actions are irrelevant to the cross term and set to 0.
    """
    d = _mdp.solve_stationary(mdp, policy).joint
    flow = d[:, None] * mdp.transition
    sa, nxt = np.nonzero(flow > 0)
    return TransitionBatch(
        state=sa // mdp.n_actions, action=sa % mdp.n_actions, reward=mdp.reward[sa],
        next_state=nxt, next_action=np.zeros_like(nxt), weight=flow[sa, nxt],
    )


def sampled_batch(mdp: _mdp.TabularMdp, policy: _mdp.SoftmaxPolicy, size: int,
                  rng: np.random.Generator) -> TransitionBatch:
    """``size`` i.i.d. transitions from ``d(s, a) P(s'|s, a)`` with uniform weights."""
    d = _mdp.solve_stationary(mdp, policy).joint
    flow = (d[:, None] * mdp.transition).ravel()
    idx = rng.choice(flow.size, size=size, p=flow / flow.sum())
    sa, nxt = np.divmod(idx, mdp.n_states)
    return TransitionBatch(
        state=sa // mdp.n_actions, action=sa % mdp.n_actions, reward=mdp.reward[sa],
        next_state=nxt, next_action=np.zeros_like(nxt),
    )


def sampled_stackelberg_update(mdp, policy, critic, batch: TransitionBatch) -> np.ndarray:
    """Semi Stackelberg direction with the cross term from ``batch`` (``D'`` frozen)."""
    cross = _stackelberg.stackelberg_cross_term_sampled(batch, policy, critic, mdp.gamma)
    return _gradients.grad_actor_o(mdp, policy, critic) - cross @ np.ones(policy.dim)


def measure_stackelberg_bias(instance, batch_sizes=(10, 100, 1000, EXHAUSTIVE), seed: int = 0,
                             repeats: int = 5) -> list[tuple]:
    """Table of ``(batch_size, ||sampled update - exact PG||_2)``.

    ``batch_size=None`` uses the exhaustive (population) batch. Finite batch
    sizes are averaged over ``repeats`` draws. The exhaustive gap equals
    ``||Upsilon delta||``: the frozen-distribution estimator recovers the
    actor_g direction, not the policy gradient.
    """
    if isinstance(instance, Instance):
        mdp, policy, critic = instance.mdp, instance.policy, instance.critic
    else:
        mdp, policy, critic = instance
    pg = _gradients.grad_policy_exact(mdp, policy)
    rng = make_rng(seed, 11)
    table = []
    for size in batch_sizes:
        if size is EXHAUSTIVE:
            g = sampled_stackelberg_update(mdp, policy, critic, exhaustive_batch(mdp, policy))
            table.append((None, float(np.linalg.norm(g - pg))))
            continue
        if int(size) < 1:
            raise ValueError("batch sizes must be positive")
        gaps = [np.linalg.norm(sampled_stackelberg_update(
            mdp, policy, critic, sampled_batch(mdp, policy, int(size), rng)) - pg) for _ in range(repeats)]
        table.append((int(size), float(np.mean(gaps))))
    return table
