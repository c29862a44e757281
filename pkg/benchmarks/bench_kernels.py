"""Compare the compiled and pure-Python kernels on FourRoom-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--length L]

Also checks that both backends return identical arrays on every input.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from acgap import _fallback
from acgap.envs import fourroom_mdp
from acgap.mdp import SoftmaxPolicy
from acgap.rng import make_rng

try:
    from acgap._ext import _kernels as compiled
except ImportError:
    compiled = None


def _inputs(length: int, seed: int = 0):
    mdp = fourroom_mdp()
    rng = make_rng(seed, 99)
    policy = SoftmaxPolicy(mdp.n_states, mdp.n_actions, rng.standard_normal(mdp.n_pairs))
    cum_pi = np.cumsum(policy.table, axis=1)
    cum_p = np.cumsum(mdp.transition, axis=1)
    uniforms = rng.random(2 * length + 1)
    states = rng.integers(mdp.n_states, size=length)
    actions = rng.integers(mdp.n_actions, size=length)
    coef = rng.standard_normal(length)
    return mdp, policy, cum_pi, cum_p, uniforms, states, actions, coef


def bench(repeats: int = 20, length: int = 300) -> dict:
    mdp, policy, cum_pi, cum_p, u, states, actions, coef = _inputs(length)
    A = mdp.n_actions
    calls = {
        "rollout": lambda k: k.rollout(cum_pi, cum_p, 0, u, A, length),
        "score_gradient": lambda k: k.score_gradient(states, actions, coef, policy.table),
    }
    rows = {}
    for name, call in calls.items():
        py = min(timeit.repeat(lambda: call(_fallback), number=1, repeat=repeats))
        row = {"python_ms": py * 1e3}
        if compiled is not None:
            a, b = call(_fallback), call(compiled)
            same = all(np.array_equal(x, y) for x, y in zip(a, b)) if isinstance(a, tuple) else np.array_equal(a, b)
            cy = min(timeit.repeat(lambda: call(compiled), number=1, repeat=repeats))
            row.update(cython_ms=cy * 1e3, speedup=py / cy, identical=bool(same))
        rows[name] = row
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--length", type=int, default=300)
    args = p.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<16}{'python ms':>12}{'cython ms':>12}{'speedup':>10}  identical")
    for name, r in bench(args.repeats, args.length).items():
        if "cython_ms" in r:
            print(f"{name:<16}{r['python_ms']:>12.4f}{r['cython_ms']:>12.4f}{r['speedup']:>9.1f}x  {r['identical']}")
        else:
            print(f"{name:<16}{r['python_ms']:>12.4f}{'-':>12}{'-':>10}  -")


if __name__ == "__main__":
    main()
