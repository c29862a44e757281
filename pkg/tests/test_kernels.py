import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acgap import _fallback, kernels
from acgap.envs import random_mdp
from acgap.mdp import SoftmaxPolicy

try:
    from acgap._ext import _kernels as compiled
except ImportError:
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _problem(seed, S, A, length):
    mdp = random_mdp(S, A, seed=seed)
    rng = np.random.default_rng(seed)
    pol = SoftmaxPolicy(S, A, 3 * rng.standard_normal(S * A))
    return (np.cumsum(pol.table, axis=1), np.cumsum(mdp.transition, axis=1),
            int(rng.integers(S)), rng.random(2 * length + 1), A, length), pol, mdp


@needs_ext
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), S=st.integers(1, 8), A=st.integers(1, 4), length=st.integers(0, 60))
def test_rollout_backends_identical(seed, S, A, length):
    args, _, _ = _problem(seed, S, A, length)
    for x, y in zip(_fallback.rollout(*args), compiled.rollout(*args)):
        assert x.dtype == y.dtype == np.int64
        np.testing.assert_array_equal(x, y)


@needs_ext
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), S=st.integers(1, 6), A=st.integers(1, 4), n=st.integers(1, 40))
def test_score_backends_identical(seed, S, A, n):
    rng = np.random.default_rng(seed)
    probs = SoftmaxPolicy(S, A, rng.standard_normal(S * A)).table
    s, a, c = rng.integers(S, size=n), rng.integers(A, size=n), rng.standard_normal(n)
    np.testing.assert_array_equal(_fallback.score_gradient(s, a, c, probs), compiled.score_gradient(s, a, c, probs))


def test_rollout_follows_dynamics():
    args, _, mdp = _problem(3, 5, 3, 200)
    states, actions = kernels.rollout(*args)
    assert len(states) == len(actions) == 201
    assert states[0] == args[2]
    P = mdp.transition
    for t in range(200):
        assert P[states[t] * 3 + actions[t], states[t + 1]] > 0


def test_rollout_edge_uniforms():
    cum_pi = np.array([[0.5, 1.0]])
    cum_p = np.array([[1.0], [1.0]])
    states, actions = kernels.rollout(cum_pi, cum_p, 0, np.array([0.0, 0.3, 0.5, 0.9999, 0.49999]), 2, 2)
    np.testing.assert_array_equal(actions, [0, 1, 0])
    np.testing.assert_array_equal(states, [0, 0, 0])


def test_score_gradient_matches_definition():
    rng = np.random.default_rng(0)
    pol = SoftmaxPolicy(3, 2, rng.standard_normal(6))
    s, a, c = np.array([0, 2, 2]), np.array([1, 0, 0]), np.array([0.5, -1.0, 2.0])
    expected = np.zeros(6)
    for sk, ak, ck in zip(s, a, c):
        g = -pol.table[sk].copy()
        g[ak] += 1.0
        expected[sk * 2:(sk + 1) * 2] += ck * g
    np.testing.assert_allclose(kernels.score_gradient(s, a, c, pol.table), expected, atol=1e-15)


def test_backend_selection_env_var():
    code = "from acgap import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, ACGAP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("python", "cython")
    if compiled is not None:
        assert kernels.BACKEND == "cython"
