"""Pure-Python implementations of the hot kernels.

Semantics match ``acgap._ext._kernels`` exactly: given the same inputs both
return identical arrays.
"""
from __future__ import annotations

from bisect import bisect_right

import numpy as np


def rollout(cum_pi, cum_p, s0, uniforms, n_actions, length):
    """Inverse-CDF rollout of ``length`` steps plus the trailing action.

    ``uniforms[2t]`` draws the action at step ``t`` and ``uniforms[2t+1]``
    the next state; ``2*length + 1`` uniforms are consumed.
    """
    pi_rows = np.asarray(cum_pi, dtype=float).tolist()
    p_rows = np.asarray(cum_p, dtype=float).tolist()
    u = np.asarray(uniforms, dtype=float).tolist()
    last_a = len(pi_rows[0]) - 1
    last_s = len(p_rows[0]) - 1
    states = [0] * (length + 1)
    actions = [0] * (length + 1)
    s = int(s0)
    for t in range(length + 1):
        a = min(bisect_right(pi_rows[s], u[2 * t]), last_a)
        states[t] = s
        actions[t] = a
        if t < length:
            s = min(bisect_right(p_rows[s * n_actions + a], u[2 * t + 1]), last_s)
    return np.array(states, dtype=np.int64), np.array(actions, dtype=np.int64)


def score_gradient(states, actions, coef, probs):
    """``sum_k coef_k * grad log pi(a_k | s_k)`` for a tabular softmax.

    ``probs`` is the ``(S, A)`` probability table; the result is flat
    ``S*A``.
    """
    S, A = probs.shape
    states = np.asarray(states, dtype=np.int64)
    coef = np.asarray(coef, dtype=float)
    grad = np.bincount(states * A + np.asarray(actions, dtype=np.int64), weights=coef, minlength=S * A)
    per_state = np.bincount(states, weights=coef, minlength=S)
    return grad - (per_state[:, None] * probs).ravel()
