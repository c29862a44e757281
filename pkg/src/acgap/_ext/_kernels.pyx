# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rollout and score-function kernels (see acgap._fallback for the reference)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _search(const double[:] row, double u) noexcept nogil:
    # first j with u < row[j]; clamp to the last index
    cdef Py_ssize_t lo = 0, hi = row.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if u < row[mid]:
            hi = mid
        else:
            lo = mid + 1
    if lo >= row.shape[0]:
        lo = row.shape[0] - 1
    return lo


def rollout(cum_pi, cum_p, long s0, uniforms, long n_actions, long length):
    cdef const double[:, :] pi_v = np.ascontiguousarray(cum_pi, dtype=np.float64)
    cdef const double[:, :] p_v = np.ascontiguousarray(cum_p, dtype=np.float64)
    cdef const double[:] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    if u.shape[0] < 2 * length + 1:
        raise ValueError("need 2*length+1 uniforms")
    states_arr = np.empty(length + 1, dtype=np.int64)
    actions_arr = np.empty(length + 1, dtype=np.int64)
    cdef cnp.int64_t[:] states = states_arr
    cdef cnp.int64_t[:] actions = actions_arr
    cdef Py_ssize_t t, s = s0, a
    with nogil:
        for t in range(length + 1):
            a = _search(pi_v[s], u[2 * t])
            states[t] = s
            actions[t] = a
            if t < length:
                s = _search(p_v[s * n_actions + a], u[2 * t + 1])
    return states_arr, actions_arr


def score_gradient(states, actions, coef, probs):
    cdef const cnp.int64_t[:] s_v = np.ascontiguousarray(states, dtype=np.int64)
    cdef const cnp.int64_t[:] a_v = np.ascontiguousarray(actions, dtype=np.int64)
    cdef const double[:] c_v = np.ascontiguousarray(coef, dtype=np.float64)
    cdef const double[:, :] p_v = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t S = p_v.shape[0], A = p_v.shape[1], k, j, s
    out_arr = np.zeros(S * A, dtype=np.float64)
    per_state_arr = np.zeros(S, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef double[:] per_state = per_state_arr
    with nogil:
        for k in range(s_v.shape[0]):
            out[s_v[k] * A + a_v[k]] += c_v[k]
            per_state[s_v[k]] += c_v[k]
        for s in range(S):
            for j in range(A):
                out[s * A + j] = out[s * A + j] - per_state[s] * p_v[s, j]
    return out_arr
