# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-shot sampling loop for Gaussian states.

Semantics match kernels/_gauss_py.py exactly: same clamping, same outcome
convention (q = +1 iff the uniform draw is below the plus-probability), so
both implementations produce identical outcome masks for identical inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.uint64_t u64

DEF PROBABILITY_SLACK = 1e-9


def sample_rotated_shots(const double[:, ::1] gamma0, const double[:, ::1] rot,
                         const u64[::1] x_masks, const double[:, ::1] uniforms):
    """Pair outcomes per shot as uint64 masks (bit i set iff q_{i+1} = -1)."""
    cdef Py_ssize_t n_shots = x_masks.shape[0]
    cdef Py_ssize_t d = gamma0.shape[0]
    cdef Py_ssize_t n_pairs = d // 2
    if gamma0.shape[1] != d or rot.shape[0] != d or rot.shape[1] != d:
        raise ValueError("gamma0 and rot must be square matrices of matching size")
    if uniforms.shape[0] != n_shots or uniforms.shape[1] != n_pairs:
        raise ValueError("uniforms must have shape (n_shots, n_pairs)")

    out_arr = np.zeros(n_shots, dtype=np.uint64)
    sign_arr = np.empty(d, dtype=np.float64)
    tmp_arr = np.empty((d, d), dtype=np.float64)
    g_arr = np.empty((d, d), dtype=np.float64)
    u_arr = np.empty(d, dtype=np.float64)
    v_arr = np.empty(d, dtype=np.float64)
    cdef u64[::1] out = out_arr
    cdef double[::1] sign = sign_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] g = g_arr
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr

    cdef Py_ssize_t s, i, j, k, l, a, b
    cdef double acc, mean, p_plus, q, coef
    cdef u64 xm, qneg
    cdef int err = 0

    with nogil:
        for s in range(n_shots):
            xm = x_masks[s]
            for j in range(d):
                sign[j] = -1.0 if (xm >> j) & 1 else 1.0
            # tmp = (S_X gamma0 S_X) @ rot
            for j in range(d):
                for k in range(d):
                    acc = 0.0
                    for l in range(d):
                        acc += sign[j] * gamma0[j, l] * sign[l] * rot[l, k]
                    tmp[j, k] = acc
            # g = rot^T @ tmp
            for j in range(d):
                for k in range(d):
                    acc = 0.0
                    for l in range(d):
                        acc += rot[l, j] * tmp[l, k]
                    g[j, k] = acc

            qneg = 0
            for i in range(n_pairs):
                a = 2 * i
                b = a + 1
                mean = g[a, b]
                p_plus = 0.5 * (1.0 + mean)
                if p_plus < -PROBABILITY_SLACK or p_plus > 1.0 + PROBABILITY_SLACK:
                    err = 1
                    break
                if p_plus < 0.0:
                    p_plus = 0.0
                elif p_plus > 1.0:
                    p_plus = 1.0
                if uniforms[s, i] < p_plus:
                    q = 1.0
                else:
                    q = -1.0
                    qneg |= (<u64>1) << i
                if i + 1 == n_pairs:
                    break
                coef = 1.0 / (mean + q)
                # Rank-2 conditioning update, restricted to the unmeasured block.
                for j in range(b + 1, d):
                    u[j] = g[j, a]
                    v[j] = g[j, b]
                for j in range(b + 1, d):
                    for k in range(b + 1, d):
                        g[j, k] += coef * (v[j] * u[k] - u[j] * v[k])
            if err:
                break
            out[s] = qneg

    if err:
        raise ArithmeticError("pair probability outside [0,1]: unphysical state")
    return out_arr
