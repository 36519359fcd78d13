# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot per-step kernels.

Semantics match ``py_impl`` exactly; the quantizer is bit-identical to the
numpy path (the same elementwise IEEE operations), while ``mix`` may differ
from BLAS in the last ulp because of summation order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

NAME = "compiled"


def mix(double[:, ::1] W, double[:, ::1] X):
    cdef Py_ssize_t n = W.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    if X.shape[0] != n:
        raise ValueError("shape mismatch in mix")
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double w
    for i in range(n):
        for k in range(n):
            w = W[i, k]
            if w != 0.0:
                for j in range(d):
                    out[i, j] += w * X[k, j]
    return out_arr


def prob_quantize(double[::1] x, double delta_p, double[::1] u):
    cdef Py_ssize_t m = x.shape[0]
    if u.shape[0] != m:
        raise ValueError("shape mismatch in prob_quantize")
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double scaled, lo
    for i in range(m):
        scaled = x[i] * delta_p
        lo = floor(scaled)
        if u[i] < scaled - lo:
            lo += 1.0
        out[i] = lo / delta_p
    return out_arr
