# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled decode kernel: one forward step of the windowed feed-forward net.

Same contract as _py_kernels.step_log_probs. The matrix products go through
BLAS dgemv; the win over the numpy fallback comes from skipping the Python
dispatch, gather, and temporary allocation between the ops of the sequential
per-token decode loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, tanh
from scipy.linalg.cython_blas cimport dgemv

BACKEND_NAME = "c"


def step_log_probs(
    cnp.ndarray[cnp.float64_t, ndim=2] embed,
    cnp.ndarray[cnp.float64_t, ndim=2] w1,
    cnp.ndarray[cnp.float64_t, ndim=1] b1,
    cnp.ndarray[cnp.float64_t, ndim=2] w2,
    cnp.ndarray[cnp.float64_t, ndim=1] b2,
    cnp.ndarray[cnp.int64_t, ndim=1] window,
):
    cdef Py_ssize_t k = window.shape[0]
    cdef Py_ssize_t d = embed.shape[1]
    cdef Py_ssize_t i, t, tok

    cdef cnp.ndarray[cnp.float64_t, ndim=1] hid = np.empty(w1.shape[1], dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(w2.shape[1], dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.empty(k * d, dtype=np.float64)
    cdef double[:, ::1] embed_v = np.ascontiguousarray(embed)
    cdef double[:, ::1] w1_v = np.ascontiguousarray(w1)
    cdef double[:, ::1] w2_v = np.ascontiguousarray(w2)
    cdef double[::1] b1_v = np.ascontiguousarray(b1)
    cdef double[::1] b2_v = np.ascontiguousarray(b2)
    cdef long[::1] win_v = np.ascontiguousarray(window)
    cdef double[::1] hid_v = hid
    cdef double[::1] out_v = out
    cdef double[::1] x_v = x
    cdef double m, s
    cdef double one = 1.0
    cdef int inc = 1
    cdef int h = <int> w1.shape[1]
    cdef int v = <int> w2.shape[1]
    cdef int kd = <int> (k * d)

    for t in range(k):
        tok = win_v[t]
        for i in range(d):
            x_v[t * d + i] = embed_v[tok, i]

    # a C-contiguous (n, m) array is the Fortran (m, n) matrix with lda=m,
    # so trans='N' dgemv computes x @ w1 and hid @ w2 directly
    hid_v[:] = b1_v
    dgemv("N", &h, &kd, &one, &w1_v[0, 0], &h, &x_v[0], &inc, &one, &hid_v[0], &inc)
    for i in range(h):
        hid_v[i] = tanh(hid_v[i])

    out_v[:] = b2_v
    dgemv("N", &v, &h, &one, &w2_v[0, 0], &v, &hid_v[0], &inc, &one, &out_v[0], &inc)

    m = out_v[0]
    for i in range(1, v):
        if out_v[i] > m:
            m = out_v[i]
    s = 0.0
    for i in range(v):
        s += exp(out_v[i] - m)
    s = m + log(s)
    for i in range(v):
        out_v[i] -= s
    return out
