# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled forward-backward kernel. Contract documented in spanweak.kernels;
the pure-Python twin lives in spanweak._kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log

cnp.import_array()


def forward_backward(b, mu, T, offsets):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b_ = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mu_ = np.ascontiguousarray(mu, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] T_ = np.ascontiguousarray(T, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] off_ = np.ascontiguousarray(offsets, dtype=np.int64)

    cdef Py_ssize_t n = b_.shape[0]
    cdef Py_ssize_t K = b_.shape[1]
    cdef Py_ssize_t S = off_.shape[0] - 1

    cdef cnp.ndarray[cnp.float64_t, ndim=2] gamma = np.empty((n, K))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xi_sum = np.zeros((K, K))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] alpha = np.empty((n, K))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] beta = np.empty(K)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(K)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nb = np.empty(K)

    cdef double loglik = 0.0
    cdef double acc, gsum, inv_c
    cdef Py_ssize_t s, lo, hi, t, i, j

    for s in range(S):
        lo = off_[s]
        hi = off_[s + 1]
        # forward pass with per-step scaling
        acc = 0.0
        for i in range(K):
            alpha[lo, i] = mu_[i] * b_[lo, i]
            acc += alpha[lo, i]
        c[lo] = acc
        for i in range(K):
            alpha[lo, i] /= acc
        for t in range(lo + 1, hi):
            acc = 0.0
            for j in range(K):
                alpha[t, j] = 0.0
            for i in range(K):
                for j in range(K):
                    alpha[t, j] += alpha[t - 1, i] * T_[i, j]
            for j in range(K):
                alpha[t, j] *= b_[t, j]
                acc += alpha[t, j]
            c[t] = acc
            for j in range(K):
                alpha[t, j] /= acc
        # backward pass, gamma, expected transition counts
        for i in range(K):
            beta[i] = 1.0
            gamma[hi - 1, i] = alpha[hi - 1, i]
        for t in range(hi - 2, lo - 1, -1):
            inv_c = 1.0 / c[t + 1]
            for j in range(K):
                w[j] = b_[t + 1, j] * beta[j]
            for i in range(K):
                acc = 0.0
                for j in range(K):
                    xi_sum[i, j] += alpha[t, i] * T_[i, j] * w[j] * inv_c
                    acc += T_[i, j] * w[j]
                nb[i] = acc * inv_c
            gsum = 0.0
            for i in range(K):
                beta[i] = nb[i]
                gamma[t, i] = alpha[t, i] * beta[i]
                gsum += gamma[t, i]
            for i in range(K):
                gamma[t, i] /= gsum
        for t in range(lo, hi):
            loglik += log(c[t])

    return gamma, xi_sum, loglik
