# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled panel kernels for the sparse correspondence operator.

The solvers spend nearly all their time applying the effective cost matrix
to an L x S panel inside a Chebyshev recurrence; these kernels do that in a
single fused pass over the stored entries. Rows are independent, so the
OpenMP schedule cannot change the result bitwise.
"""

import numpy as np

cimport cython
from cython.parallel cimport prange


def q_panel(long[::1] indptr, long[::1] indices,
            double[:, ::1] V, double[:, ::1] out, int threads):
    """out = Q @ V with implicit identity diagonal, unit off-diagonal CSR."""
    cdef Py_ssize_t L = V.shape[0]
    cdef Py_ssize_t S = V.shape[1]
    cdef Py_ssize_t r, idx, s, c
    cdef double acc
    if threads <= 0:
        threads = 1
    for r in prange(L, nogil=True, num_threads=threads, schedule='static'):
        for s in range(S):
            out[r, s] = V[r, s]
        for idx in range(indptr[r], indptr[r + 1]):
            c = indices[idx]
            for s in range(S):
                out[r, s] += V[c, s]


def weak_panel(long[::1] indptr, long[::1] indices, long[::1] offsets,
               double[::1] lam, double[::1] mu_over_k, double[:, ::1] V,
               double[:, ::1] colsum, double[:, ::1] out, int threads):
    """out = -(Q V) - diag(lam) V - blockwise (mu_i / K_i) * 1 (1^T V^(i)).

    ``colsum`` is an N x S scratch panel for the per-block column sums,
    ``mu_over_k`` holds mu_i / K_i.
    """
    cdef Py_ssize_t N = offsets.shape[0] - 1
    cdef Py_ssize_t S = V.shape[1]
    cdef Py_ssize_t i, r, idx, s, c
    cdef double w
    if threads <= 0:
        threads = 1
    for i in prange(N, nogil=True, num_threads=threads, schedule='static'):
        for s in range(S):
            colsum[i, s] = 0.0
        for r in range(offsets[i], offsets[i + 1]):
            for s in range(S):
                colsum[i, s] += V[r, s]
    for i in prange(N, nogil=True, num_threads=threads, schedule='static'):
        w = mu_over_k[i]
        for r in range(offsets[i], offsets[i + 1]):
            for s in range(S):
                out[r, s] = -(1.0 + lam[r]) * V[r, s] - w * colsum[i, s]
            for idx in range(indptr[r], indptr[r + 1]):
                c = indices[idx]
                for s in range(S):
                    out[r, s] -= V[c, s]
