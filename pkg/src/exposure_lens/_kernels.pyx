# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled core of the weighted alternating-demeaning sweep."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def demean_inplace(
    double[:, ::1] mat,
    long long[:, ::1] codes,
    long long[::1] counts,
    double[::1] weights,
    double tol,
    int max_sweeps,
):
    """Alternately subtract weighted group means along every dimension.

    Returns the sweep count on convergence, -1 if the cap was hit while
    the largest subtracted mean still exceeded ``tol``.
    """
    cdef Py_ssize_t n = mat.shape[0]
    cdef Py_ssize_t k = mat.shape[1]
    cdef Py_ssize_t n_dims = codes.shape[0]
    cdef Py_ssize_t max_groups = 0
    cdef Py_ssize_t d, i, j, g
    cdef int sweep
    cdef double max_delta, m, a

    for d in range(n_dims):
        if counts[d] > max_groups:
            max_groups = counts[d]

    gw_arr = np.zeros((n_dims, max_groups), dtype=np.float64)
    cdef double[:, ::1] gw = gw_arr
    acc_arr = np.zeros(max_groups, dtype=np.float64)
    cdef double[::1] acc = acc_arr

    for d in range(n_dims):
        for i in range(n):
            gw[d, codes[d, i]] += weights[i]

    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for d in range(n_dims):
            for j in range(k):
                for g in range(counts[d]):
                    acc[g] = 0.0
                for i in range(n):
                    acc[codes[d, i]] += weights[i] * mat[i, j]
                for g in range(counts[d]):
                    acc[g] /= gw[d, g]
                    a = acc[g] if acc[g] >= 0 else -acc[g]
                    if a > max_delta:
                        max_delta = a
                for i in range(n):
                    mat[i, j] -= acc[codes[d, i]]
        if max_delta < tol:
            return sweep
    return -1
