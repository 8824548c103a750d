# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernels for the input-design hot loop.

These routines are called once per candidate point per design step, which is
the dominating cost of the Monte-Carlo experiments; see
``clafd._kernels._numpy`` for the reference implementations.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def quad_batch_eval(const double[:, :, ::1] H, const double[:, ::1] c, const double[::1] h,
                    const double[:, ::1] U):
    cdef Py_ssize_t P = H.shape[0]
    cdef Py_ssize_t m = H.shape[1]
    cdef Py_ssize_t NV = U.shape[0]
    out = np.empty((P, NV), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t p, v, i, j
    cdef double acc, row, ui
    for p in range(P):
        for v in range(NV):
            acc = h[p]
            for i in range(m):
                ui = U[v, i]
                row = 0.0
                for j in range(m):
                    row += H[p, i, j] * U[v, j]
                acc += ui * (row + c[p, i])
            o[p, v] = acc
    return out


def weighted_exp_objective(const double[:, :, ::1] H, const double[:, ::1] c,
                           const double[::1] h, const double[::1] w, const double[:, ::1] U):
    cdef Py_ssize_t P = H.shape[0]
    cdef Py_ssize_t m = H.shape[1]
    cdef Py_ssize_t NV = U.shape[0]
    out = np.zeros(NV, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t p, v, i, j
    cdef double acc, row, ui
    for v in range(NV):
        for p in range(P):
            acc = h[p]
            for i in range(m):
                ui = U[v, i]
                row = 0.0
                for j in range(m):
                    row += H[p, i, j] * U[v, j]
                acc += ui * (row + c[p, i])
            o[v] += w[p] * exp(-acc)
    return out


def weighted_exp_grad(const double[:, :, ::1] H, const double[:, ::1] c, const double[::1] h,
                      const double[::1] w, const double[::1] u):
    cdef Py_ssize_t P = H.shape[0]
    cdef Py_ssize_t m = H.shape[1]
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t p, i, j
    cdef double acc, row, coef
    for p in range(P):
        acc = h[p]
        for i in range(m):
            row = 0.0
            for j in range(m):
                row += H[p, i, j] * u[j]
            acc += u[i] * (row + c[p, i])
        coef = w[p] * exp(-acc)
        for i in range(m):
            row = 0.0
            for j in range(m):
                row += H[p, i, j] * u[j]
            o[i] -= coef * (2.0 * row + c[p, i])
    return out
