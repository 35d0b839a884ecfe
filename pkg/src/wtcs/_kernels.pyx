# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel implementations.

Operation-for-operation mirror of ``_kernels_py`` — same evaluation order,
so results are bit-identical to the numpy fallback.
"""

import numpy as np

from libc.math cimport fabs, fmax, sqrt
from libc.stdint cimport int64_t

BACKEND_NAME = "compiled"


def dwt_level(double[:, ::1] x):
    """One analysis level of the orthonormal 2-D Haar transform."""
    cdef Py_ssize_t m = x.shape[0] // 2
    ll_a = np.empty((m, m), dtype=np.float64)
    hl_a = np.empty((m, m), dtype=np.float64)
    lh_a = np.empty((m, m), dtype=np.float64)
    hh_a = np.empty((m, m), dtype=np.float64)
    cdef double[:, ::1] ll = ll_a
    cdef double[:, ::1] hl = hl_a
    cdef double[:, ::1] lh = lh_a
    cdef double[:, ::1] hh = hh_a
    cdef Py_ssize_t i, j
    cdef double a, b, c, d
    for i in range(m):
        for j in range(m):
            a = x[2 * i, 2 * j]
            b = x[2 * i, 2 * j + 1]
            c = x[2 * i + 1, 2 * j]
            d = x[2 * i + 1, 2 * j + 1]
            ll[i, j] = (((a + b) + c) + d) * 0.5
            hl[i, j] = (((a - b) + c) - d) * 0.5
            lh[i, j] = (((a + b) - c) - d) * 0.5
            hh[i, j] = (((a - b) - c) + d) * 0.5
    return ll_a, hl_a, lh_a, hh_a


def idwt_level(double[:, ::1] ll, double[:, ::1] hl,
               double[:, ::1] lh, double[:, ::1] hh):
    """Inverse of :func:`dwt_level`."""
    cdef Py_ssize_t m = ll.shape[0]
    x_a = np.empty((2 * m, 2 * m), dtype=np.float64)
    cdef double[:, ::1] x = x_a
    cdef Py_ssize_t i, j
    cdef double s, t, u, v
    for i in range(m):
        for j in range(m):
            s = ll[i, j]
            t = hl[i, j]
            u = lh[i, j]
            v = hh[i, j]
            x[2 * i, 2 * j] = (((s + t) + u) + v) * 0.5
            x[2 * i, 2 * j + 1] = (((s - t) + u) - v) * 0.5
            x[2 * i + 1, 2 * j] = (((s + t) - u) - v) * 0.5
            x[2 * i + 1, 2 * j + 1] = (((s - t) - u) + v) * 0.5
    return x_a


def soft_threshold(double[::1] r, double[::1] tau):
    """Elementwise shrinkage sign(r) * max(|r| - tau, 0)."""
    cdef Py_ssize_t n = r.shape[0]
    out_a = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_a
    cdef Py_ssize_t i
    cdef double x, s
    for i in range(n):
        x = r[i]
        s = 1.0 if x > 0.0 else (-1.0 if x < 0.0 else 0.0)
        out[i] = s * fmax(fabs(x) - tau[i], 0.0)
    return out_a


def group_gather(double[::1] theta_hf, int64_t[:, ::1] idx, double[::1] w):
    """Gather weighted group members: out[g, k] = theta_hf[idx[g, k]] * w[g]."""
    cdef Py_ssize_t g = idx.shape[0]
    cdef Py_ssize_t k = idx.shape[1]
    out_a = np.empty((g, k), dtype=np.float64)
    cdef double[:, ::1] out = out_a
    cdef Py_ssize_t i, j
    for i in range(g):
        for j in range(k):
            out[i, j] = theta_hf[idx[i, j]] * w[i]
    return out_a


def group_scatter_add(double[::1] out, int64_t[:, ::1] idx,
                      double[::1] w, double[:, ::1] v):
    """Accumulate weighted group members back, in row-major (g, k) order."""
    cdef Py_ssize_t g = idx.shape[0]
    cdef Py_ssize_t k = idx.shape[1]
    cdef Py_ssize_t i, j
    for i in range(g):
        for j in range(k):
            out[idx[i, j]] += w[i] * v[i, j]
    return out.base


def group_shrink(double[:, ::1] u, double tau):
    """Row-wise Euclidean shrinkage: u_g * max(||u_g|| - tau, 0) / ||u_g||."""
    cdef Py_ssize_t g = u.shape[0]
    cdef Py_ssize_t k = u.shape[1]
    out_a = np.empty((g, k), dtype=np.float64)
    cdef double[:, ::1] out = out_a
    cdef Py_ssize_t i, j
    cdef double n2, nrm, scale
    for i in range(g):
        n2 = 0.0
        for j in range(k):
            n2 += u[i, j] * u[i, j]
        nrm = sqrt(n2)
        scale = (nrm - tau) / nrm if nrm > tau else 0.0
        for j in range(k):
            out[i, j] = u[i, j] * scale
    return out_a
