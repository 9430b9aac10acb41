# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row kernels. Semantics must match ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, NAN

cnp.import_array()


cdef inline void _mean_ss(const double[:, ::1] x, Py_ssize_t i, double *mean, double *ss) noexcept nogil:
    # A constant row gets exactly zero spread; rounding in the mean would otherwise leave a tiny residue.
    cdef Py_ssize_t j, n = x.shape[1]
    cdef double s = 0.0, d, acc = 0.0, first = x[i, 0]
    cdef bint constant = True
    for j in range(n):
        s += x[i, j]
        if x[i, j] != first:
            constant = False
    if constant:
        mean[0] = first
        ss[0] = 0.0
        return
    s /= n
    for j in range(n):
        d = x[i, j] - s
        acc += d * d
    mean[0] = s
    ss[0] = acc


def one_sample_t(const double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] stats = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] flagged = np.zeros(m, dtype=np.uint8)
    cdef double[::1] sv = stats
    cdef cnp.uint8_t[::1] fv = flagged
    cdef double mean, ss, sd
    cdef double rootn = sqrt(<double>n)
    with nogil:
        for i in range(m):
            _mean_ss(x, i, &mean, &ss)
            if ss > 0.0:
                sd = sqrt(ss / (n - 1))
                sv[i] = rootn * mean / sd
            else:
                sv[i] = NAN
                fv[i] = 1
    return stats, flagged.astype(bool)


def two_sample_t(const double[:, ::1] x, const double[:, ::1] y):
    cdef Py_ssize_t m = x.shape[0], n1 = x.shape[1], n2 = y.shape[1], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] stats = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dof = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] flagged = np.zeros(m, dtype=np.uint8)
    cdef double[::1] sv = stats
    cdef double[::1] dv = dof
    cdef cnp.uint8_t[::1] fv = flagged
    cdef double mx, ssx, my, ssy, vx, vy, se2
    with nogil:
        for i in range(m):
            _mean_ss(x, i, &mx, &ssx)
            _mean_ss(y, i, &my, &ssy)
            vx = ssx / (n1 - 1) / n1
            vy = ssy / (n2 - 1) / n2
            se2 = vx + vy
            if se2 > 0.0:
                sv[i] = (mx - my) / sqrt(se2)
                dv[i] = se2 * se2 / (vx * vx / (n1 - 1) + vy * vy / (n2 - 1))
            else:
                sv[i] = NAN
                dv[i] = NAN
                fv[i] = 1
    return stats, dof, flagged.astype(bool)


def g_hat_grid(const double[::1] abs_sorted, const double[::1] cgrid):
    cdef Py_ssize_t m = abs_sorted.shape[0], g = cgrid.shape[0], k = 0, j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(g, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double below = 0.0, c
    with nogil:
        for j in range(g):
            c = cgrid[j]
            while k < m and abs_sorted[k] < c:
                below += abs_sorted[k]
                k += 1
            ov[j] = (below + c * (m - k)) / (c * m)
    return out
