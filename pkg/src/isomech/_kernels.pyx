# cython: language_level=3
"""Compiled kernels for the pool-adjacent-violators hot loops.

Mirrors ``_kernels_py`` exactly; selection happens in ``isomech._backend``.
"""

import numpy as np

from libc.math cimport fabs, sqrt, pow
from libc.stdlib cimport malloc, free

POWER = 0
ACCEPT = 1


cdef inline double _phi(double x, int kind, double param) nogil:
    cdef double a
    if kind == 1:
        return 1.0 if x > param else 0.0
    a = fabs(x)
    if param == 1.0:
        return a
    if param == 2.0:
        return a * a
    if param == 3.0:
        return a * a * a
    if param == 1.5:
        return a * sqrt(a)
    return pow(a, param)


cdef double _row_utility(const double* y, Py_ssize_t n, int kind, double param,
                         double* means, double* wsum) nogil:
    # Unit-weight PAVA for a non-increasing fit; wsum doubles as block sizes.
    cdef Py_ssize_t top = -1, i
    cdef double m, s, total = 0.0
    for i in range(n):
        m = y[i]
        s = 1.0
        while top >= 0 and means[top] < m:
            m = (means[top] * wsum[top] + m * s) / (wsum[top] + s)
            s += wsum[top]
            top -= 1
        top += 1
        means[top] = m
        wsum[top] = s
    for i in range(top + 1):
        total += wsum[i] * _phi(means[i], kind, param)
    return total


def pava_nonincreasing(values, weights):
    cdef double[::1] y = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0], i, j, top = -1, pos = 0
    if w.shape[0] != n:
        raise ValueError("values and weights differ in length")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    if n == 0:
        return out
    cdef double* means = <double*> malloc(n * sizeof(double))
    cdef double* wsum = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t* sizes = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef double m, s
    cdef Py_ssize_t c
    try:
        for i in range(n):
            m = y[i]
            s = w[i]
            c = 1
            while top >= 0 and means[top] < m:
                m = (means[top] * wsum[top] + m * s) / (wsum[top] + s)
                s += wsum[top]
                c += sizes[top]
                top -= 1
            top += 1
            means[top] = m
            wsum[top] = s
            sizes[top] = c
        for i in range(top + 1):
            for j in range(sizes[i]):
                o[pos] = means[i]
                pos += 1
    finally:
        free(means)
        free(wsum)
        free(sizes)
    return out


def row_utilities(Y, int kind, double param):
    cdef double[:, ::1] y = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1], r
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] o = out
    if n == 0:
        return out
    cdef double* means = <double*> malloc(n * sizeof(double))
    cdef double* wsum = <double*> malloc(n * sizeof(double))
    try:
        with nogil:
            for r in range(m):
                o[r] = _row_utility(&y[r, 0], n, kind, param, means, wsum)
    finally:
        free(means)
        free(wsum)
    return out


def mean_utilities(base, noise, int kind, double param):
    cdef double[:, ::1] b = np.ascontiguousarray(base, dtype=np.float64)
    cdef double[:, ::1] z = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t R = b.shape[0], n = b.shape[1], D = z.shape[0], r, d, i
    if z.shape[1] != n:
        raise ValueError("base and noise column counts differ")
    out = np.zeros(R, dtype=np.float64)
    cdef double[::1] o = out
    if n == 0 or D == 0:
        return out
    cdef double* row = <double*> malloc(n * sizeof(double))
    cdef double* means = <double*> malloc(n * sizeof(double))
    cdef double* wsum = <double*> malloc(n * sizeof(double))
    cdef double acc
    try:
        with nogil:
            for r in range(R):
                acc = 0.0
                for d in range(D):
                    for i in range(n):
                        row[i] = b[r, i] + z[d, i]
                    acc += _row_utility(row, n, kind, param, means, wsum)
                o[r] = acc / D
    finally:
        free(row)
        free(means)
        free(wsum)
    return out
