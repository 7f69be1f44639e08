# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled upwind differencing for (nx, ny, m) blocks of K columns."""
import numpy as np


def upwind_diff(const double[:, :, ::1] a, const double[:, ::1] lo,
                const double[:, ::1] hi, const signed char[::1] signs,
                const double[::1] scale, double inv_h, int axis):
    cdef Py_ssize_t n0 = a.shape[0], n1 = a.shape[1], m = a.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double w, prev, nxt
    out = np.empty((n0, n1, m))
    cdef double[:, :, ::1] o = out
    if axis == 0:
        for i in range(n0):
            for j in range(n1):
                for k in range(m):
                    w = scale[k] * inv_h
                    if signs[k] > 0:
                        prev = a[i - 1, j, k] if i > 0 else lo[j, k]
                        o[i, j, k] = w * (a[i, j, k] - prev)
                    elif signs[k] < 0:
                        nxt = a[i + 1, j, k] if i < n0 - 1 else hi[j, k]
                        o[i, j, k] = w * (nxt - a[i, j, k])
                    else:
                        o[i, j, k] = 0.0
    else:
        for i in range(n0):
            for j in range(n1):
                for k in range(m):
                    w = scale[k] * inv_h
                    if signs[k] > 0:
                        prev = a[i, j - 1, k] if j > 0 else lo[i, k]
                        o[i, j, k] = w * (a[i, j, k] - prev)
                    elif signs[k] < 0:
                        nxt = a[i, j + 1, k] if j < n1 - 1 else hi[i, k]
                        o[i, j, k] = w * (nxt - a[i, j, k])
                    else:
                        o[i, j, k] = 0.0
    return out
