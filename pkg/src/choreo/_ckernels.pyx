# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython pairwise-gravity kernels (compiled backend).

Mirrors the API of ``_kernels_py``; see that module for semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()


def pair_potential(const double[:, :, ::1] pos, const double[::1] masses):
    cdef Py_ssize_t S = pos.shape[0]
    cdef Py_ssize_t N = pos.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(S, dtype=np.float64)
    cdef double[::1] u = out
    cdef Py_ssize_t s, i, j
    cdef double dx, dy, dz, r, acc
    for s in range(S):
        acc = 0.0
        for i in range(N - 1):
            for j in range(i + 1, N):
                dx = pos[s, j, 0] - pos[s, i, 0]
                dy = pos[s, j, 1] - pos[s, i, 1]
                dz = pos[s, j, 2] - pos[s, i, 2]
                r = sqrt(dx * dx + dy * dy + dz * dz)
                acc += masses[i] * masses[j] / r
        u[s] = acc
    return out


def pair_forces(const double[:, :, ::1] pos, const double[::1] masses):
    cdef Py_ssize_t S = pos.shape[0]
    cdef Py_ssize_t N = pos.shape[1]
    cdef cnp.ndarray[double, ndim=3] out = np.zeros((S, N, 3), dtype=np.float64)
    cdef double[:, :, ::1] f = out
    cdef Py_ssize_t s, i, j
    cdef double dx, dy, dz, r2, w
    for s in range(S):
        for i in range(N - 1):
            for j in range(i + 1, N):
                dx = pos[s, j, 0] - pos[s, i, 0]
                dy = pos[s, j, 1] - pos[s, i, 1]
                dz = pos[s, j, 2] - pos[s, i, 2]
                r2 = dx * dx + dy * dy + dz * dz
                w = masses[i] * masses[j] / (r2 * sqrt(r2))
                f[s, i, 0] += w * dx
                f[s, i, 1] += w * dy
                f[s, i, 2] += w * dz
                f[s, j, 0] -= w * dx
                f[s, j, 1] -= w * dy
                f[s, j, 2] -= w * dz
    return out


def min_pair_distance(const double[:, :, ::1] pos):
    cdef Py_ssize_t S = pos.shape[0]
    cdef Py_ssize_t N = pos.shape[1]
    cdef Py_ssize_t s, i, j
    cdef double dx, dy, dz, r2, best = INFINITY
    for s in range(S):
        for i in range(N - 1):
            for j in range(i + 1, N):
                dx = pos[s, j, 0] - pos[s, i, 0]
                dy = pos[s, j, 1] - pos[s, i, 1]
                dz = pos[s, j, 2] - pos[s, i, 2]
                r2 = dx * dx + dy * dy + dz * dz
                if r2 < best:
                    best = r2
    return sqrt(best)


def min_pair_distance_per_sample(const double[:, :, ::1] pos):
    cdef Py_ssize_t S = pos.shape[0]
    cdef Py_ssize_t N = pos.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(S, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t s, i, j
    cdef double dx, dy, dz, r2, best
    for s in range(S):
        best = INFINITY
        for i in range(N - 1):
            for j in range(i + 1, N):
                dx = pos[s, j, 0] - pos[s, i, 0]
                dy = pos[s, j, 1] - pos[s, i, 1]
                dz = pos[s, j, 2] - pos[s, i, 2]
                r2 = dx * dx + dy * dy + dz * dz
                if r2 < best:
                    best = r2
        o[s] = sqrt(best)
    return out
