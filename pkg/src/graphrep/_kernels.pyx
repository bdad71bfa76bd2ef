# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics must match ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def pairwise_sq_dists(const double[:, ::1] Z):
    cdef Py_ssize_t n = Z.shape[0], p = Z.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] D = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for k in range(p):
                    diff = Z[i, k] - Z[j, k]
                    acc = acc + diff * diff
                D[i, j] = acc
                D[j, i] = acc
    return out


def knn_select(const double[:, ::1] D, Py_ssize_t k):
    """Row-wise k smallest off-diagonal entries, ties to the smaller index."""
    cdef Py_ssize_t n = D.shape[0]
    cdef Py_ssize_t i, j, filled, pos
    cdef double d
    out = np.empty((n, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] idx = out
    buf = np.empty(k, dtype=np.float64)
    cdef double[::1] best = buf
    with nogil:
        for i in range(n):
            filled = 0
            for j in range(n):
                if j == i:
                    continue
                d = D[i, j]
                if filled == k and not (d < best[k - 1]):
                    continue
                # j ascends, so equal distances stay behind earlier indices
                if filled < k:
                    pos = filled
                    filled += 1
                else:
                    pos = k - 1
                while pos > 0 and best[pos - 1] > d:
                    best[pos] = best[pos - 1]
                    idx[i, pos] = idx[i, pos - 1]
                    pos -= 1
                best[pos] = d
                idx[i, pos] = j
    return out


def edge_weight_grad(const cnp.int64_t[:, ::1] edges, const double[::1] s_vals,
                     const double[::1] degrees, const double[:, ::1] G,
                     const double[:, ::1] Fp, double alpha, double tiny):
    """Gradient of the loss w.r.t. per-edge kernel weights through S."""
    cdef Py_ssize_t m = edges.shape[0], q = G.shape[1], n = degrees.shape[0]
    cdef Py_ssize_t e, i, j, t
    cdef double acc
    b_arr = np.empty(m, dtype=np.float64)
    r_arr = np.zeros(n, dtype=np.float64)
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] B = b_arr
    cdef double[::1] r = r_arr
    cdef double[::1] dw = out
    with nogil:
        for e in range(m):
            i = edges[e, 0]
            j = edges[e, 1]
            acc = 0.0
            for t in range(q):
                acc = acc + G[i, t] * Fp[j, t] + G[j, t] * Fp[i, t]
            B[e] = alpha * acc
            r[i] += B[e] * s_vals[e]
            r[j] += B[e] * s_vals[e]
        for e in range(m):
            i = edges[e, 0]
            j = edges[e, 1]
            if degrees[i] < tiny or degrees[j] < tiny:
                continue
            dw[e] = (B[e] / sqrt(degrees[i] * degrees[j])
                     - r[i] / (2.0 * degrees[i]) - r[j] / (2.0 * degrees[j]))
    return out


def scatter_point_grad(const cnp.int64_t[:, ::1] edges, const double[::1] dD,
                       const double[:, ::1] Z):
    """Accumulate 2*dL/dD_ij*(z_i - z_j) onto both endpoints of every edge."""
    cdef Py_ssize_t m = edges.shape[0], n = Z.shape[0], p = Z.shape[1]
    cdef Py_ssize_t e, i, j, k
    cdef double c, diff
    out = np.zeros((n, p), dtype=np.float64)
    cdef double[:, ::1] dZ = out
    with nogil:
        for e in range(m):
            i = edges[e, 0]
            j = edges[e, 1]
            c = 2.0 * dD[e]
            for k in range(p):
                diff = c * (Z[i, k] - Z[j, k])
                dZ[i, k] += diff
                dZ[j, k] -= diff
    return out
