# Compiled versions of the numeric kernels; contracts documented in
# kernels_py.py. Loops are written for contiguous float64 arrays.

import numpy as np

cimport numpy as cnp
from libc.math cimport log, log1p, sqrt, INFINITY

cnp.import_array()

BACKEND_NAME = "cython"


def pairwise_distances(x):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xc = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xc.shape[0]
    cdef Py_ssize_t dim = xc.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, n), dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(dim):
                diff = xc[i, k] - xc[j, k]
                acc += diff * diff
            acc = sqrt(acc)
            out[i, j] = acc
            out[j, i] = acc
    return out


def cross_distances(a, b):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ac = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bc = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = ac.shape[0]
    cdef Py_ssize_t m = bc.shape[0]
    cdef Py_ssize_t dim = ac.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m), dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(dim):
                diff = ac[i, k] - bc[j, k]
                acc += diff * diff
            out[i, j] = sqrt(acc)
    return out


def log_density_unnormalized(d, dim):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dc = np.ascontiguousarray(
        np.atleast_1d(d), dtype=np.float64)
    cdef Py_ssize_t n = dc.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double nd = <double> dim
    cdef Py_ssize_t i
    cdef double v
    for i in range(n):
        v = dc[i]
        if v > 0.0 and v < 2.0:
            out[i] = (nd - 2.0) * log(v) + 0.5 * (nd - 3.0) * log1p(-0.25 * v * v)
        else:
            out[i] = -INFINITY
    return out


def accumulate_pair_gradients(idx_i, idx_j, coeff, emb, out, eps=1e-12):
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ii = np.ascontiguousarray(idx_i, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] jj = np.ascontiguousarray(idx_j, dtype=np.intp)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cc = np.ascontiguousarray(coeff, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] e = np.ascontiguousarray(emb, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] o = out
    cdef Py_ssize_t t, k, a, b
    cdef Py_ssize_t nterms = ii.shape[0]
    cdef Py_ssize_t dim = e.shape[1]
    cdef double acc, diff, scale
    cdef double epsv = eps
    cdef int skipped = 0
    for t in range(nterms):
        a = ii[t]
        b = jj[t]
        acc = 0.0
        for k in range(dim):
            diff = e[a, k] - e[b, k]
            acc += diff * diff
        acc = sqrt(acc)
        if acc < epsv:
            skipped += 1
            continue
        scale = cc[t] / acc
        for k in range(dim):
            diff = scale * (e[a, k] - e[b, k])
            o[a, k] += diff
            o[b, k] -= diff
    return skipped
