# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled coalition kernels. Mirrors ``_pykernels`` function by function."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t

cnp.import_array()


cdef inline int _popcount64(int64_t v) nogil:
    cdef int c = 0
    cdef unsigned long long u = <unsigned long long>v
    while u:
        u &= u - 1
        c += 1
    return c


def popcount(bits):
    cdef int64_t[::1] b = np.ascontiguousarray(bits, dtype=np.int64).ravel()
    out = np.empty(b.shape[0], dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t k
    with nogil:
        for k in range(b.shape[0]):
            o[k] = _popcount64(b[k])
    return out.reshape(np.shape(bits))


def bits_to_masks(bits, int n_features):
    cdef int64_t[::1] b = np.ascontiguousarray(bits, dtype=np.int64)
    out = np.zeros((b.shape[0], n_features), dtype=np.uint8)
    cdef uint8_t[:, ::1] o = out
    cdef Py_ssize_t k
    cdef int j
    with nogil:
        for k in range(b.shape[0]):
            for j in range(n_features):
                o[k, j] = (b[k] >> j) & 1
    return out


def masks_to_bits(masks):
    cdef uint8_t[:, ::1] m = np.ascontiguousarray(masks, dtype=np.uint8)
    out = np.zeros(m.shape[0], dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t k
    cdef int j
    cdef int64_t acc
    with nogil:
        for k in range(m.shape[0]):
            acc = 0
            for j in range(m.shape[1]):
                if m[k, j]:
                    acc |= (<int64_t>1) << j
            o[k] = acc
    return out


def exact_accumulate(values, int n_features):
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef int m = n_features
    cdef int64_t n_masks = (<int64_t>1) << m
    if v.shape[0] != n_masks:
        raise ValueError(f"value table has {v.shape[0]} entries, expected {n_masks}")
    from shapbench._pykernels import shapley_weights
    cdef double[::1] w = shapley_weights(m)
    phi = np.zeros(m, dtype=np.float64)
    cdef double[::1] p = phi
    cdef int64_t s, bit
    cdef int i, size
    with nogil:
        for s in range(n_masks):
            size = _popcount64(s)
            if size == m:
                continue
            for i in range(m):
                bit = (<int64_t>1) << i
                if not (s & bit):
                    p[i] += w[size] * (v[s | bit] - v[s])
    return phi


def impute(masks, x, background):
    cdef uint8_t[:, ::1] mk = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] bg = np.ascontiguousarray(background, dtype=np.float64)
    cdef Py_ssize_t n = mk.shape[0], nb = bg.shape[0], m = xv.shape[0]
    out = np.empty((n * nb, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t k, r, j, row
    with nogil:
        for k in range(n):
            for r in range(nb):
                row = k * nb + r
                for j in range(m):
                    o[row, j] = xv[j] if mk[k, j] else bg[r, j]
    return out


def impute_rows(masks, x, rows):
    cdef uint8_t[:, ::1] mk = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] bg = np.ascontiguousarray(rows, dtype=np.float64)
    cdef Py_ssize_t n = mk.shape[0], m = xv.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t k, j
    with nogil:
        for k in range(n):
            for j in range(m):
                o[k, j] = xv[j] if mk[k, j] else bg[k, j]
    return out


def chain_masks(perms):
    cdef int64_t[:, ::1] pm = np.ascontiguousarray(perms, dtype=np.int64)
    cdef Py_ssize_t p = pm.shape[0], m = pm.shape[1]
    out = np.zeros((p, m + 1, m), dtype=np.uint8)
    cdef uint8_t[:, :, ::1] o = out
    cdef Py_ssize_t k, step, j
    with nogil:
        for k in range(p):
            for step in range(m):
                for j in range(m):
                    o[k, step + 1, j] = o[k, step, j]
                o[k, step + 1, pm[k, step]] = 1
    return out


def chain_attribute(perms, chain_values):
    cdef int64_t[:, ::1] pm = np.ascontiguousarray(perms, dtype=np.int64)
    cdef double[:, ::1] cv = np.ascontiguousarray(chain_values, dtype=np.float64)
    cdef Py_ssize_t p = pm.shape[0], m = pm.shape[1]
    phi = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = phi
    cdef Py_ssize_t k, step
    with nogil:
        for k in range(p):
            for step in range(m):
                out[pm[k, step]] += cv[k, step + 1] - cv[k, step]
    return phi
