# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint32_t, uint64_t, int64_t
from libc.math cimport INFINITY

cnp.import_array()


def held_karp_path(dist):
    cdef double[:, ::1] d = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    if n == 2:
        return d[0, 1]
    cdef Py_ssize_t m = n - 2
    cdef Py_ssize_t last = n - 1
    cdef Py_ssize_t full = 1 << m
    cdef double[:, ::1] cost = np.full((full, m), np.inf)
    cdef Py_ssize_t mask, k, j
    cdef Py_ssize_t free_bits, low
    cdef double ck, c, best
    for k in range(m):
        cost[1 << k, k] = d[0, k + 1]
    for mask in range(1, full):
        for k in range(m):
            ck = cost[mask, k]
            if ck == INFINITY:
                continue
            free_bits = (full - 1) & ~mask
            for j in range(m):
                if free_bits & (1 << j):
                    c = ck + d[k + 1, j + 1]
                    if c < cost[mask | (1 << j), j]:
                        cost[mask | (1 << j), j] = c
    best = INFINITY
    for k in range(m):
        c = cost[full - 1, k] + d[k + 1, last]
        if c < best:
            best = c
    return best


def two_opt_path(dist):
    cdef double[:, ::1] d = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t[::1] order = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t i, j, a, b, c, e, lo, hi, tmp
    cdef double total = 0.0, gain, thresh, dab
    cdef bint improved = True
    for i in range(n - 1):
        total += d[i, i + 1]
    thresh = 1e-12 * (1.0 + total)
    while improved:
        improved = False
        for i in range(1, n - 2):
            a = order[i - 1]
            b = order[i]
            dab = d[a, b]
            for j in range(i + 1, n - 1):
                c = order[j]
                e = order[j + 1]
                gain = d[a, c] + d[b, e] - dab - d[c, e]
                if gain < -thresh:
                    lo = i
                    hi = j
                    while lo < hi:
                        tmp = order[lo]
                        order[lo] = order[hi]
                        order[hi] = tmp
                        lo += 1
                        hi -= 1
                    total += gain
                    improved = True
                    b = order[i]
                    dab = d[a, b]
    total = 0.0
    for i in range(n - 1):
        total += d[order[i], order[i + 1]]
    return total


def minhash_signatures(keys, offsets, a, b):
    cdef uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef uint64_t[::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef uint64_t[::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    cdef Py_ssize_t ns = off.shape[0] - 1
    cdef Py_ssize_t nh = av.shape[0]
    out_arr = np.full((ns, nh), 0xFFFFFFFF, dtype=np.uint32)
    cdef uint32_t[:, ::1] out = out_arr
    cdef Py_ssize_t s, t, i
    cdef uint32_t h
    for s in range(ns):
        for t in range(off[s], off[s + 1]):
            for i in range(nh):
                h = <uint32_t>((av[i] * k[t] + bv[i]) >> 32)
                if h < out[s, i]:
                    out[s, i] = h
    return out_arr
