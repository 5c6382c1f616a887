# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scatter kernel for two-rail bosonic transforms on packed Fock keys."""

from cython.operator cimport dereference as deref
from libc.stdint cimport int64_t
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

import numpy as np


def two_rail_transform(
    const int64_t[::1] keys,
    const double complex[::1] amps,
    int shift1,
    int shift2,
    int bits,
    int nmax,
    const double complex[:, :, ::1] coef,
):
    cdef int64_t mask = (1 << bits) - 1
    cdef int64_t clear = ~((mask << shift1) | (mask << shift2))
    cdef unordered_map[int64_t, Py_ssize_t] index
    cdef vector[int64_t] out_keys
    cdef vector[double complex] out_amps
    cdef Py_ssize_t i, pos
    cdef int n1, n2, total, k, lo, hi
    cdef int64_t base, key
    cdef double complex a, c
    cdef unordered_map[int64_t, Py_ssize_t].iterator it

    index.reserve(2 * keys.shape[0])
    for i in range(keys.shape[0]):
        a = amps[i]
        n1 = <int>((keys[i] >> shift1) & mask)
        n2 = <int>((keys[i] >> shift2) & mask)
        total = n1 + n2
        base = keys[i] & clear
        # outputs with more than nmax photons on either rail fall outside the cutoff
        lo = total - nmax if total > nmax else 0
        hi = total if total < nmax else nmax
        for k in range(lo, hi + 1):
            c = coef[n1, n2, k]
            if c == 0:
                continue
            key = base | (<int64_t>k << shift1) | (<int64_t>(total - k) << shift2)
            it = index.find(key)
            if it == index.end():
                pos = out_keys.size()
                index[key] = pos
                out_keys.push_back(key)
                out_amps.push_back(a * c)
            else:
                pos = deref(it).second
                out_amps[pos] = out_amps[pos] + a * c

    cdef Py_ssize_t n = out_keys.size()
    result_keys = np.empty(n, dtype=np.int64)
    result_amps = np.empty(n, dtype=np.complex128)
    cdef int64_t[::1] rk = result_keys
    cdef double complex[::1] ra = result_amps
    for i in range(n):
        rk[i] = out_keys[i]
        ra[i] = out_amps[i]
    return result_keys, result_amps
