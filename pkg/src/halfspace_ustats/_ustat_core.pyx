# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled counting core for the built-in indicator kernels.

Same contracts as `_ustat_fallback`: points arrive sorted by packed cell
key, cells are addressed by binary search over the unique keys, and tuples
are enumerated once from their minimal sorted index.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc

ctypedef cnp.int64_t i64


cdef inline Py_ssize_t _find(const i64* ucells, Py_ssize_t n, i64 key) nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if ucells[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < n and ucells[lo] == key:
        return lo
    return -1


cdef inline double _dist2(const double* pts, Py_ssize_t d,
                          Py_ssize_t i, Py_ssize_t j) nogil:
    cdef double acc = 0.0, diff
    cdef Py_ssize_t m
    for m in range(d):
        diff = pts[i * d + m] - pts[j * d + m]
        acc += diff * diff
    return acc


def count_pairs(cnp.ndarray[double, ndim=2, mode="c"] pts,
                cnp.ndarray[i64, ndim=1] keys,
                cnp.ndarray[i64, ndim=1] ucells,
                cnp.ndarray[i64, ndim=1] starts,
                cnp.ndarray[i64, ndim=1] pos_offsets,
                double r2, i64 budget):
    cdef Py_ssize_t ncell = ucells.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef const double* p = <const double*> pts.data
    cdef const i64* uc = <const i64*> ucells.data
    cdef const i64* st = <const i64*> starts.data
    cdef const i64* po = <const i64*> pos_offsets.data
    cdef Py_ssize_t noff = pos_offsets.shape[0]
    cdef double total = 0.0
    cdef i64 checked = 0
    cdef Py_ssize_t ci, cj, oi, i, j, a0, a1, b0, b1
    cdef int over = 0
    with nogil:
        for ci in range(ncell):
            a0 = st[ci]; a1 = st[ci + 1]
            for i in range(a0, a1):
                for j in range(i + 1, a1):
                    checked += 1
                    if _dist2(p, d, i, j) <= r2:
                        total += 1.0
            if checked > budget:
                over = 1
                break
            for oi in range(noff):
                cj = _find(uc, ncell, uc[ci] + po[oi])
                if cj < 0:
                    continue
                b0 = st[cj]; b1 = st[cj + 1]
                checked += <i64>(a1 - a0) * <i64>(b1 - b0)
                if checked > budget:
                    over = 1
                    break
                for i in range(a0, a1):
                    for j in range(b0, b1):
                        if _dist2(p, d, i, j) <= r2:
                            total += 1.0
            if over:
                break
    if over:
        from .errors import BudgetExceededError
        raise BudgetExceededError("pair enumeration exceeded budget")
    return total, int(checked)


def count_triples(cnp.ndarray[double, ndim=2, mode="c"] pts,
                  cnp.ndarray[i64, ndim=1] keys,
                  cnp.ndarray[i64, ndim=1] ucells,
                  cnp.ndarray[i64, ndim=1] starts,
                  cnp.ndarray[i64, ndim=1] all_offsets,
                  double r2, int mode, i64 budget):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t ncell = ucells.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef const double* p = <const double*> pts.data
    cdef const i64* uc = <const i64*> ucells.data
    cdef const i64* st = <const i64*> starts.data
    cdef const i64* ao = <const i64*> all_offsets.data
    cdef Py_ssize_t noff = all_offsets.shape[0]
    cdef double total = 0.0
    cdef i64 checked = 0
    cdef Py_ssize_t ci, cj, oi, i, j, l, a, b, b0, b1, lo, m
    cdef int over = 0
    cdef Py_ssize_t* cand = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef unsigned char* adj_i = <unsigned char*> malloc(n * sizeof(unsigned char))
    cdef int c01, c02, c12
    if cand == NULL or adj_i == NULL:
        free(cand); free(adj_i)
        raise MemoryError()
    # cell index of each point, from the block structure
    cdef i64* pc = <i64*> malloc(n * sizeof(i64))
    if pc == NULL:
        free(cand); free(adj_i)
        raise MemoryError()
    with nogil:
        for ci in range(ncell):
            for i in range(st[ci], st[ci + 1]):
                pc[i] = ci
        for i in range(n):
            ci = pc[i]
            m = 0
            for oi in range(noff):
                cj = _find(uc, ncell, uc[ci] + ao[oi])
                if cj < 0:
                    continue
                b0 = st[cj]; b1 = st[cj + 1]
                lo = b0 if b0 > i + 1 else i + 1
                for j in range(lo, b1):
                    cand[m] = j
                    m += 1
            if m < 2:
                continue
            checked += <i64>(m) * <i64>(m - 1) / 2
            if checked > budget:
                over = 1
                break
            for a in range(m):
                adj_i[a] = 1 if _dist2(p, d, i, cand[a]) <= r2 else 0
            for a in range(m):
                j = cand[a]
                for b in range(a + 1, m):
                    l = cand[b]
                    c01 = adj_i[a]
                    c02 = adj_i[b]
                    c12 = 1 if _dist2(p, d, j, l) <= r2 else 0
                    if mode == 0:
                        if c01 and c02 and c12:
                            total += 1.0
                    else:
                        total += <double>((c01 and c02) + (c01 and c12)
                                          + (c02 and c12))
    free(cand); free(adj_i); free(pc)
    if over:
        from .errors import BudgetExceededError
        raise BudgetExceededError("triple enumeration exceeded budget")
    return total, int(checked)
