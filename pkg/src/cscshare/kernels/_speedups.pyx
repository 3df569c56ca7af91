# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled per-slot allocation kernels.

Bit-identical mirror of cscshare.kernels._pure for inputs that fit in
signed 64-bit arithmetic; the dispatcher in cscshare.kernels guarantees
production and every consumption value stay below 2**31 so that the
c_i * production products cannot overflow. Remainder ordering, tie
breaks and the largest-remainder correction cycles match the pure
implementation exactly.
"""

from libc.math cimport floor
from libc.stdlib cimport free, malloc


cdef void* _alloc(size_t nbytes) except NULL:
    cdef void* p = malloc(nbytes)
    if p == NULL:
        raise MemoryError()
    return p


def static_shares(long long production, kors, consumption):
    """Fixed-coefficient split with largest-remainder rounding and caps."""
    cdef Py_ssize_t n = len(kors)
    if n == 0:
        return [], production
    cdef long long* base = <long long*> _alloc(n * sizeof(long long))
    cdef double* rem = NULL
    cdef Py_ssize_t* order = NULL
    cdef Py_ssize_t i, j, k, pos
    cdef long long total = 0, deficit, c, share
    cdef double raw, p = <double> production
    try:
        rem = <double*> _alloc(n * sizeof(double))
        order = <Py_ssize_t*> _alloc(n * sizeof(Py_ssize_t))
        for i in range(n):
            raw = (<double> kors[i]) * p
            base[i] = <long long> floor(raw)
            rem[i] = raw - floor(raw)
            total += base[i]
        deficit = production - total
        if deficit > 0:
            # order by remainder descending, index ascending
            for i in range(n):
                order[i] = i
            for i in range(1, n):
                k = order[i]
                j = i - 1
                while j >= 0 and (rem[order[j]] < rem[k] or
                                  (rem[order[j]] == rem[k] and order[j] > k)):
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = k
            j = 0
            while deficit > 0:
                base[order[j % n]] += 1
                deficit -= 1
                j += 1
        elif deficit < 0:
            # order by remainder ascending, index descending
            for i in range(n):
                order[i] = i
            for i in range(1, n):
                k = order[i]
                j = i - 1
                while j >= 0 and (rem[order[j]] > rem[k] or
                                  (rem[order[j]] == rem[k] and order[j] < k)):
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = k
            j = 0
            while deficit < 0:
                pos = order[j % n]
                if base[pos] > 0:
                    base[pos] -= 1
                    deficit += 1
                j += 1
        total = 0
        out = [0] * n
        for i in range(n):
            c = consumption[i]
            share = base[i] if base[i] < c else c
            out[i] = share
            total += share
        return out, production - total
    finally:
        free(base)
        free(rem)
        free(order)


def proportional_shares(long long production, consumption):
    """Consumption-proportional split with exact integer apportionment."""
    cdef Py_ssize_t n = len(consumption)
    cdef Py_ssize_t i, j, k
    cdef long long total = 0, csum, num, deficit, ci
    if n == 0:
        return [], production
    for i in range(n):
        total += <long long> consumption[i]
    if total == 0:
        return [0] * n, production
    if total <= production:
        return [consumption[i] for i in range(n)], production - total
    cdef long long* base = <long long*> _alloc(n * sizeof(long long))
    cdef long long* rem = NULL
    cdef Py_ssize_t* order = NULL
    try:
        rem = <long long*> _alloc(n * sizeof(long long))
        order = <Py_ssize_t*> _alloc(n * sizeof(Py_ssize_t))
        csum = 0
        for i in range(n):
            ci = <long long> consumption[i]
            num = ci * production
            base[i] = num // total
            rem[i] = num % total
            csum += base[i]
        deficit = production - csum
        for i in range(n):
            order[i] = i
        for i in range(1, n):
            k = order[i]
            j = i - 1
            while j >= 0 and (rem[order[j]] < rem[k] or
                              (rem[order[j]] == rem[k] and order[j] > k)):
                order[j + 1] = order[j]
                j -= 1
            order[j + 1] = k
        for j in range(deficit):
            base[order[j]] += 1
        return [base[i] for i in range(n)], 0
    finally:
        free(base)
        free(rem)
        free(order)


def waterfall_shares(long long production, consumption):
    """Priority waterfall; consumption must already be in priority order."""
    cdef Py_ssize_t n = len(consumption)
    cdef Py_ssize_t i
    cdef long long remaining = production, c, x
    out = [0] * n
    for i in range(n):
        c = <long long> consumption[i]
        x = c if c < remaining else remaining
        out[i] = x
        remaining -= x
    return out, remaining
