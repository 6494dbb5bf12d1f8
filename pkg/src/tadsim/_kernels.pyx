# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled TSR kernels; same contract as ``_kernels_py``."""

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline void _counts(unsigned long long mask, int start, int n,
                         int* n0, int* n1, int* nc0, int* nc1) noexcept nogil:
    cdef unsigned long long full = (<unsigned long long>1 << n) - 1
    cdef unsigned long long seg = (mask >> start) & full
    cdef unsigned long long inv = (~seg) & full
    n1[0] = __builtin_popcountll(seg)
    n0[0] = n - n1[0]
    nc1[0] = __builtin_popcountll(seg & (seg >> 1))
    nc0[0] = __builtin_popcountll(inv & (inv >> 1))


def half_counts(unsigned long long mask, int start, int n):
    cdef int n0, n1, nc0, nc1
    _counts(mask, start, n, &n0, &n1, &nc0, &nc1)
    return n0, n1, nc0, nc1


cdef inline double _weighted(unsigned long long mask, int start, int half) noexcept nogil:
    cdef int n0, n1, nc0, nc1
    _counts(mask, start, half, &n0, &n1, &nc0, &nc1)
    return <double>(n0 * nc0 - n1 * nc1) / half


def weighted(unsigned long long mask, int start, int half):
    return _weighted(mask, start, half)


def update_factor(unsigned long long mask, int length, double alpha):
    cdef int half = length // 2
    cdef double x1 = _weighted(mask, 0, half)
    cdef double x2 = _weighted(mask, half, half)
    return alpha * x1 + (1.0 - alpha) * x2
