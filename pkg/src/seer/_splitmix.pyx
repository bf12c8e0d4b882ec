# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled SplitMix64 kernels. Bit-exact with ``_splitmix_py``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double _INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def mix64(z):
    return _mix(<uint64_t>(z & MASK64))


def next_u64(state):
    cdef uint64_t s = <uint64_t>(state & MASK64)
    s += _GOLDEN
    return _mix(s), s


def fill_uniform(state, Py_ssize_t n, double lo, double hi):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] view = out
    cdef uint64_t s = <uint64_t>(state & MASK64)
    cdef double span = hi - lo
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            s += _GOLDEN
            view[i] = lo + span * (<double>(_mix(s) >> 11) * _INV_2_53)
    return out, s


def uniform_rows(key, ids, Py_ssize_t dim, double lo, double hi):
    cdef int64_t[::1] idv = np.ascontiguousarray(ids, dtype=np.int64)
    cdef Py_ssize_t n = idv.shape[0]
    out = np.empty((n, dim), dtype=np.float64)
    cdef double[:, ::1] view = out
    cdef uint64_t k = <uint64_t>(key & MASK64)
    cdef uint64_t s
    cdef double span = hi - lo
    cdef Py_ssize_t r, c
    with nogil:
        for r in range(n):
            s = _mix(k + <uint64_t>idv[r] * _GOLDEN)
            for c in range(dim):
                s += _GOLDEN
                view[r, c] = lo + span * (<double>(_mix(s) >> 11) * _INV_2_53)
    return out
