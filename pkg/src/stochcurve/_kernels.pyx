# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Brownian lattice sums and cyclic SPD tridiagonal solves.

Must stay bit-compatible with ``_fallback.py`` for the lattice; the solver
agrees with the fallback to rounding.
"""
import numpy as np

from libc.stdint cimport uint64_t, int64_t
from libc.math cimport rint, fabs
from scipy.special.cython_special cimport ndtri

cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef uint64_t COUNTER_SALT = 0x632BE59BD9B4E019ULL
cdef double TWO_M53 = 1.1102230246251565e-16
cdef double QUANT = 4294967296.0
cdef double INV_QUANT = 2.3283064365386963e-10


cdef inline uint64_t fmix(uint64_t z) noexcept nogil:
    z ^= z >> 30
    z *= MIX1
    z ^= z >> 27
    z *= MIX2
    z ^= z >> 31
    return z


def lattice_sums(const uint64_t[::1] path_keys, const int64_t[::1] modes,
                 int64_t step0, int64_t p, double[:, ::1] out):
    cdef Py_ssize_t S = path_keys.shape[0]
    cdef Py_ssize_t L = modes.shape[0]
    cdef Py_ssize_t s, j, f
    cdef uint64_t key, counter, bits
    cdef double acc, u
    with nogil:
        for s in range(S):
            key = path_keys[s]
            for j in range(L):
                acc = 0.0
                for f in range(p):
                    counter = (<uint64_t>modes[j] << 40) | <uint64_t>(step0 + f)
                    bits = fmix(key ^ fmix(counter + COUNTER_SALT))
                    u = (<double>(bits >> 11) + 0.5) * TWO_M53
                    acc += rint(ndtri(u) * QUANT)
                out[s, j] = acc * INV_QUANT
    return np.asarray(out)


def tridiag_ldl(const double[::1] diag, const double[::1] sub):
    """LDL^T of a symmetric tridiagonal matrix; ``sub[i]`` couples i and i+1."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    d_arr = np.empty(n)
    l_arr = np.zeros(n)
    cdef double[::1] d = d_arr
    cdef double[::1] l = l_arr
    d[0] = diag[0]
    if not d[0] > 0.0:
        return None, None, 0
    for i in range(1, n):
        l[i] = sub[i - 1] / d[i - 1]
        d[i] = diag[i] - l[i] * sub[i - 1]
        if not d[i] > 0.0:
            return None, None, i
    return d_arr, l_arr, -1


cdef void _ldl_solve_row(const double[::1] d, const double[::1] l,
                         double[::1] y) noexcept nogil:
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t i
    for i in range(1, n):
        y[i] -= l[i] * y[i - 1]
    for i in range(n):
        y[i] /= d[i]
    for i in range(n - 2, -1, -1):
        y[i] -= l[i + 1] * y[i + 1]


def ldl_solve_rows(const double[::1] d, const double[::1] l, double[:, ::1] rows):
    """Solve in place for every row of ``rows`` (one right-hand side per row)."""
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t r
    with nogil:
        for r in range(m):
            _ldl_solve_row(d, l, rows[r])
    return np.asarray(rows)


def cyclic_correct_rows(double[:, ::1] rows, const double[::1] z,
                        double scale, double theta):
    """Sherman-Morrison update y <- y - scale * (y[0] + theta*y[-1]) * z, row-wise."""
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t n = rows.shape[1]
    cdef Py_ssize_t r, i
    cdef double coef
    with nogil:
        for r in range(m):
            coef = scale * (rows[r, 0] + theta * rows[r, n - 1])
            for i in range(n):
                rows[r, i] -= coef * z[i]
    return np.asarray(rows)
