# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in :mod:`subwave1d._kernels_py`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, fabs, sqrt

cnp.import_array()


cdef inline double _abs(double complex z) nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


cdef inline double _arg(double complex z) nogil:
    return atan2(z.imag, z.real)


def continue_branch(roots, start):
    cdef double complex[::1] r = np.ascontiguousarray(roots, dtype=np.complex128)
    cdef Py_ssize_t n = r.shape[0]
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double complex prev = start
    cdef double complex first = start
    cdef double complex c
    cdef double jump = 0.0, d
    cdef Py_ssize_t k
    with nogil:
        for k in range(n):
            c = r[k]
            if _abs(c - prev) > _abs(c + prev):
                c = -c
            if k > 0 and _abs(prev) != 0 and _abs(c) != 0:
                d = fabs(_arg(c / prev))
                if d > jump:
                    jump = d
            out[k] = c
            prev = c
        if n > 0 and _abs(first) != 0 and _abs(out[0]) != 0:
            d = fabs(_arg(out[0] / first))
            if d > jump:
                jump = d
    return out_arr, jump


def wilson_sum(bra, ket):
    cdef double complex[:, ::1] b = np.ascontiguousarray(bra, dtype=np.complex128)
    cdef double complex[:, ::1] u = np.ascontiguousarray(ket, dtype=np.complex128)
    cdef Py_ssize_t K = b.shape[0], N = b.shape[1]
    cdef Py_ssize_t k, n, kn
    cdef double complex ov
    cdef double total = 0.0, mn = 1e308, a
    if u.shape[0] != K or u.shape[1] != N:
        raise ValueError("bra and ket must have the same shape")
    with nogil:
        for k in range(K):
            kn = k + 1
            if kn == K:
                kn = 0
            ov = 0
            for n in range(N):
                ov = ov + (b[k, n].real - 1j * b[k, n].imag) * u[kn, n]
            total += _arg(ov)
            a = _abs(ov)
            if a < mn:
                mn = a
    return total, mn
