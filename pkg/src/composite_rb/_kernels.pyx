# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: ordered 2x2 products and the midpoint drive integrator."""
import numpy as np

from libc.math cimport cos, sin, sqrt, fabs

cdef double REUNITARIZE_THRESHOLD = 1e-10
cdef Py_ssize_t CHECK_EVERY = 1024


cdef inline void _mul(const double complex* a, double complex* u) nogil:
    # u <- a @ u, both row-major 2x2
    cdef double complex u00 = a[0] * u[0] + a[1] * u[2]
    cdef double complex u01 = a[0] * u[1] + a[1] * u[3]
    cdef double complex u10 = a[2] * u[0] + a[3] * u[2]
    cdef double complex u11 = a[2] * u[1] + a[3] * u[3]
    u[0] = u00
    u[1] = u01
    u[2] = u10
    u[3] = u11


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double _defect(double complex* u) nogil:
    # max-entry norm of U U^dagger - I
    cdef double complex d00 = u[0] * u[0].conjugate() + u[1] * u[1].conjugate() - 1
    cdef double complex d11 = u[2] * u[2].conjugate() + u[3] * u[3].conjugate() - 1
    cdef double complex d01 = u[0] * u[2].conjugate() + u[1] * u[3].conjugate()
    cdef double m = sqrt(_abs2(d00))
    cdef double t = sqrt(_abs2(d11))
    if t > m:
        m = t
    t = sqrt(_abs2(d01))
    if t > m:
        m = t
    return m


cdef inline void _gram_schmidt(double complex* u) nogil:
    # columns (u[0], u[2]) and (u[1], u[3])
    cdef double n0 = sqrt(_abs2(u[0]) + _abs2(u[2]))
    u[0] = u[0] / n0
    u[2] = u[2] / n0
    cdef double complex proj = u[0].conjugate() * u[1] + u[2].conjugate() * u[3]
    u[1] = u[1] - proj * u[0]
    u[3] = u[3] - proj * u[2]
    cdef double n1 = sqrt(_abs2(u[1]) + _abs2(u[3]))
    u[1] = u[1] / n1
    u[3] = u[3] / n1


cdef inline void _maybe_fix(double complex* u) nogil:
    if _defect(u) > REUNITARIZE_THRESHOLD:
        _gram_schmidt(u)


def chain_product(table, order):
    """Ordered product ``table[order[-1]] @ ... @ table[order[0]]``."""
    cdef const double complex[:, :, ::1] tab = np.ascontiguousarray(table, dtype=np.complex128)
    cdef const Py_ssize_t[::1] idx = np.ascontiguousarray(order, dtype=np.intp)
    cdef Py_ssize_t n = tab.shape[0]
    cdef Py_ssize_t m = idx.shape[0]
    cdef Py_ssize_t k, j
    out = np.eye(2, dtype=np.complex128)
    cdef double complex[:, ::1] res = out
    cdef double complex u[4]
    u[0] = 1
    u[1] = 0
    u[2] = 0
    u[3] = 1
    for k in range(m):
        j = idx[k]
        if j < 0 or j >= n:
            raise IndexError(f"order entry {j} out of range for table of {n}")
    with nogil:
        for k in range(m):
            _mul(&tab[idx[k], 0, 0], u)
            if (k + 1) % CHECK_EVERY == 0:
                _maybe_fix(u)
        _maybe_fix(u)
    res[0, 0] = u[0]
    res[0, 1] = u[1]
    res[1, 0] = u[2]
    res[1, 1] = u[3]
    return out


cdef inline void _step(double vx, double vy, double vz, double complex* a) nogil:
    # exp(-i v.sigma)
    cdef double n = sqrt(vx * vx + vy * vy + vz * vz)
    cdef double c = cos(n)
    cdef double s = 1.0
    if n > 0:
        s = sin(n) / n
    a[0] = c - 1j * s * vz
    a[3] = c + 1j * s * vz
    a[1] = -s * vy - 1j * s * vx
    a[2] = s * vy - 1j * s * vx


def drive_product(amps, freqs, phases, double hz, double duration, Py_ssize_t steps):
    """Midpoint time-ordered product for ``H(t) = sum_j a_j (X cos(w_j t + p_j) + Y sin(w_j t + p_j)) + hz Z``."""
    cdef const double[::1] A = np.ascontiguousarray(amps, dtype=np.float64)
    cdef const double[::1] W = np.ascontiguousarray(freqs, dtype=np.float64)
    cdef const double[::1] P = np.ascontiguousarray(phases, dtype=np.float64)
    cdef Py_ssize_t nterms = A.shape[0]
    cdef double dt = duration / steps
    cdef double t, hx, hy, arg
    cdef Py_ssize_t k, j
    cdef double complex u[4]
    cdef double complex a[4]
    u[0] = 1
    u[1] = 0
    u[2] = 0
    u[3] = 1
    with nogil:
        for k in range(steps):
            t = (k + 0.5) * dt
            hx = 0
            hy = 0
            for j in range(nterms):
                arg = W[j] * t + P[j]
                hx = hx + A[j] * cos(arg)
                hy = hy + A[j] * sin(arg)
            _step(hx * dt, hy * dt, hz * dt, a)
            _mul(a, u)
            if (k + 1) % CHECK_EVERY == 0:
                _maybe_fix(u)
        _maybe_fix(u)
    out = np.empty((2, 2), dtype=np.complex128)
    out[0, 0] = u[0]
    out[0, 1] = u[1]
    out[1, 0] = u[2]
    out[1, 1] = u[3]
    return out
