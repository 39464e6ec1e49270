# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled theta-series kernels (same API as ``_pykernels``)."""
import numpy as np
cimport numpy as cnp

cdef extern from "<complex.h>" nogil:
    double complex cexp(double complex z)

cdef double PI = 3.141592653589793


def jtheta(cnp.complex128_t[::1] z, double complex tau, int K):
    cdef Py_ssize_t n = z.shape[0], i
    cdef int k
    cdef double complex e, e2, ep, em, acc, sgn
    cdef double complex[::1] c = np.empty(K + 1, dtype=np.complex128)
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    for k in range(K + 1):
        sgn = 1.0 if k % 2 == 0 else -1.0
        c[k] = sgn * cexp(1j * PI * tau * (k + 0.5) * (k + 0.5))
    for i in range(n):
        e = cexp(1j * PI * z[i])
        e2 = e * e
        ep = e
        em = 1.0 / e
        acc = 0
        for k in range(K + 1):
            acc = acc + c[k] * (ep - em)
            ep = ep * e2
            em = em / e2
        o[i] = -1j * acc
    return out


def jtheta_d(cnp.complex128_t[::1] z, double complex tau, int K):
    cdef Py_ssize_t n = z.shape[0], i
    cdef int k
    cdef double complex e, e2, ep, em, acc, sgn
    cdef double complex[::1] c = np.empty(K + 1, dtype=np.complex128)
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    for k in range(K + 1):
        sgn = 1.0 if k % 2 == 0 else -1.0
        c[k] = sgn * cexp(1j * PI * tau * (k + 0.5) * (k + 0.5)) * (1j * PI * (2 * k + 1))
    for i in range(n):
        e = cexp(1j * PI * z[i])
        e2 = e * e
        ep = e
        em = 1.0 / e
        acc = 0
        for k in range(K + 1):
            acc = acc + c[k] * (ep + em)
            ep = ep * e2
            em = em / e2
        o[i] = -1j * acc
    return out


def theta_char(double a, double b, cnp.complex128_t[::1] w, double complex tau, int K):
    cdef Py_ssize_t n = w.shape[0], i
    cdef int j
    cdef double s
    cdef double complex acc
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    for i in range(n):
        acc = 0
        for j in range(-K, K + 1):
            s = j + a
            acc = acc + cexp(1j * PI * (s * s * tau + 2.0 * s * (w[i] + b)))
        o[i] = acc
    return out


def theta_nome(cnp.complex128_t[::1] x, double complex p, int K):
    cdef Py_ssize_t n = x.shape[0], i
    cdef int m
    cdef double complex mx, inv, xp, xm, acc, cm, pm
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    for i in range(n):
        mx = -x[i]
        inv = 1.0 / mx
        xp = mx
        xm = 1.0
        cm = 1.0      # p^{(m^2-m)/2}
        pm = p        # p^m
        acc = 0
        for m in range(1, K + 1):
            acc = acc + cm * (xp + xm)
            cm = cm * pm
            pm = pm * p
            xp = xp * mx
            xm = xm * inv
        o[i] = acc
    return out
