"""Pure numpy implementations of the theta-series kernels.

All kernels take 1-D ``complex128`` arrays and a truncation index ``K``
chosen by the caller; they perform no argument validation.
"""
import numpy as np

_PI_I = 1j * np.pi


def jtheta(z, tau, K):
    """Odd Jacobi theta, summed symmetrically over k in [-K-1, K]."""
    k = np.arange(K + 1)
    c = (-1.0) ** k * np.exp(_PI_I * tau * (k + 0.5) ** 2)
    e = np.exp(_PI_I * np.outer(z, 2 * k + 1))
    return -1j * ((e - 1.0 / e) @ c)


def jtheta_d(z, tau, K):
    """Derivative of :func:`jtheta` with respect to ``z``."""
    k = np.arange(K + 1)
    c = (-1.0) ** k * np.exp(_PI_I * tau * (k + 0.5) ** 2) * (_PI_I * (2 * k + 1))
    e = np.exp(_PI_I * np.outer(z, 2 * k + 1))
    return -1j * ((e + 1.0 / e) @ c)


def theta_char(a, b, w, tau, K):
    """Theta with characteristics, summed over j in [-K, K]."""
    j = np.arange(-K, K + 1) + a
    phase = _PI_I * (j * j * tau + 2.0 * np.outer(w + b, j))
    return np.exp(phase).sum(axis=1)


def theta_nome(x, p, K):
    """Multiplicative theta series sum p^{(n^2-n)/2} (-x)^n, n in [1-K, K]."""
    n = np.arange(1, K + 1)
    # p**0 must be 1 even for p == 0; cumulative product keeps that exact.
    steps = np.concatenate(([1.0 + 0j], np.full(K - 1, p, dtype=complex) ** n[:-1]))
    c = np.cumprod(steps)
    mx = -x
    pos = mx[:, None] ** n[None, :]
    neg = mx[:, None] ** (1 - n)[None, :]
    return (pos + neg) @ c
