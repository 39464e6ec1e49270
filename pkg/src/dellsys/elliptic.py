"""Theta functions, the Kronecker function and their classical identities.

Conventions
-----------
* ``theta_series(x, p)``  -- multiplicative theta, sum_n p^{(n^2-n)/2} (-x)^n.
* ``jacobi_theta(z, tau)`` -- the odd Jacobi theta
  -i sum_k (-1)^k e^{pi i (k+1/2)^2 tau} e^{pi i (2k+1) z}.
* ``theta_char(a, b, z, tau)`` -- theta with characteristics
  sum_j exp(pi i (j+a)^2 tau + 2 pi i (j+a)(z+b)).

Every series is truncated symmetrically so that the exact symmetries
(oddness of the Jacobi theta, the zero of theta_series at x = 1) survive
truncation. The truncation index is picked per call from the modulus and
the size of the arguments.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from ._linalg import lu_det
from .errors import DomainError, NearSingular, TruncationError, ZeroArgument

K_CAP = 200
SINGULAR_GUARD = 1e-10


@dataclass(frozen=True)
class SeriesControl:
    """Truncation settings.

    ``max_index`` pins the truncation index; when ``None`` the smallest
    index meeting ``tail_tolerance`` is chosen automatically.
    """

    max_index: int | None = None
    tail_tolerance: float = 1e-15
    domain_guard: float = 1e-3

    def __post_init__(self):
        if self.max_index is not None and (int(self.max_index) != self.max_index or self.max_index < 1):
            raise DomainError(f"max_index must be a positive integer, got {self.max_index!r}")
        if not self.tail_tolerance > 0:
            raise DomainError("tail_tolerance must be positive")
        if not self.domain_guard > 0:
            raise DomainError("domain_guard must be positive")


DEFAULT_CONTROL = SeriesControl()


@dataclass(frozen=True)
class Modulus:
    """Elliptic modulus tau (upper half plane) and nome p = exp(2 pi i tau)."""

    tau: complex
    guard: float = DEFAULT_CONTROL.domain_guard

    def __post_init__(self):
        tau = complex(self.tau)
        object.__setattr__(self, "tau", tau)
        if not tau.imag > self.guard:
            raise DomainError(f"Im tau = {tau.imag:g} must exceed the domain guard {self.guard:g}")

    @property
    def p(self) -> complex:
        return complex(np.exp(2j * np.pi * self.tau))

    def scaled(self, n) -> "Modulus":
        """The modulus n*tau (used for the intertwining matrices)."""
        return Modulus(self.tau * n, self.guard)


def as_modulus(mod) -> Modulus:
    return mod if isinstance(mod, Modulus) else Modulus(mod)


def _choose_index(absq: float, growth: float, ctl: SeriesControl, quad: float) -> int:
    """Smallest K with absq^{quad(K)} * growth^K below the tolerance.

    ``absq`` is the decay base of the series, ``growth`` >= 1 the per-term
    growth coming from the argument.
    """
    tol = ctl.tail_tolerance
    if ctl.max_index is not None:
        K = int(ctl.max_index)
        if _tail(absq, growth, K, quad) > tol:
            raise TruncationError(
                f"tail bound {_tail(absq, growth, K, quad):.3g} at K={K} exceeds tolerance {tol:g}"
            )
        return K
    for K in range(1, K_CAP + 1):
        if _tail(absq, growth, K, quad) <= tol:
            return K
    raise TruncationError(f"no truncation index up to {K_CAP} meets tolerance {tol:g}")


def _tail(absq: float, growth: float, K: int, quad) -> float:
    if absq == 0.0:
        return 0.0
    expo = quad(K) * math.log(absq) + (K + 1) * math.log(growth)
    return math.inf if expo > 700.0 else math.exp(expo)


def _quad_nome(K):  # exponent of the first dropped term of theta_series
    return K * (K + 1) / 2


def _quad_jacobi(K):  # (k+1/2)^2 for the first dropped k = K+1, relative to k = 0
    return (K + 1.5) ** 2 - 0.25


def _as_array(x):
    arr = np.asarray(x, dtype=complex)
    return arr, np.ascontiguousarray(arr.ravel())


def _wrap(shape_src, values):
    if shape_src.ndim == 0:
        return complex(values[0])
    return values.reshape(shape_src.shape)


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------


def theta_series(x, mod=0.0, ctl: SeriesControl = DEFAULT_CONTROL):
    """theta_p(x) for a Modulus or a raw nome ``p`` with |p| < 1 (p = 0 allowed)."""
    p = mod.p if isinstance(mod, Modulus) else complex(mod)
    if abs(p) >= 1:
        raise DomainError(f"|p| = {abs(p):g} must be < 1")
    arr, flat = _as_array(x)
    if flat.size and np.min(np.abs(flat)) == 0:
        raise ZeroArgument("theta_series is a Laurent series in x; x = 0 is not allowed")
    if p == 0:
        return _wrap(arr, 1.0 - flat)
    a = np.abs(flat)
    growth = float(max(1.0, np.max(a), np.max(1.0 / a))) if flat.size else 1.0
    K = _choose_index(abs(p), growth, ctl, _quad_nome)
    return _wrap(arr, kernels.theta_nome(flat, p, K + 1))


def _jacobi_index(flat, mod: Modulus, ctl: SeriesControl) -> int:
    im = float(np.max(np.abs(flat.imag))) if flat.size else 0.0
    absq = math.exp(-math.pi * mod.tau.imag)
    return _choose_index(absq, math.exp(2 * math.pi * im), ctl, _quad_jacobi)


def jacobi_theta(z, mod, ctl: SeriesControl = DEFAULT_CONTROL):
    """Odd Jacobi theta function."""
    mod = as_modulus(mod)
    arr, flat = _as_array(z)
    K = _jacobi_index(flat, mod, ctl)
    return _wrap(arr, kernels.jtheta(flat, mod.tau, K))


def jacobi_theta_deriv(z, mod, ctl: SeriesControl = DEFAULT_CONTROL):
    """Derivative of the odd Jacobi theta (term-wise differentiated series)."""
    mod = as_modulus(mod)
    arr, flat = _as_array(z)
    # the derivative picks up a factor (2k+1); one more term covers it
    K = _jacobi_index(flat, mod, ctl) + 1
    return _wrap(arr, kernels.jtheta_d(flat, mod.tau, K))


def theta_char(a, b, z, mod, ctl: SeriesControl = DEFAULT_CONTROL):
    """Theta function with characteristics [a; b]."""
    mod = as_modulus(mod)
    a, b = float(a), float(b)
    arr, flat = _as_array(z)
    K = _jacobi_index(flat, mod, ctl) + int(math.ceil(abs(a))) + 1
    return _wrap(arr, kernels.theta_char(a, b, flat, mod.tau, K))


@lru_cache(maxsize=256)
def _zero_scale(tau: complex) -> float:
    return abs(jacobi_theta_deriv(0.0, Modulus(tau, guard=0.0 + 1e-300)))


def theta_zero_scale(mod) -> float:
    """|theta'(0)|, the scale used by the singularity guard."""
    return _zero_scale(as_modulus(mod).tau)


def guarded_theta(z, mod, what: str = "theta"):
    """Jacobi theta values that are used as denominators.

    Raises NearSingular when any value falls below the guard relative to
    |theta'(0)|.
    """
    mod = as_modulus(mod)
    val = jacobi_theta(z, mod)
    if np.min(np.abs(val)) < SINGULAR_GUARD * theta_zero_scale(mod):
        raise NearSingular(f"{what}: argument too close to a zero of theta")
    return val


def theta_relation_check(w, mod) -> float:
    """Residual of theta_p(e^{2 pi i w}) = -i p^{-1/8} e^{pi i w} theta(w|tau).

    The square roots are taken from the additive arguments w and tau.
    """
    mod = as_modulus(mod)
    w = complex(w)
    lhs = theta_series(np.exp(2j * np.pi * w), mod)
    rhs = -1j * np.exp(-2j * np.pi * mod.tau / 8) * np.exp(1j * np.pi * w) * jacobi_theta(w, mod)
    return _rel(lhs, rhs)


def kronecker_phi(z, u, mod):
    """Phi(z, u) = theta'(0) theta(z+u) / (theta(z) theta(u))."""
    mod = as_modulus(mod)
    z = np.asarray(z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    den = guarded_theta(z, mod, "kronecker_phi") * guarded_theta(u, mod, "kronecker_phi")
    out = jacobi_theta_deriv(0.0, mod) * jacobi_theta(z + u, mod) / den
    return complex(out) if np.ndim(out) == 0 else out


def eisenstein_E1(z, mod):
    """E1(z) = theta'(z)/theta(z)."""
    mod = as_modulus(mod)
    out = jacobi_theta_deriv(z, mod) / guarded_theta(z, mod, "eisenstein_E1")
    return complex(out) if np.ndim(out) == 0 else out


def dedekind_eta(mod, ctl: SeriesControl = DEFAULT_CONTROL) -> complex:
    """Dedekind eta e^{pi i tau/12} prod_{k>=1} (1 - p^k)."""
    mod = as_modulus(mod)
    p = mod.p
    ap = abs(p)
    # tail of the log-product is bounded by ~|p|^{K+1}/(1-|p|)
    K = 1
    while ap ** (K + 1) / (1 - ap) > ctl.tail_tolerance:
        K += 1
        if K > 50 * K_CAP:
            raise TruncationError("eta product does not converge to tolerance")
    k = np.arange(1, K + 1)
    return complex(np.exp(1j * np.pi * mod.tau / 12) * np.prod(1 - p ** k))


def c_N(mod, N: int) -> complex:
    """c_N(tau) = (-1)^{N-1} / (i eta(tau))^{(N-1)(N-2)/2}."""
    e = (N - 1) * (N - 2) // 2
    sign = -1.0 if (N - 1) % 2 else 1.0
    if e == 0:
        return complex(sign)
    return complex(sign / (1j * dedekind_eta(mod)) ** e)


# ---------------------------------------------------------------------------
# Identities
# ---------------------------------------------------------------------------


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - b)) / scale)


def cauchy_matrix(z, u, w, mod) -> np.ndarray:
    """The elliptic Cauchy matrix Phi(z, u_i - w_j)."""
    u = np.asarray(u, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return kronecker_phi(z * np.ones((u.size, w.size)), u[:, None] - w[None, :], mod)


def cauchy_determinant_closed(z, u, w, mod) -> complex:
    """Closed product form of det Phi(z, u_i - w_j)."""
    mod = as_modulus(mod)
    u = np.asarray(u, dtype=complex)
    w = np.asarray(w, dtype=complex)
    N = u.size
    th = lambda x: jacobi_theta(x, mod)
    num = jacobi_theta_deriv(0.0, mod) ** N * th(z + np.sum(u - w))
    den = guarded_theta(z, mod, "cauchy") * np.prod(guarded_theta(u[:, None] - w[None, :], mod, "cauchy"))
    for i in range(N):
        for j in range(i + 1, N):
            num *= th(u[i] - u[j]) * th(w[j] - w[i])
    return complex(num / den)


def cauchy_determinant(z, u, w, mod) -> tuple[complex, complex]:
    """(LU determinant, closed form) of the elliptic Cauchy matrix."""
    return lu_det(cauchy_matrix(z, u, w, mod)), cauchy_determinant_closed(z, u, w, mod)


def cauchy_determinant_check(z, u, w, mod) -> float:
    lhs, rhs = cauchy_determinant(z, u, w, mod)
    return _rel(lhs, rhs)


def fay_checks(z, w, u1, u2, mod) -> tuple[float, float, float]:
    """Residuals of the Fay trisecant identity, its degeneration (at u = u1)
    and the theta-product form of the E1 combination (at u = u1)."""
    mod = as_modulus(mod)
    phi = lambda a, b: kronecker_phi(a, b, mod)
    E1 = lambda a: eisenstein_E1(a, mod)
    th = lambda a: jacobi_theta(a, mod)
    lhs1 = phi(z, u1) * phi(w, u2)
    rhs1 = phi(z, u1 - u2) * phi(z + w, u2) + phi(w, u2 - u1) * phi(z + w, u1)
    u = u1
    bracket = E1(z) + E1(w) + E1(u) - E1(z + w + u)
    lhs2 = phi(z, u) * phi(w, u)
    rhs2 = phi(z + w, u) * bracket
    rhs3 = (
        jacobi_theta_deriv(0.0, mod)
        * th(z + w) * th(z + u) * th(w + u)
        / (th(z) * th(w) * th(u) * guarded_theta(z + w + u, mod, "fay"))
    )
    return _rel(lhs1, rhs1), _rel(lhs2, rhs2), _rel(bracket, rhs3)


def trig_limit_phi(z, u) -> complex:
    """Degenerate Kronecker function pi (cot(pi z) + cot(pi u))."""
    return complex(np.pi * (1 / np.tan(np.pi * z) + 1 / np.tan(np.pi * u)))


def gl2_fay_reduction_check(z, q12, k1: int, k2: int, eta, mod) -> float:
    """Residual of the two-particle determinant combination

        Phi(z,-k1 eta)Phi(z,-k2 eta) - Phi(z,q21-k1 eta)Phi(z,q12-k2 eta)
          = Phi(z,-(k1+k2)eta) (E1(q12+k1 eta) + E1(q21+k2 eta) - E1(k1 eta) - E1(k2 eta)).

    Requires k1, k2 and k1 + k2 nonzero (otherwise a Kronecker factor sits at its pole).
    """
    if k1 == 0 or k2 == 0 or k1 + k2 == 0:
        raise DomainError("k1, k2 and k1 + k2 must be nonzero")
    mod = as_modulus(mod)
    phi = lambda a, b: kronecker_phi(a, b, mod)
    E1 = lambda a: eisenstein_E1(a, mod)
    q21 = -q12
    lhs = phi(z, -k1 * eta) * phi(z, -k2 * eta) - phi(z, q21 - k1 * eta) * phi(z, q12 - k2 * eta)
    rhs = phi(z, -(k1 + k2) * eta) * (E1(q12 + k1 * eta) + E1(q21 + k2 * eta) - E1(k1 * eta) - E1(k2 * eta))
    return _rel(lhs, rhs)
