"""Intertwining matrices Xi, their determinants, the normalizer D and g = Xi D^{-1}.

Rows are indexed i = 0..N-1 (row i corresponds to the i+1-st row of the
usual 1-based formulas), columns by particles.

Spectral families take already-centred coordinates qbar by default.
The determinant representations apply shifts to qbar directly, so
:func:`xi_from_coords` never re-centres its input.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._linalg import lu_det
from .elliptic import Modulus, as_modulus, c_N, guarded_theta, jacobi_theta, theta_char
from .errors import NearSingular, VariantMismatch


class XiVariant(str, enum.Enum):
    RATIONAL = "RationalNoSpectral"
    TRIG = "TrigNoSpectral"
    RATIONAL_SPECTRAL = "RationalSpectral"
    TRIG_SPECTRAL = "TrigSpectral"
    ELLIPTIC = "EllipticSpectral"

    @property
    def spectral(self) -> bool:
        return self in (XiVariant.RATIONAL_SPECTRAL, XiVariant.TRIG_SPECTRAL, XiVariant.ELLIPTIC)

    def check_z(self, z):
        if self.spectral and z is None:
            raise VariantMismatch(f"{self.value} requires a spectral parameter z")
        if not self.spectral and z is not None:
            raise VariantMismatch(f"{self.value} takes no spectral parameter")


@dataclass(frozen=True)
class Positions:
    """Particle coordinates with centre-of-mass data.

    ``min_separation`` is the pairwise-distinctness floor.
    """

    q: np.ndarray
    min_separation: float = 1e-8
    q0: complex = field(init=False)
    qbar: np.ndarray = field(init=False)

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=complex)).copy()
        if q.ndim != 1 or q.size == 0:
            raise ValueError("positions must be a non-empty 1-D sequence")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        N = q.size
        if N > 1:
            d = np.abs(q[:, None] - q[None, :])
            np.fill_diagonal(d, np.inf)
            if np.min(d) < self.min_separation:
                raise NearSingular("coincident particle coordinates")
        q0 = complex(q.mean())
        qbar = q - q0
        qbar.setflags(write=False)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "qbar", qbar)

    @property
    def N(self) -> int:
        return self.q.size

    @property
    def x_trig(self) -> np.ndarray:
        return np.exp(self.q)

    @property
    def x_ell(self) -> np.ndarray:
        return np.exp(2j * np.pi * self.q)

    def shifted(self, dq) -> "Positions":
        return Positions(self.q + np.asarray(dq), self.min_separation)


def lattice_separation(q, mod) -> float:
    """Smallest distance from a pairwise difference q_i - q_j to the period
    lattice Z + tau Z, i.e. the particle separation on the torus."""
    q = np.atleast_1d(np.asarray(q, dtype=complex))
    if q.size < 2:
        return np.inf
    tau = as_modulus(mod).tau
    d = (q[:, None] - q[None, :])[~np.eye(q.size, dtype=bool)]
    # reduce along tau first, then along 1; neighbours cover skewed lattices
    d = d - np.round(d.imag / tau.imag) * tau
    d = d - np.round(d.real)
    nb = np.array([m + n * tau for m in (-1, 0, 1) for n in (-1, 0, 1)])
    return float(np.min(np.abs(d[:, None] - nb[None, :])))


def _rho(N: int) -> np.ndarray:
    r = np.arange(N)
    r[-1] = N
    return r


def xi_from_coords(v: XiVariant, w, z=None, mod=None) -> np.ndarray:
    """Xi built from explicit per-column additive coordinates ``w``.

    Rational families use w directly, trigonometric families x = e^{w}.
    For spectral families ``w`` plays the role of the (centred) qbar and is
    used verbatim.
    """
    v = XiVariant(v)
    v.check_z(z)
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    N = w.size
    rows = np.arange(N)[:, None]
    if v is XiVariant.RATIONAL:
        return (-w[None, :]) ** rows
    if v is XiVariant.TRIG:
        return np.exp(w)[None, :] ** (N - 1 - rows)
    if v is XiVariant.RATIONAL_SPECTRAL:
        return (z / N - w[None, :]) ** _rho(N)[:, None]
    if v is XiVariant.TRIG_SPECTRAL:
        y = np.exp(-2 * w + 2 * z / N)
        xi = y[None, :] ** rows
        xi[N - 1] += (-1) ** N / y
        return xi
    mod = as_modulus(mod)
    modN = mod.scaled(N)
    xi = np.empty((N, N), dtype=complex)
    for i in range(N):
        xi[i] = theta_char(0.5 - (i + 1) / N, N / 2, z - N * w, modN)
    return xi


def xi_matrix(v: XiVariant, z, pos: Positions, mod=None, centered: bool = True) -> np.ndarray:
    """Xi matrix of the given family at the particle positions.

    Spectral families use qbar when ``centered`` (the default), else q.
    """
    v = XiVariant(v)
    w = pos.qbar if (v.spectral and centered) else pos.q
    return xi_from_coords(v, w, z, mod)


def _vandermonde(a) -> complex:
    a = np.asarray(a, dtype=complex)
    N = a.size
    iu = np.triu_indices(N, 1)
    return complex(np.prod((a[:, None] - a[None, :])[iu]))


def xi_det_from_coords(v: XiVariant, w, z=None, mod=None, form: str = "y") -> complex:
    """Closed-form determinant of :func:`xi_from_coords`.

    ``form`` only matters for TrigSpectral: "y" is the product formula in
    y_j = e^{-2 w_j + 2z/N}; "sinh" is the same expression rewritten in the
    coordinates (valid when sum(w) = 0).
    """
    v = XiVariant(v)
    v.check_z(z)
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    N = w.size
    if v is XiVariant.RATIONAL:
        return _vandermonde(w)
    if v is XiVariant.TRIG:
        return _vandermonde(np.exp(w))
    if v is XiVariant.RATIONAL_SPECTRAL:
        return complex((z - w.sum()) * _vandermonde(w))
    if v is XiVariant.TRIG_SPECTRAL:
        if form == "sinh":
            iu = np.triu_indices(N, 1)
            d = (w[:, None] - w[None, :])[iu]
            return complex(np.exp((N - 2) * z) * (np.exp(z) - np.exp(-z)) * np.prod(np.exp(d) - np.exp(-d)))
        y = np.exp(-2 * w + 2 * z / N)
        sign = (-1) ** (N * (N - 1) // 2)
        return complex(sign * (1 - 1 / np.prod(y)) * _vandermonde(y))
    mod = as_modulus(mod)
    iu = np.triu_indices(N, 1)
    th = np.prod(jacobi_theta((w[:, None] - w[None, :])[iu], mod)) if N > 1 else 1.0
    # the overall sign is opposite to the customary c_N normalisation
    return complex(-c_N(mod, N) * jacobi_theta(z - w.sum(), mod) * th)


def xi_determinant_closed(v: XiVariant, z, pos: Positions, mod=None, centered: bool = True,
                          form: str = "y") -> complex:
    v = XiVariant(v)
    w = pos.qbar if (v.spectral and centered) else pos.q
    return xi_det_from_coords(v, w, z, mod, form)


def d_matrix(pos: Positions, mod) -> np.ndarray:
    """Diagonal normalizer D_jj = prod_{k != j} theta(q_j - q_k)."""
    mod = as_modulus(mod)
    q = pos.q
    N = q.size
    diag = np.ones(N, dtype=complex)
    for j in range(N):
        others = np.delete(q, j)
        if others.size:
            diag[j] = np.prod(guarded_theta(q[j] - others, mod, "d_matrix"))
    return np.diag(diag)


def g_matrix(z, pos: Positions, mod) -> np.ndarray:
    """g(z) = Xi(z) D^{-1} for the elliptic family."""
    xi = xi_matrix(XiVariant.ELLIPTIC, z, pos, mod)
    return xi / np.diag(d_matrix(pos, mod))[None, :]


def normalizer(v: XiVariant, pos: Positions, mod=None) -> np.ndarray:
    """Diagonal D for which D Xi^{-1}(z) Xi(shifted) D^{-1} is the
    corresponding Ruijsenaars-Schneider coefficient matrix."""
    v = XiVariant(v)
    if v is XiVariant.ELLIPTIC:
        return np.diag(d_matrix(pos, mod))
    if v in (XiVariant.RATIONAL, XiVariant.RATIONAL_SPECTRAL):
        a = pos.q
    elif v is XiVariant.TRIG:
        a = pos.x_trig
    else:
        a = np.exp(-2 * pos.q)
    N = a.size
    diff = a[:, None] - a[None, :] + np.eye(N)
    return np.prod(diff, axis=1)


def vandermonde_rescaled_xi(xi, x) -> np.ndarray:
    """Multiply column j (1-based) by x_j^{(N+1)/2 - j}.

    This converts between the Vandermonde conventions prod(x_i - x_j) and
    prod(1 - x_i/x_j) for the trigonometric family.
    """
    xi = np.asarray(xi, dtype=complex)
    x = np.asarray(x, dtype=complex)
    N = x.size
    j = np.arange(1, N + 1)
    return xi * (x ** ((N + 1) / 2 - j))[None, :]


def xi_determinant_check(v: XiVariant, z, pos: Positions, mod=None, form: str = "y") -> float:
    """Relative gap between the LU determinant of Xi and its closed form."""
    v = XiVariant(v)
    lu = lu_det(xi_matrix(v, z, pos, mod))
    closed = xi_determinant_closed(v, z, pos, mod, form=form)
    s = max(abs(lu), abs(closed))
    return 0.0 if s == 0 else abs(lu - closed) / s


def elliptic_xi_zero_check(pos: Positions, mod, z_ref) -> float:
    """|det Xi(0)| relative to |det Xi(z_ref)|; the elliptic determinant
    vanishes at z = 0 because the centred coordinates sum to zero."""
    d0 = lu_det(xi_matrix(XiVariant.ELLIPTIC, 0.0, pos, mod))
    dr = lu_det(xi_matrix(XiVariant.ELLIPTIC, z_ref, pos, mod))
    return abs(d0) / abs(dr)
