"""Difference operators as shift-coefficient tables, and the determinant
representations of their generating functions.

An operator sum_n c_n(x) T^n (T^n shifts the j-th coordinate n_j times)
is represented extensionally by its coefficients c_n evaluated at one
point. Coefficients are stored without the (-lambda)^{sum n} factor;
:meth:`ShiftCoefficientTable.value` substitutes lambda on read.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from ._linalg import lu_det
from .elliptic import (
    as_modulus,
    cauchy_determinant_closed,
    guarded_theta,
    jacobi_theta,
    jacobi_theta_deriv,
    theta_series,
)
from .errors import DomainError, NearSingular
from .intertwiner import Positions, XiVariant, xi_from_coords
from .lax import ModelParams, omega_weight, rs_lax_coeff_matrix

ShiftIndex = tuple


def as_shift(n, cap: int | None = None) -> ShiftIndex:
    n = tuple(int(k) for k in n)
    if cap is not None and any(abs(k) > cap for k in n):
        raise DomainError(f"shift index {n} exceeds the cap {cap}")
    return n


def shift_box(N: int, M: int) -> list[ShiftIndex]:
    """All n in Z^N with |n_j| <= M, in lexicographic order."""
    return [tuple(n) for n in itertools.product(range(-M, M + 1), repeat=N)]


def shift_weight(omega: complex, n) -> complex:
    """prod_j omega^{(n_j^2 - n_j)/2} (with 0^0 = 1)."""
    return complex(np.prod(omega_weight(omega, np.asarray(n))))


@dataclass(frozen=True)
class ShiftCoefficientTable:
    """Sparse map n -> coefficient, evaluated at a fixed point."""

    entries: Mapping[ShiftIndex, complex]
    cap: int | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        clean = {as_shift(n, self.cap): complex(v) for n, v in self.entries.items()}
        for v in clean.values():
            if not np.isfinite(v):
                raise DomainError("non-finite coefficient in table")
        object.__setattr__(self, "entries", clean)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, n) -> complex:
        return self.entries.get(as_shift(n), 0j)

    @staticmethod
    def degree(n) -> int:
        return int(sum(n))

    def value(self, n, lam) -> complex:
        """Coefficient of T^n including the factor (-lam)^{sum n}."""
        return self[n] * (-complex(lam)) ** self.degree(n)

    def graded(self) -> dict[int, dict[ShiftIndex, complex]]:
        """Entries grouped by total degree sum(n)."""
        out: dict[int, dict[ShiftIndex, complex]] = {}
        for n, v in self.entries.items():
            out.setdefault(self.degree(n), {})[n] = v
        return out

    def normal_ordered(self) -> "ShiftCoefficientTable":
        """A table is already in normal-ordered form; returns itself."""
        return self

    def residual(self, other: "ShiftCoefficientTable") -> float:
        """Max relative coefficient mismatch over the union of indices."""
        worst = 0.0
        for n in set(self.entries) | set(other.entries):
            a, b = self[n], other[n]
            s = max(abs(a), abs(b))
            if s > 0:
                worst = max(worst, abs(a - b) / s)
        return worst


def normal_ordered_product(*tables: ShiftCoefficientTable) -> ShiftCoefficientTable:
    """Normal-ordered product: all shifts moved right, coefficients
    multiplied at the unshifted point. Commutative and degree-additive."""
    acc = {tuple(): 1.0 + 0j}
    if not tables:
        return ShiftCoefficientTable(acc)
    N = len(next(iter(tables[0].entries))) if tables[0].entries else 0
    acc = {(0,) * N: 1.0 + 0j}
    for tab in tables:
        nxt: dict[ShiftIndex, complex] = {}
        for n, a in acc.items():
            for m, b in tab.entries.items():
                k = tuple(x + y for x, y in zip(n, m))
                nxt[k] = nxt.get(k, 0j) + a * b
        acc = nxt
    return ShiftCoefficientTable(acc)


def table_sum(*tables: ShiftCoefficientTable, signs: Iterable[complex] | None = None) -> ShiftCoefficientTable:
    signs = [1.0] * len(tables) if signs is None else list(signs)
    acc: dict[ShiftIndex, complex] = {}
    for s, tab in zip(signs, tables):
        for n, v in tab.entries.items():
            acc[n] = acc.get(n, 0j) + s * v
    return ShiftCoefficientTable(acc)


def _lam_factor(n, lam):
    return 1.0 if lam is None else (-complex(lam)) ** int(sum(n))


# ---------------------------------------------------------------------------
# Direct coefficients of the generating functions
# ---------------------------------------------------------------------------


def o_hat_coefficient(n, x, t, p, omega, lam=None, conjugated: bool = False) -> complex:
    """omega-weight * prod_{i<j} theta_p(t^{n_i-n_j} x_i/x_j)/theta_p(x_i/x_j).

    With ``conjugated`` the coefficient of prod_j x_j^{-s(j-1)} O prod_j
    x_j^{s(j-1)}, q^s = t, is returned: the extra factor prod_j t^{(j-1) n_j}.
    """
    n = np.asarray(n, int)
    x = np.asarray(x, complex)
    N = n.size
    val = shift_weight(omega, n) * _lam_factor(n, lam)
    if N > 1:
        iu = np.triu_indices(N, 1)
        ratio = (x[:, None] / x[None, :])[iu]
        nij = (n[:, None] - n[None, :])[iu]
        den = theta_series(ratio, p)
        if np.min(np.abs(den)) < 1e-12:
            raise NearSingular("o_hat_coefficient: theta_p denominator vanishes")
        val *= np.prod(theta_series(complex(t) ** nij * ratio, p) / den)
    if conjugated:
        val *= complex(t) ** int(np.dot(np.arange(N), n))
    return complex(val)


def O_hat_coeff(n, pos: Positions, params: ModelParams, mod=None, *, coords: str = "elliptic",
                lam=None, conjugated: bool = False) -> complex:
    """Coefficient of prod_i q^{n_i x_i d_i} in O(lambda) at the positions.

    ``coords="elliptic"`` uses x = e^{2 pi i q}, t = e^{2 pi i eta} and the
    nome of ``mod`` (default: params.tau); ``coords="trig"`` uses x = e^{q},
    t = e^{eta} and p = 0 unless ``mod`` is given.
    """
    if coords == "elliptic":
        x, t = pos.x_ell, np.exp(2j * np.pi * params.eta)
        p = as_modulus(mod if mod is not None else params.tau).p
    elif coords == "trig":
        x, t = pos.x_trig, params.t
        p = 0.0 if mod is None else as_modulus(mod).p
    else:
        raise DomainError(f"unknown coordinate convention {coords!r}")
    return o_hat_coefficient(n, x, t, p, params.omega, lam, conjugated)


def _pair_product(f, q, n, eta):
    N = q.size
    if N < 2:
        return 1.0 + 0j
    iu = np.triu_indices(N, 1)
    qij = (q[:, None] - q[None, :])[iu]
    nij = (n[:, None] - n[None, :])[iu]
    den = f(qij)
    if np.min(np.abs(den)) < 1e-12:
        raise NearSingular("pair product: coincident coordinates")
    return complex(np.prod(f(qij + eta * nij) / den))


def _pair_function(variant: XiVariant, mod):
    if variant is XiVariant.ELLIPTIC:
        return lambda a: jacobi_theta(a, mod)
    if variant is XiVariant.TRIG_SPECTRAL:
        return np.sinh
    if variant in (XiVariant.RATIONAL, XiVariant.RATIONAL_SPECTRAL):
        return lambda a: np.asarray(a, complex)
    raise DomainError(f"{variant.value} has no additive pair function")


def O_prime_coeff(n, pos: Positions, params: ModelParams, variant=XiVariant.ELLIPTIC, lam=None) -> complex:
    """omega-weight * prod_{i<j} f(q_ij + eta n_ij)/f(q_ij), f = theta, sinh or identity."""
    v = XiVariant(variant)
    n = np.asarray(n, int)
    f = _pair_function(v, params.tau)
    return shift_weight(params.omega, n) * _lam_factor(n, lam) * _pair_product(f, pos.q, n, params.eta)


def spectral_prefactor(v: XiVariant, z, N: int, k, eta, mod) -> complex:
    """The z-dependent factor multiplying the pair product at total degree k."""
    if v is XiVariant.ELLIPTIC:
        return complex(jacobi_theta(z - k * eta, mod) / guarded_theta(z, mod, "spectral prefactor"))
    if v is XiVariant.RATIONAL_SPECTRAL:
        if z == 0:
            raise NearSingular("z = 0")
        return complex((z - k * eta) / z)
    if v is XiVariant.TRIG_SPECTRAL:
        return complex(np.exp(-(N - 2) * eta * k) * np.sinh(z - k * eta) / np.sinh(z))
    raise DomainError(f"{v.value} has no spectral parameter")


def O_prime_spectral_coeff(n, z, pos: Positions, params: ModelParams, variant=XiVariant.ELLIPTIC,
                           lam=None) -> complex:
    """Spectral-prefactor * O_prime_coeff."""
    v = XiVariant(variant)
    n = np.asarray(n, int)
    pre = spectral_prefactor(v, z, pos.N, int(n.sum()), params.eta, params.tau)
    return pre * O_prime_coeff(n, pos, params, v, lam)


def direct_coeff(variant, n, z, pos: Positions, params: ModelParams, lam=None) -> complex:
    """Direct generating-function coefficient for any of the five families.

    The trigonometric family without spectral parameter uses the conjugated
    p = 0 coefficient prod (t^{n_i} x_i - t^{n_j} x_j)/(x_i - x_j), x = e^q.
    """
    v = XiVariant(variant)
    v.check_z(z)
    if v is XiVariant.TRIG:
        return O_hat_coeff(n, pos, params, coords="trig", lam=lam, conjugated=True)
    if v is XiVariant.RATIONAL:
        return O_prime_coeff(n, pos, params, v, lam)
    return O_prime_spectral_coeff(n, z, pos, params, v, lam)


# ---------------------------------------------------------------------------
# Pairing and determinant representations
# ---------------------------------------------------------------------------


def pairing_apply(k, m, t) -> complex:
    """<prod x^{k_i} | prod q^{m_j x_j d_j}> scalar factor prod_l t^{m_l k_l}."""
    k = np.asarray(k, int)
    m = np.asarray(m, int)
    return complex(complex(t) ** int(np.dot(k, m)))


def _perm_sign(p) -> int:
    p = list(p)
    s = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def trig_det_pairing_route(n, x, t) -> complex:
    """det_{ij} Xi_i(t^{n_j} x_j) / det Xi(x) for Xi_i(x) = x^{N-i},
    expanded over permutations with the pairing applied to each monomial."""
    n = np.asarray(n, int)
    x = np.asarray(x, complex)
    N = n.size
    expo = N - 1 - np.arange(N)
    total = 0j
    for perm in itertools.permutations(range(N)):
        k = expo[list(perm)]  # particle j carries x_j^{k_j}
        total += _perm_sign(perm) * pairing_apply(k, n, t) * np.prod(x ** k)
    iu = np.triu_indices(N, 1)
    return complex(total / np.prod((x[:, None] - x[None, :])[iu]))


def trig_det_conjugation_route(n, x, t) -> complex:
    """Delta(t^n x) / Delta(x): the same quantity as a conjugation of the
    Vandermonde determinant by the shift operator."""
    n = np.asarray(n, int)
    x = np.asarray(x, complex)
    y = complex(t) ** n * x
    iu = np.triu_indices(n.size, 1)
    return complex(np.prod((y[:, None] - y[None, :])[iu]) / np.prod((x[:, None] - x[None, :])[iu]))


def representation_coeff(variant, n, z, pos: Positions, params: ModelParams, centered: bool = True,
                         lam=None) -> complex:
    """omega-weight * det Xi(w + n eta) / det Xi(w): coefficient of T^n in the
    determinant representation. ``w`` is qbar (centred) or q."""
    v = XiVariant(variant)
    v.check_z(z)
    n = np.asarray(n, int)
    w = pos.qbar if (v.spectral and centered) else pos.q
    num = lu_det(xi_from_coords(v, w + n * params.eta, z, params.tau))
    den = lu_det(xi_from_coords(v, w, z, params.tau))
    if abs(den) == 0:
        raise NearSingular("det Xi vanishes")
    return shift_weight(params.omega, n) * _lam_factor(n, lam) * num / den


def normal_ordered_det_coeff(n, z, pos: Positions, params: ModelParams, variant=XiVariant.ELLIPTIC,
                             lam=None) -> complex:
    """omega-weight * det_{ij} L_ij(z, n_j eta): the coefficient of T^n in the
    normal-ordered determinant of the averaged Lax operator."""
    v = XiVariant(variant)
    n = np.asarray(n, int)
    zz = z if v.spectral else None
    L = rs_lax_coeff_matrix(v, zz, pos, n * params.eta, params.tau)
    return shift_weight(params.omega, n) * _lam_factor(n, lam) * lu_det(L)


def averaged_lax_tables(z, pos: Positions, params: ModelParams, variant=XiVariant.ELLIPTIC, M: int = 2):
    """Entry (i, j) of the averaged quantum Lax operator as a table whose
    shifts live in coordinate j only."""
    v = XiVariant(variant)
    zz = z if v.spectral else None
    N = pos.N
    tabs = [[{} for _ in range(N)] for _ in range(N)]
    for k in range(-M, M + 1):
        w = shift_weight(params.omega, [k])
        if w == 0:
            continue
        L = rs_lax_coeff_matrix(v, zz, pos, k * params.eta, params.tau)
        for j in range(N):
            sh = tuple(k if a == j else 0 for a in range(N))
            for i in range(N):
                tabs[i][j][sh] = w * L[i, j]
    return [[ShiftCoefficientTable(t, M) for t in row] for row in tabs]


def normal_ordered_det_table(z, pos: Positions, params: ModelParams, variant=XiVariant.ELLIPTIC,
                             M: int = 2) -> ShiftCoefficientTable:
    """:det: of the averaged Lax operator by permutation expansion with
    normal-ordered products of the entry tables."""
    tabs = averaged_lax_tables(z, pos, params, variant, M)
    N = pos.N
    terms, signs = [], []
    for perm in itertools.permutations(range(N)):
        terms.append(normal_ordered_product(*[tabs[perm[j]][j] for j in range(N)]))
        signs.append(_perm_sign(perm))
    return table_sum(*terms, signs=signs)


def coefficient_table(fn: Callable, N: int, M: int, meta=None) -> ShiftCoefficientTable:
    """Tabulate fn(n) over the shift box |n_j| <= M, dropping exact zeros."""
    entries = {}
    for n in shift_box(N, M):
        v = fn(n)
        if v != 0:
            entries[n] = v
    return ShiftCoefficientTable(entries, M, meta or {})


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def _rel(a, b) -> float:
    s = max(abs(a), abs(b))
    return 0.0 if s == 0 else abs(a - b) / s


def verify_trig_determinant(pos: Positions, params: ModelParams, M: int = 2, route: str = "lu") -> float:
    """Trigonometric coordinate limit: direct p = 0 coefficient versus the
    determinant representation (route "lu", "pairing" or "conjugation")."""
    x, t = pos.x_trig, params.t
    worst = 0.0
    for n in shift_box(pos.N, M):
        direct = direct_coeff(XiVariant.TRIG, n, None, pos, params)
        w = shift_weight(params.omega, n)
        if route == "lu":
            rep = representation_coeff(XiVariant.TRIG, n, None, pos, params)
        elif route == "pairing":
            rep = w * trig_det_pairing_route(n, x, t)
        elif route == "conjugation":
            rep = w * trig_det_conjugation_route(n, x, t)
        else:
            raise DomainError(f"unknown route {route!r}")
        worst = max(worst, _rel(direct, rep))
    return worst


def verify_rational_determinant(pos: Positions, params: ModelParams, M: int = 2) -> float:
    """Rational coordinate limit."""
    worst = 0.0
    for n in shift_box(pos.N, M):
        worst = max(worst, _rel(direct_coeff(XiVariant.RATIONAL, n, None, pos, params),
                                representation_coeff(XiVariant.RATIONAL, n, None, pos, params)))
    return worst


def verify_spectral_determinant(z, pos: Positions, params: ModelParams, variant=XiVariant.ELLIPTIC, M: int = 2,
                       shifted: bool = False) -> float:
    """Spectral-parameter form. With ``shifted`` the representation is built
    from uncentred q and evaluated at z + N q0."""
    v = XiVariant(variant)
    worst = 0.0
    for n in shift_box(pos.N, M):
        direct = direct_coeff(v, n, z, pos, params)
        if shifted:
            rep = representation_coeff(v, n, z + pos.N * pos.q0, pos, params, centered=False)
        else:
            rep = representation_coeff(v, n, z, pos, params)
        worst = max(worst, _rel(direct, rep))
    return worst


def verify_lax_determinant(z, pos: Positions, params: ModelParams, variant=XiVariant.ELLIPTIC, M: int = 2) -> float:
    """Direct coefficient versus det of the column-mixed Lax coefficient matrix."""
    v = XiVariant(variant)
    zz = z if v.spectral else None
    worst = 0.0
    for n in shift_box(pos.N, M):
        worst = max(worst, _rel(direct_coeff(v, n, zz, pos, params),
                                normal_ordered_det_coeff(n, zz, pos, params, v)))
    return worst


def per_shift_cauchy_check(n, z, pos: Positions, params: ModelParams) -> float:
    """Column-mixed elliptic determinant versus its Cauchy factorization

        det L(z, n_j eta) = det[Phi(z, q_i - qt_j)] / theta'(0)^N
                            * prod_k theta(-n_k eta) * prod_{k != j} theta(qt_j - q_k)/theta(q_j - q_k),

    qt_j = q_j + n_j eta, with the Cauchy determinant in closed form.
    Every n_j must be nonzero (theta(0) = 0 otherwise).
    """
    n = np.asarray(n, int)
    if np.any(n == 0):
        raise DomainError("the Cauchy factorization needs every shift nonzero")
    mod = as_modulus(params.tau)
    q = pos.q
    N = q.size
    eta = n * params.eta
    lhs = lu_det(rs_lax_coeff_matrix(XiVariant.ELLIPTIC, z, pos, eta, mod))
    qt = q + eta
    rhs = cauchy_determinant_closed(z, q, qt, mod) / complex(jacobi_theta_deriv(0.0, mod)) ** N
    rhs *= np.prod(jacobi_theta(-eta, mod))
    for j in range(N):
        d = np.delete(np.arange(N), j)
        if d.size:
            rhs *= np.prod(jacobi_theta(qt[j] - q[d], mod) / guarded_theta(q[j] - q[d], mod, "cauchy"))
    return _rel(lhs, complex(rhs))


def verify_per_shift_cauchy(z, pos: Positions, params: ModelParams, M: int = 2) -> float:
    """Max of :func:`per_shift_cauchy_check` over the all-nonzero shifts of the box."""
    worst = 0.0
    for n in shift_box(pos.N, M):
        if all(n):
            worst = max(worst, per_shift_cauchy_check(n, z, pos, params))
    return worst


def conjugation_gauge(q, eta, hbar) -> complex:
    """h(q) = prod_{i<j} exp(-pi i eta (q_i - q_j)/hbar)."""
    q = np.asarray(q, complex)
    N = q.size
    iu = np.triu_indices(N, 1)
    return complex(np.exp(-1j * np.pi * eta * np.sum((q[:, None] - q[None, :])[iu]) / hbar))


def conjugation_check(n, pos: Positions, params: ModelParams) -> float:
    """Residual of O'_n = h^{-1} O_n h per coefficient: h^{-1} c_n T^n h has
    coefficient c_n h(q + n hbar)/h(q)."""
    n = np.asarray(n, int)
    if params.hbar == 0:
        raise DomainError("hbar must be nonzero for the conjugation")
    c = O_hat_coeff(n, pos, params, coords="elliptic")
    h0 = conjugation_gauge(pos.q, params.eta, params.hbar)
    h1 = conjugation_gauge(pos.q + n * params.hbar, params.eta, params.hbar)
    return _rel(c * h1 / h0, O_prime_coeff(n, pos, params))


def verify_conjugation(pos: Positions, params: ModelParams, M: int = 2) -> float:
    return max(conjugation_check(n, pos, params) for n in shift_box(pos.N, M))


def dual_degeneration_check(pos: Positions, params: ModelParams, M: int = 2, z_large: float = 1e6) -> float:
    """Rational spectral coefficients at large z versus the rational ones."""
    worst = 0.0
    for n in shift_box(pos.N, M):
        worst = max(worst, _rel(direct_coeff(XiVariant.RATIONAL_SPECTRAL, n, z_large, pos, params),
                                direct_coeff(XiVariant.RATIONAL, n, None, pos, params)))
    return worst
