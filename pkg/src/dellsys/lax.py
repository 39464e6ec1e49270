"""Ruijsenaars-Schneider Lax matrices, their theta-averaged versions and gauges.

Quantum Lax matrices are handled through their *coefficients*: entry
(i, j) is a scalar times a shift in the j-th coordinate, and only the
scalar is computed here. The classical matrices multiply column j by
e^{p_j/c}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import inv_guarded, rel_residual, solve_guarded
from .elliptic import (
    DEFAULT_CONTROL,
    Modulus,
    SeriesControl,
    as_modulus,
    guarded_theta,
    jacobi_theta,
    jacobi_theta_deriv,
    kronecker_phi,
    theta_char,
)
from .errors import DomainError, NearSingular, TruncationError
from .intertwiner import Positions, XiVariant, g_matrix, normalizer, xi_from_coords, xi_matrix


@dataclass(frozen=True)
class ModelParams:
    """Couplings, moduli and truncation settings.

    ``shift_cap`` (M) bounds |n| in every theta-weighted average;
    ``momentum_bound`` is the largest admissible |Re p_j/c|.
    """

    eta: complex = 0.13
    hbar: complex = 0.07
    c: complex = 1.0
    tau: Modulus = Modulus(0.8j)
    omega: complex = 0.0
    lam: complex = 0.5
    shift_cap: int = 6
    series: SeriesControl = DEFAULT_CONTROL
    average_tolerance: float = 1e-12
    momentum_bound: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "tau", as_modulus(self.tau))
        for name in ("eta", "hbar", "c", "omega", "lam"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        if not abs(self.omega) < 1:
            raise DomainError("|omega| must be < 1")
        if self.c == 0:
            raise DomainError("c must be nonzero")
        if int(self.shift_cap) != self.shift_cap or self.shift_cap < 1:
            raise DomainError("shift_cap must be a positive integer")

    @property
    def t(self) -> complex:
        return complex(np.exp(self.eta))

    @property
    def q(self) -> complex:
        return complex(np.exp(self.hbar))

    @property
    def p(self) -> complex:
        return self.tau.p

    @property
    def tau_tilde(self) -> complex:
        """Modulus of the momentum curve, omega = e^{2 pi i tau_tilde} (principal log)."""
        if self.omega == 0:
            raise DomainError("tau_tilde is undefined for omega = 0")
        return complex(np.log(self.omega) / (2j * np.pi))

    def replace(self, **kw) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class PhaseState:
    """Positions together with canonical momenta."""

    pos: Positions
    mom: np.ndarray = field(default=None)

    def __post_init__(self):
        if not isinstance(self.pos, Positions):
            object.__setattr__(self, "pos", Positions(self.pos))
        mom = np.zeros(self.pos.N, complex) if self.mom is None else np.atleast_1d(np.asarray(self.mom, complex))
        if mom.shape != (self.pos.N,):
            raise ValueError("momenta and positions must have the same length")
        mom = mom.copy()
        mom.setflags(write=False)
        object.__setattr__(self, "mom", mom)

    @property
    def N(self) -> int:
        return self.pos.N

    @classmethod
    def from_arrays(cls, q, p) -> "PhaseState":
        return cls(Positions(q), p)


def omega_weight(omega: complex, n) -> np.ndarray:
    """omega^{(n^2-n)/2} with 0^0 = 1."""
    n = np.asarray(n)
    e = (n * n - n) // 2
    if omega == 0:
        return (e == 0).astype(complex)
    return np.asarray(omega, complex) ** e


# ---------------------------------------------------------------------------
# Coefficient matrices
# ---------------------------------------------------------------------------


def _nonzero(x, what):
    x = np.asarray(x)
    if x.size and np.min(np.abs(x)) < 1e-12:
        raise NearSingular(f"{what}: vanishing denominator")
    return x


def rs_lax_coeff_matrix(variant, z, pos: Positions, eta, mod=None) -> np.ndarray:
    """Matrix of shift coefficients L_ij; ``eta`` may be per column.

    Column j carries the coupling eta_j (the column-mixed matrix of the
    normal-ordered determinant uses eta_j = n_j * eta).
    """
    v = XiVariant(variant)
    v.check_z(z)
    q = pos.q
    N = q.size
    e = np.broadcast_to(np.asarray(eta, complex), (N,)).copy()
    qij = q[:, None] - q[None, :]
    off = ~np.eye(N, dtype=bool)
    L = np.empty((N, N), complex)

    if v is XiVariant.ELLIPTIC:
        mod = as_modulus(mod)
        tz = guarded_theta(z, mod, "rs_lax")
        prod = np.ones(N, complex)
        if N > 1:
            d = qij[off].reshape(N, N - 1)  # row j: q_j - q_k, k != j
            prod = np.prod(jacobi_theta(d + e[:, None], mod) / guarded_theta(d, mod, "rs_lax"), axis=1)
        E = np.broadcast_to(e, (N, N))
        np.fill_diagonal(L, jacobi_theta(z - e, mod) / tz)
        live = off & (E != 0)
        L[off & (E == 0)] = 0.0
        if live.any():
            L[live] = (jacobi_theta(-E[live], mod) * jacobi_theta(z + qij[live] - E[live], mod)
                       / (tz * guarded_theta(qij[live] - E[live], mod, "rs_lax")))
        return L * prod[None, :]

    if v is XiVariant.TRIG:
        x = np.exp(q)
        t = np.exp(e)
        for i in range(N):
            for j in range(N):
                if i == j:
                    k = np.arange(N) != i
                    L[i, i] = np.prod((t[i] * x[i] - x[k]) / _nonzero(x[i] - x[k], "rs_lax"))
                else:
                    k = (np.arange(N) != i) & (np.arange(N) != j)
                    L[i, j] = ((1 - t[j]) * x[j] / _nonzero(x[i] - x[j], "rs_lax")
                               * np.prod((t[j] * x[j] - x[k]) / (x[j] - x[k])))
        return L

    # product over k != j of f(q_jk + e_j)/f(q_jk)
    f = np.sinh if v is XiVariant.TRIG_SPECTRAL else (lambda a: a)
    prod = np.ones(N, complex)
    for j in range(N):
        d = np.delete(q[j] - q, j)
        if d.size:
            prod[j] = np.prod(f(d + e[j]) / _nonzero(f(d), "rs_lax"))
    if v is XiVariant.RATIONAL:
        with np.errstate(divide="ignore", invalid="ignore"):
            L[:] = -e[None, :] / (qij - e[None, :])
        _nonzero(qij[off] - np.broadcast_to(e, (N, N))[off], "rs_lax")
        np.fill_diagonal(L, 1.0)
    elif v is XiVariant.RATIONAL_SPECTRAL:
        _nonzero(z, "rs_lax")
        with np.errstate(divide="ignore", invalid="ignore"):
            L[:] = -e[None, :] * (1 / z + 1 / (qij - e[None, :]))
        _nonzero(qij[off] - np.broadcast_to(e, (N, N))[off], "rs_lax")
        np.fill_diagonal(L, (z - e) / z)
    else:  # TRIG_SPECTRAL
        pre = np.exp(-(N - 2) * e)
        sz = _nonzero(np.sinh(z), "rs_lax")
        with np.errstate(divide="ignore", invalid="ignore"):
            L[:] = -pre[None, :] * np.sinh(e)[None, :] * (np.cosh(qij - e) / np.sinh(qij - e) + np.cosh(z) / sz)
        _nonzero(np.sinh(qij[off] - np.broadcast_to(e, (N, N))[off]), "rs_lax")
        np.fill_diagonal(L, pre * np.sinh(z - e) / sz)
    return L * prod[None, :]


def rs_lax_coeff(variant, z, pos: Positions, eta, i: int, j: int, mod=None) -> complex:
    """Scalar coefficient of the shift in the j-th coordinate in entry (i, j)."""
    return complex(rs_lax_coeff_matrix(variant, z, pos, eta, mod)[i, j])


def rs_lax_kronecker_form(z, pos: Positions, eta, mod) -> np.ndarray:
    """Elliptic coefficients written through the Kronecker function."""
    mod = as_modulus(mod)
    q = pos.q
    N = q.size
    pre = jacobi_theta(-eta, mod) / jacobi_theta_deriv(0.0, mod)
    L = np.empty((N, N), complex)
    for j in range(N):
        d = np.delete(q[j] - q, j)
        prod = np.prod(jacobi_theta(d + eta, mod) / jacobi_theta(d, mod)) if d.size else 1.0
        L[:, j] = pre * kronecker_phi(np.full(N, z), q - q[j] - eta, mod) * prod
    return L


def factorized_rs_lax(variant, z, pos: Positions, eta, mod=None) -> np.ndarray:
    """D Xi^{-1} Xi(shifted) D^{-1}: the coefficient matrix via its
    intertwining-matrix factorization (scalar eta)."""
    v = XiVariant(variant)
    v.check_z(z)
    N = pos.N
    if v.spectral:
        base = xi_from_coords(v, pos.qbar, z, mod)
        shifted = xi_from_coords(v, pos.qbar, z - N * eta, mod)
    else:
        base = xi_from_coords(v, pos.q, None, mod)
        shifted = xi_from_coords(v, pos.q + eta, None, mod)
    d = normalizer(v, pos, mod)
    core = solve_guarded(base, shifted, what="factorized_rs_lax")
    return d[:, None] * core / d[None, :]


# ---------------------------------------------------------------------------
# Classical matrices
# ---------------------------------------------------------------------------


def _check_momenta(state: PhaseState, params: ModelParams) -> float:
    r = float(np.max(np.abs((state.mom / params.c).real)))
    if r > params.momentum_bound:
        raise DomainError(f"max |Re p/c| = {r:g} exceeds momentum_bound {params.momentum_bound:g}")
    return r


def classical_rs_lax(z, state: PhaseState, params: ModelParams, n: int = 1,
                     variant=XiVariant.ELLIPTIC) -> np.ndarray:
    """Classical RS Lax matrix with coupling n*eta and momenta n*p/c."""
    if n == 0:
        return np.eye(state.N, dtype=complex)
    v = XiVariant(variant)
    zz = z if v.spectral else None
    L = rs_lax_coeff_matrix(v, zz, state.pos, n * params.eta, params.tau)
    return L * np.exp(n * state.mom / params.c)[None, :]


def hasegawa_factorization_check(z, state: PhaseState, params: ModelParams) -> float:
    """Residual between L^RS(z) and g(z)^{-1} g(z - N eta) e^{P/c}."""
    N = state.N
    lhs = classical_rs_lax(z, state, params)
    g0 = g_matrix(z, state.pos, params.tau)
    g1 = g_matrix(z - N * params.eta, state.pos, params.tau)
    rhs = solve_guarded(g0, g1, what="g(z)") * np.exp(state.mom / params.c)[None, :]
    return rel_residual(lhs, rhs)


def quasi_periodicity_check(z, state: PhaseState, params: ModelParams) -> tuple[float, float]:
    """Residuals of L(z+1) = L(z) and L(z+tau) = e^{2 pi i eta} D L(z) D^{-1},
    D = diag(e^{-2 pi i q_j})."""
    L = classical_rs_lax(z, state, params)
    r1 = rel_residual(classical_rs_lax(z + 1, state, params), L)
    d = np.exp(-2j * np.pi * state.pos.q)
    rhs = np.exp(2j * np.pi * params.eta) * d[:, None] * L / d[None, :]
    rt = rel_residual(classical_rs_lax(z + params.tau.tau, state, params), rhs)
    return r1, rt


def omega_zero_collapse_check(z, lam, state: PhaseState, params: ModelParams) -> float:
    """At omega = 0 the average is exactly 1 - lam L^RS(z)."""
    p0 = params.replace(omega=0.0)
    lhs = averaged_calL(z, lam, state, p0)
    rhs = np.eye(state.N) - complex(lam) * classical_rs_lax(z, state, p0)
    return rel_residual(lhs, rhs)


def _average_indices(params: ModelParams, lam_scale: float, pmax: float) -> np.ndarray:
    """Indices |n| <= M with nonzero weight, after checking the dropped tail."""
    M = int(params.shift_cap)
    w = abs(params.omega)
    if w == 0:
        return np.array([0, 1])
    tail = 0.0
    for n in (M + 1, -(M + 1)):
        e = (n * n - n) / 2
        tail = max(tail, math.exp(e * math.log(w) + abs(n) * (math.log(lam_scale) + pmax)))
    if tail > params.average_tolerance:
        raise TruncationError(f"dropped weight {tail:.3g} at M={M} exceeds {params.average_tolerance:g}")
    return np.arange(-M, M + 1)


def rs_lax_stack(z, state: PhaseState, params: ModelParams, lam_scale: float = 1.0,
                 variant=XiVariant.ELLIPTIC):
    """(indices n, weights omega^{(n^2-n)/2}, matrices L^RS(z, n eta, n p/c)).

    The matrices do not depend on lambda, so one stack serves every lambda
    with max(|lambda|, 1/|lambda|) <= lam_scale.
    """
    pmax = _check_momenta(state, params)
    ns = _average_indices(params, max(lam_scale, 1.0), pmax)
    if XiVariant(variant) is XiVariant.ELLIPTIC:
        mats = _elliptic_stack(z, state, params, ns)
    else:
        mats = np.array([classical_rs_lax(z, state, params, int(n), variant) for n in ns])
    return ns, omega_weight(params.omega, ns), mats


def _elliptic_stack(z, state: PhaseState, params: ModelParams, ns) -> np.ndarray:
    """classical_rs_lax for every n at once (one theta evaluation per argument type)."""
    mod = params.tau
    q = state.pos.q
    N = q.size
    S = len(ns)
    e = np.asarray(ns, float)[:, None, None] * params.eta  # (S,1,1)
    qij = (q[:, None] - q[None, :])[None, :, :]
    off = ~np.eye(N, dtype=bool)
    tz = guarded_theta(z, mod, "rs_lax")
    out = np.empty((S, N, N), complex)
    if N > 1:
        d = (q[:, None] - q[None, :])[off].reshape(N, N - 1)  # row j: q_j - q_k
        den = guarded_theta(d, mod, "rs_lax")
        prod = np.prod(jacobi_theta(d[None] + e, mod) / den[None], axis=2)  # (S, N)
        ee = np.broadcast_to(e, (S, N, N))[:, off]
        qq = np.broadcast_to(qij, (S, N, N))[:, off]
        live = ee != 0
        vals = np.zeros_like(ee)
        if live.any():
            vals[live] = (jacobi_theta(-ee[live], mod) * jacobi_theta(z + qq[live] - ee[live], mod)
                          / (tz * guarded_theta(qq[live] - ee[live], mod, "rs_lax")))
        out[:, off] = vals
    else:
        prod = np.ones((S, 1), complex)
    idx = np.arange(N)
    out[:, idx, idx] = (jacobi_theta(z - e[:, 0, 0], mod) / tz)[:, None]
    out *= prod[:, None, :]
    out *= np.exp(np.asarray(ns, float)[:, None] * (state.mom / params.c)[None, :])[:, None, :]
    out[np.asarray(ns) == 0] = np.eye(N)
    return out


def average_from_stack(stack, lam) -> np.ndarray:
    ns, w, mats = stack
    if complex(lam) == 0:  # only the n = 0 term survives
        return mats[list(ns).index(0)].copy()
    coef = w * (-complex(lam)) ** ns.astype(float)
    return np.tensordot(coef, mats, axes=1)


def averaged_calL(z, lam, state: PhaseState, params: ModelParams, variant=XiVariant.ELLIPTIC) -> np.ndarray:
    """sum_n (-lam)^n omega^{(n^2-n)/2} L^RS(z, n eta, n p/c), truncated at |n| <= M."""
    lam = complex(lam)
    scale = max(abs(lam), 1 / abs(lam)) if lam != 0 else 1.0
    return average_from_stack(rs_lax_stack(z, state, params, scale, variant), lam)


# ---------------------------------------------------------------------------
# Gauge transformations and theta operators
# ---------------------------------------------------------------------------


def _zP(z, state: PhaseState, params: ModelParams) -> np.ndarray:
    if params.eta == 0:
        raise DomainError("the factorised forms require eta != 0")
    return np.exp(z * state.mom / (state.N * params.c * params.eta))


def G_matrix(z, state: PhaseState, params: ModelParams) -> np.ndarray:
    """G(z) = Xi(z) D^{-1} e^{z P/(N c eta)}."""
    return g_matrix(z, state.pos, params.tau) * _zP(z, state, params)[None, :]


def _theta_sum(z, state, params, terms):
    """sum over (coef, s) of coef * g(z - s N eta) e^{s P/c} e^{z P/(N c eta)}."""
    N = state.N
    out = np.zeros((N, N), complex)
    for coef, s in terms:
        if coef == 0:
            continue
        g = g_matrix(z - s * N * params.eta, state.pos, params.tau)
        out += coef * g * np.exp(s * state.mom / params.c)[None, :]
    return out * _zP(z, state, params)[None, :]


def theta_operator_Theta(z, lam, state: PhaseState, params: ModelParams) -> np.ndarray:
    """sum_k (-lam)^k omega^{(k^2-k)/2} g(z - k N eta) e^{k P/c} e^{z P/(N c eta)}."""
    lam = complex(lam)
    if lam == 0:
        return G_matrix(z, state, params)
    scale = max(abs(lam), 1 / abs(lam))
    ks = _average_indices(params, scale, _check_momenta(state, params))
    w = omega_weight(params.omega, ks)
    return _theta_sum(z, state, params, [(w[i] * (-lam) ** int(k), int(k)) for i, k in enumerate(ks)])


def kronecker_theta_operator(z, u, state: PhaseState, params: ModelParams) -> np.ndarray:
    """Odd-theta form: sum_k -i (-1)^k e^{pi i tt (k+1/2)^2} e^{pi i (2k+1) u}
    g(z - (k+1/2) N eta) e^{(k+1/2) P/c} e^{z P/(N c eta)}, tt = tau_tilde."""
    tt = params.tau_tilde
    M = int(params.shift_cap)
    _check_momenta(state, params)
    terms = []
    for k in range(-M - 1, M + 1):
        s = k + 0.5
        coef = -1j * (-1) ** k * np.exp(1j * np.pi * tt * s * s) * np.exp(1j * np.pi * 2 * s * u)
        terms.append((coef, s))
    return _theta_sum(z, state, params, terms)


def _kronecker_prefactor(u, params: ModelParams) -> complex:
    mt = Modulus(params.tau_tilde, guard=1e-6)
    return jacobi_theta_deriv(0.0, mt) / guarded_theta(u, mt, "kronecker normalisation")


def kronecker_manakov(z, u, state: PhaseState, params: ModelParams) -> np.ndarray:
    """theta'(0|tt)/theta(u|tt) * A(z,0)^{-1} A(z,u) with A the odd-theta form."""
    a0 = kronecker_theta_operator(z, 0.0, state, params)
    au = kronecker_theta_operator(z, u, state, params)
    return _kronecker_prefactor(u, params) * solve_guarded(a0, au, what="theta operator")


def kronecker_manakov_via_theta(z, u, state: PhaseState, params: ModelParams) -> np.ndarray:
    """The same matrix from Theta: prefactor * e^{-pi i u} e^{P/c}
    Theta(z',1)^{-1} Theta(z',e^{2 pi i u}) e^{-P/c}, z' = z + N eta/2."""
    zp = z + state.N * params.eta / 2
    lam = np.exp(2j * np.pi * u)
    core = solve_guarded(theta_operator_Theta(zp, 1.0, state, params),
                         theta_operator_Theta(zp, lam, state, params), what="Theta(z,1)")
    ep = np.exp(state.mom / params.c)
    return _kronecker_prefactor(u, params) * np.exp(-1j * np.pi * u) * ep[:, None] * core / ep[None, :]


def sklyanin_lax_classical(z, state: PhaseState, params: ModelParams) -> np.ndarray:
    """Xi(z - N eta) e^{P/c} Xi(z)^{-1}."""
    N = state.N
    xi0 = xi_matrix(XiVariant.ELLIPTIC, z, state.pos, params.tau)
    xi1 = xi_matrix(XiVariant.ELLIPTIC, z - N * params.eta, state.pos, params.tau)
    return (xi1 * np.exp(state.mom / params.c)[None, :]) @ inv_guarded(xi0, what="Xi(z)")


def sklyanin_gauge_check(z, state: PhaseState, params: ModelParams) -> tuple[float, float]:
    """(entrywise residual of g L^RS g^{-1} against L^Skl, trace residual)."""
    g = g_matrix(z, state.pos, params.tau)
    lrs = classical_rs_lax(z, state, params)
    lhs = g @ lrs @ inv_guarded(g, what="g(z)")
    skl = sklyanin_lax_classical(z, state, params)
    tr = abs(np.trace(skl) - np.trace(lrs)) / max(abs(np.trace(lrs)), float(np.max(np.abs(lrs))))
    return rel_residual(lhs, skl), float(tr)


# ---------------------------------------------------------------------------
# Baxter-Belavin weights
# ---------------------------------------------------------------------------


def _theta_j(j: int, u, N: int, mod: Modulus):
    return theta_char(0.5 - (j % N) / N, 0.5, u, mod.scaled(N))


def baxter_belavin_weight(a: int, b: int, c: int, d: int, eta, z, N: int, mod) -> complex:
    """R^B_{ab,cd}(eta, z) with theta^{(j)}(u) = theta[1/2 - j/N; 1/2](u | N tau).

    Normalised so that the k = 0 factor theta^{(0)}(eta)/theta^{(0)}(0) is
    replaced by theta^{(0)}(eta)/theta^{(a-b)}(eta) -> 1 for a = b; hence
    R^B(0, z) is the identity.
    """
    mod = as_modulus(mod)
    if (a + c - b - d) % N:
        return 0j
    scale = abs(theta_char(0.5, 0.5, 0.0, mod.scaled(N)) - 0) + abs(jacobi_theta_deriv(0.0, mod.scaled(N)))
    den = _theta_j(b - c, z, N, mod)
    if abs(den) < 1e-10 * scale:
        raise NearSingular("baxter_belavin_weight: z at a zero")
    val = _theta_j(a - c, z + eta, N, mod) / den
    if (a - b) % N:
        tab = _theta_j(a - b, eta, N, mod)
        if abs(tab) < 1e-10 * scale:
            raise NearSingular("baxter_belavin_weight: eta at a zero")
        val *= _theta_j(0, eta, N, mod) / tab
    for k in range(1, N):
        val *= _theta_j(k, eta, N, mod) / _theta_j(k, 0.0, N, mod)
    return complex(val)


def baxter_belavin_table(eta, z, N: int, mod) -> np.ndarray:
    R = np.zeros((N, N, N, N), complex)
    for a in range(N):
        for b in range(N):
            for c in range(N):
                d = (a + c - b) % N
                R[a, b, c, d] = baxter_belavin_weight(a, b, c, d, eta, z, N, mod)
    return R


def averaged_R(z, lam, eta, N: int, params: ModelParams) -> np.ndarray:
    """sum_m (-lam)^m omega^{(m^2-m)/2} R^B(m eta, z), truncated at |m| <= M."""
    lam = complex(lam)
    M = int(params.shift_cap)
    ms = np.array([0, 1]) if params.omega == 0 else np.arange(-M, M + 1)
    w = omega_weight(params.omega, ms)
    out = np.zeros((N,) * 4, complex)
    for m, wm in zip(ms, w):
        if wm != 0:
            out += wm * (-lam) ** int(m) * baxter_belavin_table(int(m) * eta, z, N, params.tau)
    return out
