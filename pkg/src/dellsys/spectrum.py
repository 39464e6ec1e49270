"""Spectrum of the p = 0 (trigonometric-coordinate) generating operator on
symmetric polynomials.

The operator

    O(u) = sum_n omega^{w(n)} (-u)^{sum n} prod_{i<j} (t^{n_i} x_i - t^{n_j} x_j)/(x_i - x_j) T_q^n,

w(n) = sum_i (n_i^2 - n_i)/2, is truncated at total omega-order K by
keeping the shifts with w(n) <= K. Its matrix in the monomial basis is
obtained by evaluating the action at random points and fitting.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import IllConditioned, NearSingular, SeriesInversionError

FIT_COND_LIMIT = 1e10


# ---------------------------------------------------------------------------
# Partitions and symmetric functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=False)
class Partition:
    parts: tuple

    def __post_init__(self):
        parts = tuple(int(a) for a in self.parts)
        if any(a < 0 for a in parts):
            raise ValueError("partition parts must be nonnegative")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise ValueError(f"partition parts must be weakly decreasing: {parts}")
        object.__setattr__(self, "parts", tuple(a for a in parts if a > 0))

    @property
    def weight(self) -> int:
        return sum(self.parts)

    def __len__(self):
        return len(self.parts)

    def padded(self, N: int) -> tuple:
        if len(self.parts) > N:
            raise ValueError(f"partition {self.parts} has more than {N} parts")
        return self.parts + (0,) * (N - len(self.parts))

    def dominates(self, other: "Partition") -> bool:
        """self >= other in dominance order (equal weights required)."""
        if self.weight != other.weight:
            return False
        n = max(len(self), len(other))
        a = np.cumsum(self.padded(n))
        b = np.cumsum(other.padded(n))
        return bool(np.all(a >= b))

    def __repr__(self):
        return f"Partition{self.parts}"


def as_partition(lam) -> Partition:
    return lam if isinstance(lam, Partition) else Partition(tuple(lam))


def partitions(d: int, N: int) -> list[Partition]:
    """Partitions of d with at most N parts, ascending in lexicographic order
    (a linear extension of dominance)."""
    out = []

    def rec(rem, maxp, cur):
        if len(cur) == N or rem == 0:
            if rem == 0:
                out.append(Partition(tuple(cur)))
            return
        for a in range(min(rem, maxp), 0, -1):
            rec(rem - a, a, cur + [a])

    rec(d, d, [])
    return sorted(out, key=lambda p: p.padded(N))


@lru_cache(maxsize=None)
def _orbit(parts: tuple) -> np.ndarray:
    return np.array(sorted(set(itertools.permutations(parts))), dtype=int)


def monomial_sym(lam, x) -> complex:
    """m_lambda(x): sum over the distinct permutations of lambda."""
    x = np.asarray(x, complex)
    return complex(_monomial_values(as_partition(lam), x[None, :])[0])


def _monomial_values(lam: Partition, X: np.ndarray) -> np.ndarray:
    """m_lambda at each row of X."""
    E = _orbit(lam.padded(X.shape[1]))
    return np.prod(X[:, None, :] ** E[None, :, :], axis=2).sum(axis=1)


def schur(lam, x) -> complex:
    """Bialternant det(x_i^{lambda_j + N - j}) / Delta(x)."""
    x = np.asarray(x, complex)
    N = x.size
    lam = as_partition(lam).padded(N)
    iu = np.triu_indices(N, 1)
    vdm = np.prod((x[:, None] - x[None, :])[iu]) if N > 1 else 1.0
    if abs(vdm) < 1e-14:
        raise NearSingular("schur: coincident variables")
    expo = np.array(lam) + N - 1 - np.arange(N)
    return complex(np.linalg.det(x[:, None] ** expo[None, :]) / vdm)


@dataclass(frozen=True)
class SymmetricPolynomial:
    """sum_lambda c_lambda m_lambda in N variables."""

    coeffs: Mapping[Partition, complex]
    N: int
    degree: int = field(default=None)

    def __post_init__(self):
        coeffs = {as_partition(k): complex(v) for k, v in self.coeffs.items()}
        degs = {k.weight for k in coeffs}
        if len(degs) > 1:
            raise ValueError("symmetric polynomial must be homogeneous")
        object.__setattr__(self, "coeffs", coeffs)
        if self.degree is None:
            object.__setattr__(self, "degree", degs.pop() if degs else 0)

    def __call__(self, x) -> complex:
        x = np.asarray(x, complex)
        return complex(sum(c * monomial_sym(k, x) for k, c in self.coeffs.items()))


def _sample_points(rng, P: int, N: int) -> np.ndarray:
    mod = np.exp(0.3 * rng.standard_normal((P, N)))
    return mod * np.exp(2j * np.pi * rng.uniform(size=(P, N)))


def _fit(basis: list[Partition], N: int, values_fn, rng, retries: int = 8):
    """Solve for coefficients in the m-basis given a function returning the
    values of the target(s) at sample points (P x ...)."""
    D = len(basis)
    P = 3 * D + 4
    for _ in range(retries):
        X = _sample_points(rng, P, N)
        E = np.stack([_monomial_values(mu, X) for mu in basis], axis=1)
        s = np.linalg.svd(E, compute_uv=False)
        if s[-1] == 0 or s[0] / s[-1] > FIT_COND_LIMIT:
            continue
        V = values_fn(X)
        sol = np.linalg.lstsq(E, V.reshape(P, -1), rcond=None)[0]
        return sol.reshape((D,) + V.shape[1:])
    raise IllConditioned("monomial evaluation system stayed ill-conditioned after resampling")


def schur_in_m_basis(lam, N: int, seed: int = 0) -> SymmetricPolynomial:
    """Coefficients u_{lambda mu} of s_lambda = sum_mu u_{lambda mu} m_mu."""
    lam = as_partition(lam)
    basis = partitions(lam.weight, N)
    rng = np.random.default_rng(seed)
    sol = _fit(basis, N, lambda X: np.array([schur(lam, x) for x in X]), rng)
    return SymmetricPolynomial({mu: c for mu, c in zip(basis, sol)}, N, lam.weight)


# ---------------------------------------------------------------------------
# Truncated omega-series
# ---------------------------------------------------------------------------


def series_mul(a, b, order: int):
    """Product of truncated series a[0..], b[0..] (scalars or matrices)."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.zeros((order + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:])
                   if a.ndim < 3 else (order + 1,) + (a.shape[1], b.shape[2]), complex)
    for i in range(min(order, a.shape[0] - 1) + 1):
        for j in range(min(order - i, b.shape[0] - 1) + 1):
            out[i + j] += a[i] @ b[j] if a.ndim == 3 else a[i] * b[j]
    return out


def series_inv(a, order: int):
    """Inverse of a truncated series; the leading term must be invertible."""
    a = np.asarray(a, complex)
    if a.ndim == 1:
        if abs(a[0]) < 1e-14:
            raise SeriesInversionError("leading coefficient vanishes")
        inv0 = 1 / a[0]
        out = np.zeros(order + 1, complex)
        out[0] = inv0
        for m in range(1, order + 1):
            s = sum(a[j] * out[m - j] for j in range(1, min(m, a.size - 1) + 1))
            out[m] = -inv0 * s
        return out
    s = np.linalg.svd(a[0], compute_uv=False)
    if s[-1] < 1e-12 * max(s[0], 1e-300):
        raise SeriesInversionError("leading matrix coefficient is singular")
    inv0 = np.linalg.inv(a[0])
    out = np.zeros((order + 1,) + a.shape[1:], complex)
    out[0] = inv0
    for m in range(1, order + 1):
        s = sum(a[j] @ out[m - j] for j in range(1, min(m, a.shape[0] - 1) + 1))
        out[m] = -inv0 @ s
    return out


# ---------------------------------------------------------------------------
# The operator and its matrices
# ---------------------------------------------------------------------------


def _w(n) -> int:
    n = np.asarray(n)
    return int(np.sum((n * n - n) // 2))


def shift_set(N: int, omega_order: int) -> list[tuple]:
    """All n with w(n) <= omega_order."""
    K = omega_order
    r = range(-K, K + 2)
    return [n for n in itertools.product(r, repeat=N) if _w(n) <= K]


def trig_coefficient(n, X: np.ndarray, t) -> np.ndarray:
    """prod_{i<j} (t^{n_i} x_i - t^{n_j} x_j)/(x_i - x_j) at each row of X."""
    n = np.asarray(n)
    N = X.shape[1]
    tn = complex(t) ** n
    out = np.ones(X.shape[0], complex)
    for i in range(N):
        for j in range(i + 1, N):
            out *= (tn[i] * X[:, i] - tn[j] * X[:, j]) / (X[:, i] - X[:, j])
    return out


@dataclass(frozen=True)
class OperatorMatrices:
    """Matrices A[k][m] with O(u) = sum_{k,m} u^k omega^m A[k][m] in the basis."""

    basis: list
    N: int
    omega_order: int
    blocks: Mapping[tuple, np.ndarray]

    def omega_series(self, k: int) -> np.ndarray:
        """O_k (coefficient of u^k) as an omega-series array (K+1, D, D)."""
        D = len(self.basis)
        out = np.zeros((self.omega_order + 1, D, D), complex)
        for (kk, m), A in self.blocks.items():
            if kk == k:
                out[m] = A
        return out

    def at(self, u, omega) -> np.ndarray:
        D = len(self.basis)
        out = np.zeros((D, D), complex)
        for (k, m), A in self.blocks.items():
            out += complex(u) ** k * (complex(omega) ** m if m else 1.0) * A
        return out


def operator_coefficient_matrices(N: int, d: int, q, t, omega_order: int, seed: int = 0) -> OperatorMatrices:
    """Fit every (u-degree, omega-order) block of the truncated operator."""
    basis = partitions(d, N)
    shifts = shift_set(N, omega_order)
    keys = sorted({(int(sum(n)), _w(n)) for n in shifts})
    index = {k: i for i, k in enumerate(keys)}
    q = complex(q)

    def values(X):
        V = np.zeros((X.shape[0], len(basis), len(keys)), complex)
        for n in shifts:
            k, m = int(sum(n)), _w(n)
            Xs = X * q ** np.asarray(n)[None, :]
            c = (-1) ** (k % 2) * trig_coefficient(n, X, t)
            for b, lam in enumerate(basis):
                V[:, b, index[(k, m)]] += c * _monomial_values(lam, Xs)
        return V

    rng = np.random.default_rng(seed)
    sol = _fit(basis, N, values, rng)  # (D_mu, D_lambda, keys)
    blocks = {key: sol[:, :, i] for key, i in index.items()}
    return OperatorMatrices(basis, N, omega_order, blocks)


def operator_matrix_in_m_basis(u, q, t, omega, N: int, d: int, omega_order: int, seed: int = 0):
    """(basis, A) with O(u) m_lambda = sum_mu A[mu, lambda] m_mu."""
    mats = operator_coefficient_matrices(N, d, q, t, omega_order, seed)
    return mats.basis, mats.at(u, omega)


def triangularity_defect(basis: list[Partition], A: np.ndarray) -> float:
    """Largest |A[mu, lambda]| over dominance-comparable mu > lambda, relative to max|A|."""
    scale = float(np.max(np.abs(A))) or 1.0
    worst = 0.0
    for a, lam in enumerate(basis):
        for b, mu in enumerate(basis):
            if mu != lam and mu.dominates(lam):
                worst = max(worst, abs(A[b, a]) / scale)
    return worst


def incomparable_entries(basis: list[Partition], A: np.ndarray) -> float:
    """Largest sub-diagonal entry between dominance-incomparable partitions (reported only)."""
    worst = 0.0
    for a, lam in enumerate(basis):
        for b, mu in enumerate(basis):
            if b > a and not (mu.dominates(lam) or lam.dominates(mu)):
                worst = max(worst, abs(A[b, a]))
    return worst


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------


def _factor_series(y, K: int) -> dict:
    """theta_omega(u y) truncated at omega-order K as {(u-degree, omega-order): coef}."""
    out = {}
    for n in range(-K, K + 2):
        m = (n * n - n) // 2
        if m <= K:
            out[(n, m)] = out.get((n, m), 0) + (-complex(y)) ** n
    return out


def eigenvalue_bivariate(lam, q, t, N: int, omega_order: int) -> dict:
    """Eigenvalue prod_i theta_omega(u t^{N-i} q^{lambda_i}) as {(k, m): coef}
    of u^k omega^m, truncated at total omega-order K."""
    lam = as_partition(lam).padded(N)
    K = omega_order
    acc = {(0, 0): 1.0 + 0j}
    for i in range(N):
        y = complex(t) ** (N - 1 - i) * complex(q) ** lam[i]
        f = _factor_series(y, K)
        nxt = {}
        for (k1, m1), a in acc.items():
            for (k2, m2), b in f.items():
                if m1 + m2 <= K:
                    key = (k1 + k2, m1 + m2)
                    nxt[key] = nxt.get(key, 0) + a * b
        acc = nxt
    return acc


def eigenvalue_formula(u, lam, q, t, omega, N: int, omega_order: int) -> complex:
    """prod_i theta_omega(u t^{N-i} q^{lambda_i}), truncated consistently with the operator."""
    u, omega = complex(u), complex(omega)
    return complex(sum(c * u ** k * (omega ** m if m else 1.0)
                       for (k, m), c in eigenvalue_bivariate(lam, q, t, N, omega_order).items()))


def eigenvalue_series(lam, q, t, N: int, omega_order: int) -> dict[int, np.ndarray]:
    """E_k: u^k coefficient of the eigenvalue as an omega-series."""
    out: dict[int, np.ndarray] = {}
    for (k, m), c in eigenvalue_bivariate(lam, q, t, N, omega_order).items():
        out.setdefault(k, np.zeros(omega_order + 1, complex))[m] += c
    return out


def eigenvalue_H1(lam, q, t, N: int, omega_order: int) -> np.ndarray:
    """E_1/E_0 as a truncated omega-series."""
    E = eigenvalue_series(lam, q, t, N, omega_order)
    zero = np.zeros(omega_order + 1, complex)
    return series_mul(series_inv(E.get(0, zero), omega_order), E.get(1, zero), omega_order)


def gl2_first_hamiltonian_closed(q, t) -> np.ndarray:
    """Closed form for N = 2, lambda = (1, 0) through first order in omega."""
    q, t = complex(q), complex(t)
    return np.array([-1 - t * q, (1 + q * t) * (1 + q * q * t * t) / (q * t)])


def hamiltonian_series(mats: OperatorMatrices, k: int) -> np.ndarray:
    """H_k = O_0^{-1} O_k as an omega-series of matrices."""
    K = mats.omega_order
    return series_mul(series_inv(mats.omega_series(0), K), mats.omega_series(k), K)


def commutativity_check(q, t, N: int, d: int, omega_order: int, k1: int = 1, k2: int = 2,
                        seed: int = 0) -> float:
    """||[H_{k1}, H_{k2}]|| / (||H_{k1}|| ||H_{k2}||), norms maximised over omega-orders."""
    mats = operator_coefficient_matrices(N, d, q, t, omega_order, seed)
    K = omega_order
    A = hamiltonian_series(mats, k1)
    B = hamiltonian_series(mats, k2)
    C = series_mul(A, B, K) - series_mul(B, A, K)
    norm = lambda S: max(float(np.linalg.norm(S[m])) for m in range(K + 1))
    na, nb = norm(A), norm(B)
    if na == 0 or nb == 0:
        return 0.0
    return norm(C) / (na * nb)
