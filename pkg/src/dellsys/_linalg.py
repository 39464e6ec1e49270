"""Dense complex linear algebra with conditioning guards (LAPACK via scipy)."""
import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve

from .errors import IllConditioned

COND_LIMIT = 1e12


def lu_det(A) -> complex:
    """Determinant from an LU factorization with partial pivoting."""
    A = np.asarray(A, dtype=complex)
    if A.shape == (0, 0):
        return 1.0 + 0j
    with warnings.catch_warnings():
        # an exactly singular matrix simply has determinant zero
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    sign = (-1) ** int(np.count_nonzero(piv != np.arange(piv.size)))
    return complex(sign * np.prod(np.diag(lu)))


def condition_estimate(A) -> float:
    """1-norm condition number estimate (LAPACK gecon)."""
    A = np.asarray(A, dtype=complex)
    lu, _ = lu_factor(A, check_finite=False)
    anorm = np.max(np.sum(np.abs(A), axis=0))
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0:
        return np.inf
    return float(1.0 / rcond)


def solve_guarded(A, B, limit: float = COND_LIMIT, what: str = "matrix"):
    """Solve A X = B, raising IllConditioned above the condition limit."""
    A = np.asarray(A, dtype=complex)
    lu, piv = lu_factor(A, check_finite=False)
    anorm = np.max(np.sum(np.abs(A), axis=0))
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > 1.0 / limit:
        cond = np.inf if rcond == 0 else 1.0 / rcond
        raise IllConditioned(f"{what}: condition estimate {cond:.3g} exceeds {limit:.3g}")
    return lu_solve((lu, piv), np.asarray(B, dtype=complex), check_finite=False)


def inv_guarded(A, limit: float = COND_LIMIT, what: str = "matrix"):
    A = np.asarray(A, dtype=complex)
    return solve_guarded(A, np.eye(A.shape[0], dtype=complex), limit, what)


def rel_residual(a, b) -> float:
    """max|a - b| / max(max|a|, max|b|); zero when both vanish."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return 0.0 if scale == 0.0 else float(np.max(np.abs(a - b)) / scale)
