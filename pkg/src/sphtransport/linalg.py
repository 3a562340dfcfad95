"""Dense factorization layer: Cholesky for SPD systems, pivoted LU for the
augmented saddle-point systems.

Backed by LAPACK through scipy; factorizations are immutable and meant to be
computed once and reused for many solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import NotPositiveDefiniteError, SingularMatrixError, ConfigurationError

_SINGULAR_PIVOT_REL = 1e-14


@dataclass(frozen=True)
class Factorization:
    kind: str  # "cholesky" or "lu"
    factors: tuple
    n: int

    def solve(self, b):
        return solve(self, b)


def _symmetry_defect(a: np.ndarray) -> float:
    # chunked so large matrices never allocate a full-size temporary
    defect = 0.0
    step = 1024
    for i0 in range(0, a.shape[0], step):
        i1 = min(i0 + step, a.shape[0])
        defect = max(defect, np.abs(a[i0:i1, :] - a.T[i0:i1, :]).max())
    return defect


def cholesky(a: np.ndarray, overwrite_a: bool = False) -> Factorization:
    """Cholesky factorization of a symmetric positive definite matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError("cholesky needs a square matrix")
    scale = np.abs(a).max()
    if scale > 0 and _symmetry_defect(a) > 1e-12 * scale:
        raise ConfigurationError("matrix is not symmetric")
    anorm = sla.norm(a, 1)
    try:
        c, low = sla.cho_factor(a, lower=True, check_finite=False, overwrite_a=overwrite_a)
    except sla.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            "matrix is not positive definite (duplicate nodes, or shape "
            "parameter too small)"
        ) from exc
    return Factorization(kind="cholesky", factors=(c, low, anorm), n=c.shape[0])


def lu(a: np.ndarray) -> Factorization:
    """Partially pivoted LU factorization of a square matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError("lu needs a square matrix")
    amax = np.abs(a).max()
    lu_f, piv = sla.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu_f))
    if amax == 0.0 or pivots.min() < _SINGULAR_PIVOT_REL * amax:
        raise SingularMatrixError("matrix is numerically singular")
    anorm = sla.norm(a, 1)
    return Factorization(kind="lu", factors=(lu_f, piv, anorm), n=a.shape[0])


def solve(f: Factorization, b):
    """Solve A x = b using a previously computed factorization."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.n:
        raise ConfigurationError(
            f"right-hand side length {b.shape[0]} does not match system size {f.n}"
        )
    if f.kind == "cholesky":
        c, low, _ = f.factors
        return sla.cho_solve((c, low), b, check_finite=False)
    lu_f, piv, _ = f.factors
    return sla.lu_solve((lu_f, piv), b, check_finite=False)


def condition_estimate(f: Factorization) -> float:
    """1-norm condition number estimate from the stored factorization."""
    if f.kind == "cholesky":
        c, low, anorm = f.factors
        rcond, info = lapack.dpocon(c, anorm, uplo="L" if low else "U")
    else:
        lu_f, piv, anorm = f.factors
        rcond, info = lapack.dgecon(lu_f, anorm)
    if info != 0 or rcond == 0.0:
        return np.inf
    return 1.0 / rcond
