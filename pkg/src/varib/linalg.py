"""Dense linear-algebra helpers: symmetrization, PD repair, stable logdet/solves."""

import numpy as np
import scipy.linalg as sla

from .exceptions import NumericalError

# Relative diagonal jitter used when repairing an indefinite matrix.
PD_JITTER = 1e-10


def sym(A):
    """Symmetric part of a square matrix."""
    return 0.5 * (A + A.T)


def ensure_pd(A, name="matrix", scale=None):
    """Symmetrize ``A`` and repair it to positive definite if needed.

    Returns ``(repaired, n_repairs)`` where ``n_repairs`` is 0 when the
    symmetrized matrix was already PD and 1 when diagonal jitter was added.
    The jitter is ``PD_JITTER * trace/dim`` plus whatever shift is needed to
    clear the observed eigenvalue deficit.  ``scale`` supplies the
    reference magnitude when the matrix itself may collapse to zero (e.g.
    a residual covariance on a noiseless task).
    """
    A = sym(np.asarray(A, dtype=float))
    w_min = float(np.linalg.eigvalsh(A)[0])
    if w_min > 0.0:
        return A, 0
    dim = A.shape[0]
    tr = float(np.trace(A))
    if scale is None:
        if tr <= 0.0:
            raise NumericalError(
                f"{name} cannot be repaired to PD (trace {tr:g} <= 0)"
            )
        scale = tr / dim
    shift = PD_JITTER * scale + max(0.0, -w_min)
    return A + shift * np.eye(dim), 1


def chol_pd(A, name="matrix"):
    """Lower Cholesky factor of a PD matrix, with a named error on failure."""
    try:
        return sla.cholesky(A, lower=True)
    except sla.LinAlgError:
        raise NumericalError(f"{name} is not positive definite") from None


def logdet_pd(A, name="matrix"):
    """log det of a PD matrix via Cholesky."""
    L = chol_pd(A, name)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def solve_pd(A, B, name="matrix"):
    """Solve ``A x = B`` for PD ``A`` via Cholesky."""
    L = chol_pd(A, name)
    return sla.cho_solve((L, True), B)


def inv_pd(A, name="matrix"):
    """Inverse of a PD matrix, symmetrized."""
    return sym(solve_pd(A, np.eye(A.shape[0]), name))


def solve_sym(A, B, name="matrix"):
    """Solve a symmetric (possibly indefinite, but expected PD) system.

    Tries Cholesky first, falls back to LU, raises NumericalError when
    singular or when the solution is not finite.
    """
    try:
        L = sla.cholesky(A, lower=True)
        out = sla.cho_solve((L, True), B)
    except (sla.LinAlgError, ValueError):
        try:
            out = sla.solve(A, B)
        except (sla.LinAlgError, ValueError):
            raise NumericalError(f"{name} is singular") from None
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"{name} is singular")
    return out


def min_eig(A):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(sym(A))[0])
