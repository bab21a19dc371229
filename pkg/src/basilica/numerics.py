"""Dense symmetric linear algebra used as ground truth by the other modules."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InputError, SingularBlockError

MAX_ORDER = 4096
RESIDUAL_FACTOR = 1e-10
SINGULAR_RCOND = 1e-12


@dataclass(frozen=True)
class EigDecomposition:
    """Ascending eigenvalues, orthonormal eigenvectors (columns) and the
    largest observed residual ``max_i ||M v_i - lambda_i v_i||``."""

    values: np.ndarray
    vectors: np.ndarray
    residual: float


def as_symmetric(M) -> np.ndarray:
    """Copy ``M`` into a float array and symmetrize it exactly."""
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    return (A + A.T) / 2


def _normalize_signs(V: np.ndarray) -> np.ndarray:
    # the largest-magnitude entry of each column is made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig(M) -> EigDecomposition:
    """Full eigendecomposition of a dense symmetric matrix.

    Uses LAPACK's divide-and-conquer driver, which is deterministic for a
    fixed input and thread count; eigenvector signs are normalized.
    """
    A = as_symmetric(M)
    n = A.shape[0]
    if n > MAX_ORDER:
        raise InputError(f"order {n} exceeds the dense limit {MAX_ORDER}")
    if n == 0:
        return EigDecomposition(np.zeros(0), np.zeros((0, 0)), 0.0)
    w, V = scipy.linalg.eigh(A, driver="evd")
    V = _normalize_signs(V)
    residual = float(np.max(np.linalg.norm(A @ V - V * w, axis=0)))
    bound = RESIDUAL_FACTOR * n * np.linalg.norm(A, 2)
    if residual > bound:
        raise ArithmeticError(f"eigen-residual {residual:.3e} exceeds {bound:.3e}")
    return EigDecomposition(w, V, residual)


def eigvalsh(M) -> np.ndarray:
    """Eigenvalues only (ascending)."""
    return scipy.linalg.eigh(as_symmetric(M), eigvals_only=True, driver="evd")


def schur(M, keep: Sequence[int], shift: float = 0.0) -> np.ndarray:
    """Schur complement ``A - B (D - shift)^-1 C`` onto the indices ``keep``.

    ``A`` is the kept block and ``D`` the discarded one; the shift is applied
    to the diagonal of the whole matrix before reducing.
    """
    A = as_symmetric(M)
    n = A.shape[0]
    keep = np.asarray(keep, dtype=np.int64)
    drop = np.setdiff1d(np.arange(n), keep)
    if shift:
        A = A - shift * np.eye(n)
    Akk = A[np.ix_(keep, keep)]
    if drop.size == 0:
        return Akk
    D = A[np.ix_(drop, drop)]
    Bk = A[np.ix_(keep, drop)]
    with warnings.catch_warnings():
        # singularity is reported below through SingularBlockError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(D, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.min() <= SINGULAR_RCOND * max(diag.max(), 1.0):
        raise SingularBlockError(shift)
    S = Akk - Bk @ scipy.linalg.lu_solve((lu, piv), Bk.T)
    return (S + S.T) / 2


def gen_eig(L, massdiag) -> EigDecomposition:
    """Eigenpairs of ``L u = lambda diag(massdiag) u``.

    Computed through ``M^-1/2 L M^-1/2``; the returned eigenvectors are mapped
    back to the original coordinates and are M-orthonormal.
    """
    m = np.asarray(massdiag, dtype=float)
    if m.ndim != 1 or not np.all(np.isfinite(m)):
        raise InputError("masses must be a finite vector")
    if np.any(m <= 0):
        raise InputError("masses must be positive")
    s = 1.0 / np.sqrt(m)
    A = as_symmetric(L)
    dec = sym_eig(s[:, None] * A * s[None, :])
    return EigDecomposition(dec.values, s[:, None] * dec.vectors, dec.residual)


def gen_eigvals(L, massdiag) -> np.ndarray:
    m = np.asarray(massdiag, dtype=float)
    if np.any(m <= 0):
        raise InputError("masses must be positive")
    s = 1.0 / np.sqrt(m)
    return eigvalsh(s[:, None] * as_symmetric(L) * s[None, :])


def null_space(M, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the eigenvectors of ``M`` with |eigenvalue| <= tol."""
    dec = sym_eig(M)
    return dec.vectors[:, np.abs(dec.values) <= tol]
