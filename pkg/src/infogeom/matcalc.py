"""Special matrices and vec/vech algebra in the Magnus-Neudecker layout.

All index conventions are column-major: ``vec(A)`` stacks the columns of
``A`` and entry ``A[i, j]`` of a ``q x r`` matrix lands at position
``i + j*q``. ``vech`` keeps the lower triangle (diagonal included) in the
same column-stacking order.

The commutation, symmetrization, duplication and reduction matrices are
materialized densely and memoized per size. Cached arrays are returned
read-only so a caller cannot corrupt the cache.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_size(*sizes: int) -> None:
    for s in sizes:
        if int(s) != s or s < 1:
            raise ValueError(f"matrix sizes must be positive integers, got {s!r}")


@lru_cache(maxsize=None)
def commutation(q: int, r: int) -> np.ndarray:
    """Commutation matrix ``K_{q,r}`` with ``K vec(A) = vec(A.T)`` for ``A`` of shape (q, r)."""
    _check_size(q, r)
    K = np.zeros((q * r, q * r))
    for i in range(q):
        for j in range(r):
            # A[i, j] sits at i + j*q in vec(A) and at j + i*r in vec(A.T)
            K[j + i * r, i + j * q] = 1.0
    return _frozen(K)


@lru_cache(maxsize=None)
def symmetrization(q: int) -> np.ndarray:
    """``N_q = (I + K_q) / 2``."""
    _check_size(q)
    return _frozen(0.5 * (np.eye(q * q) + commutation(q, q)))


def _vech_index(i: int, j: int, q: int) -> int:
    # lower-triangular (i >= j) position in column-stacked vech order
    return j * q - j * (j - 1) // 2 + (i - j)


@lru_cache(maxsize=None)
def duplication(q: int) -> np.ndarray:
    """Duplication matrix ``D_q``: ``vec(R) = D_q vech(R)`` for symmetric ``R``."""
    _check_size(q)
    D = np.zeros((q * q, q * (q + 1) // 2))
    for j in range(q):
        for i in range(j, q):
            k = _vech_index(i, j, q)
            D[i + j * q, k] = 1.0
            D[j + i * q, k] = 1.0
    return _frozen(D)


@lru_cache(maxsize=None)
def dup_pinv(q: int) -> np.ndarray:
    """Moore-Penrose inverse ``(D'D)^{-1} D'``.

    ``D'D`` is diagonal with entries 1 (diagonal elements) or 2
    (off-diagonal pairs), so the inverse is formed exactly.
    """
    D = duplication(q)
    gram_diag = D.sum(axis=0)
    return _frozen(D.T / gram_diag[:, None])


@lru_cache(maxsize=None)
def reduction(q: int) -> np.ndarray:
    """Reduction matrix ``R_q`` (q^2 x q) with ``R'(A kron B)R = A o B``."""
    _check_size(q)
    R = np.zeros((q * q, q))
    for i in range(q):
        R[i + i * q, i] = 1.0
    return _frozen(R)


def vec(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        return A.copy()
    if A.ndim != 2:
        raise ValueError(f"vec expects a matrix, got ndim={A.ndim}")
    return A.reshape(-1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.size != rows * cols:
        raise ValueError(f"cannot reshape length {v.size} into ({rows}, {cols})")
    return v.reshape((rows, cols), order="F")


def vech(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"vech expects a square matrix, got shape {A.shape}")
    q = A.shape[0]
    return np.concatenate([A[j:, j] for j in range(q)])


def vech_size(q: int) -> int:
    return q * (q + 1) // 2


def vech_order(length: int) -> int:
    """Size ``q`` of the symmetric matrix whose vech has ``length`` entries."""
    q = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if vech_size(q) != length:
        raise ValueError(f"length {length} is not a triangular number q(q+1)/2")
    return q


def unvech(v, q: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if q is None:
        q = vech_order(v.size)
    if v.size != vech_size(q):
        raise ValueError(f"vech of a {q}x{q} matrix has {vech_size(q)} entries, got {v.size}")
    A = np.zeros((q, q))
    pos = 0
    for j in range(q):
        A[j:, j] = v[pos : pos + q - j]
        A[j, j:] = v[pos : pos + q - j]
        pos += q - j
    return A


def kron(A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return np.kron(A, B)


def schur(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"Schur product needs equal shapes, got {A.shape} and {B.shape}")
    return A * B


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def min_eig(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(A))[0])


def max_eig(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(A))[-1])


@dataclass(frozen=True)
class PsdReport:
    """Minimum eigenvalues of the slack matrices (must be >= -tol * norm)."""

    schur_inverse_slack: float | None
    quadratic_form_slack: float | None
    diag_outer_slack: float
    schur_inverse_norm: float | None
    diag_outer_norm: float
    ok: bool


def _is_symmetric(A: np.ndarray) -> bool:
    return np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max()))


def _is_pd(A: np.ndarray, rtol: float = 1e-10) -> bool:
    # Cholesky alone accepts rank-deficient matrices perturbed by roundoff
    w = np.linalg.eigvalsh(A)
    return bool(w[0] > rtol * max(w[-1], 0.0))


def check_psd_inequalities(R, T=None, tol: float = 1e-10) -> PsdReport:
    """Check the Schur-product inequalities behind the multivariate EPI.

    (i)   ``R o T^{-1} >= Diag(R) (R o T)^{-1} Diag(R)``       (R, T positive definite)
    (ii)  ``diag(R)' (R o R)^{-1} diag(R) <= s``                (R positive definite)
    (iii) ``R o R >= diag(R) diag(R)' / s``                     (R positive semidefinite)

    (i) and (ii) are skipped (reported as ``None``) when ``R`` is singular.
    Slack tolerances scale with the spectral norm of each slack matrix.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1] or not _is_symmetric(R):
        raise ValueError("R must be a symmetric square matrix")
    s = R.shape[0]
    T = R if T is None else np.asarray(T, dtype=float)
    if T.shape != R.shape or not _is_symmetric(T):
        raise ValueError("T must be symmetric with the same shape as R")

    d = np.diag(R)
    outer_slack = R * R - np.outer(d, d) / s
    outer_norm = float(np.linalg.norm(outer_slack, 2))
    outer_min = min_eig(outer_slack)
    ok = outer_min >= -tol * outer_norm

    inv_min = quad_slack = inv_norm = None
    if _is_pd(R) and _is_pd(T):
        DR = np.diag(d)
        slack = R * np.linalg.inv(T) - DR @ np.linalg.solve(R * T, DR)
        inv_norm = float(np.linalg.norm(slack, 2))
        inv_min = min_eig(slack)
        quad_slack = float(s - d @ np.linalg.solve(R * R, d))
        ok = ok and inv_min >= -tol * inv_norm and quad_slack >= -tol * s

    return PsdReport(
        schur_inverse_slack=inv_min,
        quadratic_form_slack=quad_slack,
        diag_outer_slack=outer_min,
        schur_inverse_norm=inv_norm,
        diag_outer_norm=outer_norm,
        ok=bool(ok),
    )
