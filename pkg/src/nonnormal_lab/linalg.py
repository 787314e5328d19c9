"""Dense linear algebra kernel for operator stability diagnostics.

All routines work on plain numpy arrays; matrices may be real or complex.
Eigenpairs are computed in complex arithmetic throughout, since real
update operators routinely carry complex-conjugate eigenvalue pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Residual tolerance for accepting an eigenpair, relative to ``||J||_2``.
TOL_EIG = 1e-8

#: Below this ``sigma_min(V)/sigma_max(V)`` ratio the operator is reported
#: as numerically non-diagonalizable (kappa_V still reports the huge ratio).
TOL_RANK = 1e-12

#: Dense desk-scale guard on the eigensolver.
MAX_DENSE_N = 2048


class NonConvergenceError(RuntimeError):
    """Eigenvalue iteration failed or left eigenpairs above tolerance."""


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Validate and return a 2-d float/complex array with finite entries."""
    A = np.asarray(A)
    if A.dtype.kind in "iub":
        A = A.astype(np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def as_square_matrix(A, name: str = "matrix") -> np.ndarray:
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a square operator plus conditioning metadata.

    ``V`` holds right eigenvectors as columns, each normalized to unit
    2-norm. ``kappa_V`` is ``||V||_2 * ||V^-1||_2`` under that
    normalization, i.e. ``sigma_max(V) / sigma_min(V)``.
    """

    eigenvalues: np.ndarray
    V: np.ndarray
    kappa_V: float
    spectral_radius: float
    diagonalizable: bool


def eig(J, residual_tol: float = TOL_EIG) -> EigenDecomposition:
    """Nonsymmetric eigendecomposition with unit-column eigenvectors.

    Raises :class:`NonConvergenceError` when the QR iteration fails or
    when any eigenpair residual ``||J v - w v||_2`` exceeds
    ``residual_tol * ||J||_2``, reporting the offending eigenvalues.
    """
    J = as_square_matrix(J, "J")
    n = J.shape[0]
    if n > MAX_DENSE_N:
        raise ValueError(f"dense eigendecomposition capped at n={MAX_DENSE_N}, got {n}")
    Jc = J.astype(np.complex128, copy=False)
    try:
        w, V = np.linalg.eig(Jc)
    except np.linalg.LinAlgError as exc:
        raise NonConvergenceError(f"QR eigenvalue iteration did not converge: {exc}") from exc
    V = V / np.linalg.norm(V, axis=0)
    sv = np.linalg.svd(V, compute_uv=False)
    kappa = float(sv[0] / sv[-1]) if sv[-1] > 0.0 else float("inf")
    diagonalizable = bool(sv[-1] / sv[0] >= TOL_RANK)
    rho = float(np.abs(w).max())
    scale = float(np.linalg.svd(Jc, compute_uv=False)[0])
    residuals = np.linalg.norm(Jc @ V - V * w, axis=0)
    bad = np.flatnonzero(residuals > residual_tol * scale)
    if bad.size:
        raise NonConvergenceError(
            "eigenpair residuals above tolerance for eigenvalue indices "
            f"{bad.tolist()} (eigenvalues {w[bad].tolist()})"
        )
    return EigenDecomposition(w, V, kappa, rho, diagonalizable)


def operator_norm_2(A) -> float:
    """Largest singular value."""
    A = as_matrix(A, "A")
    return float(np.linalg.svd(A, compute_uv=False)[0])


def sigma_min(A) -> float:
    """Smallest singular value of a square matrix (0 for singular input)."""
    A = as_square_matrix(A, "A")
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def matrix_power_norms(J, t_max: int) -> np.ndarray:
    """``||J^t||_2`` for t = 0..t_max by iterated multiplication.

    Cumulative round-off grows like O(t * eps_machine * ||J||^t). Entry
    overflow is reported as inf norms from that t on; with rho(J) > 1
    that signals genuine blow-up, not a failure.
    """
    J = as_square_matrix(J, "J")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    norms = np.empty(t_max + 1)
    norms[0] = 1.0
    P = np.eye(J.shape[0], dtype=J.dtype)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, t_max + 1):
            P = P @ J
            if np.all(np.isfinite(P)):
                norms[t] = np.linalg.svd(P, compute_uv=False)[0]
            else:
                norms[t] = float("inf")
    return norms
