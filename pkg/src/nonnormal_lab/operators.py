"""Linearized optimizer update operators and normality tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_square_matrix, operator_norm_2

#: Relative Frobenius tolerance for accepting a Hessian as symmetric.
SYMMETRY_RTOL = 1e-10

#: Scale-aware zero threshold for the normality commutator:
#: ``||C||_2 <= COMMUTATOR_RTOL * ||J||_2**2`` counts as normal.
COMMUTATOR_RTOL = 1e-10


@dataclass(frozen=True)
class UpdateOperator:
    """A tagged update-operator Jacobian with its construction inputs."""

    kind: str  # adam_frozen | adam_augmented | sgdm_augmented | scalar
    J: np.ndarray
    H: np.ndarray | None = None
    M: np.ndarray | None = None
    eta: float = 0.0
    beta1: float | None = None
    beta: float | None = None
    lam: float | None = None


def check_symmetric(H, name: str = "H", rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Validate a real symmetric matrix (relative Frobenius tolerance)."""
    H = as_square_matrix(H, name)
    if np.iscomplexobj(H):
        if np.any(H.imag != 0):
            raise ValueError(f"{name} must be real symmetric")
        H = H.real
    if np.linalg.norm(H - H.T) > rtol * np.linalg.norm(H):
        raise ValueError(f"{name} is not symmetric within relative tolerance {rtol}")
    return H


def check_positive_vector(m, n: int | None = None, name: str = "M") -> np.ndarray:
    """Validate a strictly positive 1-d vector (a diagonal preconditioner)."""
    m = np.asarray(m, dtype=float).reshape(-1)
    if n is not None and m.size != n:
        raise ValueError(f"{name} has length {m.size}, expected {n}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(m <= 0.0):
        raise ValueError(f"{name} must have strictly positive entries")
    return m


def _check_rate(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value < 1.0:
        raise ValueError(f"{name} must lie in [0, 1), got {value}")
    return value


def _check_step(eta: float) -> float:
    eta = float(eta)
    if eta <= 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    return eta


def build_adam_frozen(H, M, eta: float) -> UpdateOperator:
    """``J = I - eta * M^{-1} H`` for a frozen diagonal preconditioner."""
    H = check_symmetric(H)
    n = H.shape[0]
    M = check_positive_vector(M, n)
    eta = _check_step(eta)
    J = np.eye(n) - eta * (H / M[:, None])
    return UpdateOperator("adam_frozen", J, H=H, M=M, eta=eta)


def build_adam_augmented(H, M, eta: float, beta1: float) -> UpdateOperator:
    """2n x 2n operator on (step, first moment) with frozen preconditioner."""
    H = check_symmetric(H)
    n = H.shape[0]
    M = check_positive_vector(M, n)
    eta = _check_step(eta)
    beta1 = _check_rate(beta1, "beta1")
    J = np.block(
        [
            [np.eye(n) - eta * (1.0 - beta1) * (H / M[:, None]), -eta * beta1 * np.diag(1.0 / M)],
            [(1.0 - beta1) * H, beta1 * np.eye(n)],
        ]
    )
    return UpdateOperator("adam_augmented", J, H=H, M=M, eta=eta, beta1=beta1)


def build_sgdm_augmented(H, eta: float, beta: float) -> UpdateOperator:
    """2n x 2n operator on (step, momentum buffer)."""
    H = check_symmetric(H)
    n = H.shape[0]
    eta = _check_step(eta)
    beta = _check_rate(beta, "beta")
    J = np.block(
        [
            [np.eye(n) - eta * H, -eta * beta * np.eye(n)],
            [H, beta * np.eye(n)],
        ]
    )
    return UpdateOperator("sgdm_augmented", J, H=H, eta=eta, beta=beta)


def build_scalar_toy(lam: float, eta: float, beta: float) -> UpdateOperator:
    """The 2 x 2 momentum operator of a single quadratic coordinate."""
    lam = float(lam)
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    eta = _check_step(eta)
    beta = _check_rate(beta, "beta")
    J = np.array([[1.0 - eta * lam, -eta * beta], [lam, beta]])
    return UpdateOperator("scalar", J, eta=eta, beta=beta, lam=lam)


def normality_commutator(J) -> np.ndarray:
    """``J J^H - J^H J``; callers apply a scale-aware zero test."""
    J = as_square_matrix(J, "J")
    Jh = J.conj().T
    return J @ Jh - Jh @ J


def hm_commutator(H, M) -> np.ndarray:
    """``[H, M]`` for diagonal M, entrywise ``H_ij * (m_j - m_i)``."""
    H = as_square_matrix(H, "H")
    M = check_positive_vector(M, H.shape[0])
    return H * (M[None, :] - M[:, None])


def is_normal(J, rtol: float = COMMUTATOR_RTOL) -> bool:
    """Scale-aware normality test on the commutator norm."""
    J = as_square_matrix(J, "J")
    scale = operator_norm_2(J)
    return bool(operator_norm_2(normality_commutator(J)) <= rtol * scale * scale)
