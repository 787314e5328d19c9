"""Closed-form 2 x 2 spectral quantities.

Used by the toy command as an end-to-end cross-check of the general
numerical kernel: everything here goes through the characteristic
polynomial and Gram matrices only, never through an iterative solver.
"""

from __future__ import annotations

import cmath
import math

import numpy as np


def eigenvalues2(J) -> tuple[complex, complex]:
    """Roots of the characteristic polynomial, largest-imag first."""
    J = np.asarray(J, dtype=complex)
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    disc = cmath.sqrt(tr * tr - 4.0 * det)
    z1 = (tr + disc) / 2.0
    z2 = (tr - disc) / 2.0
    if z1.imag < z2.imag:
        z1, z2 = z2, z1
    return complex(z1), complex(z2)


def singular_values2(J) -> tuple[float, float]:
    """(sigma_max, sigma_min) from the Gram characteristic polynomial."""
    J = np.asarray(J, dtype=complex)
    G = np.conj(J).T @ J
    tr = float(G[0, 0].real + G[1, 1].real)
    det = float((G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]).real)
    disc = math.sqrt(max(tr * tr - 4.0 * det, 0.0))
    return math.sqrt(max((tr + disc) / 2.0, 0.0)), math.sqrt(max((tr - disc) / 2.0, 0.0))


def _eigvec(J: np.ndarray, z: complex) -> np.ndarray:
    # null vector of (J - z I): (-b, a) annihilates row (a, b); fall back
    # to the other row or to e1 when everything vanishes
    a = J[0, 0] - z
    b = J[0, 1]
    c = J[1, 0]
    d = J[1, 1] - z
    if max(abs(a), abs(b)) >= max(abs(c), abs(d)):
        v = np.array([-b, a], dtype=complex)
    else:
        v = np.array([-d, c], dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.array([1.0 + 0.0j, 0.0 + 0.0j])
    return v / norm


def kappa2(J) -> float:
    """Eigenvector condition number with unit-column normalization.

    With eigenvector Gram off-diagonal c, the singular values of the
    unit-column eigenvector matrix are sqrt(1 +- |c|), hence
    kappa = sqrt((1 + |c|) / (1 - |c|)). Returns inf for a defective
    (or numerically defective) pair.
    """
    J = np.asarray(J, dtype=complex)
    z1, z2 = eigenvalues2(J)
    c = abs(np.vdot(_eigvec(J, z1), _eigvec(J, z2)))
    if c >= 1.0:
        return float("inf")
    return math.sqrt((1.0 + c) / (1.0 - c))


def spectral_radius2(J) -> float:
    z1, z2 = eigenvalues2(J)
    return max(abs(z1), abs(z2))
