"""Batched small-matrix helpers for stacks of 2x2 and 3x3 Jacobians.

All functions take arrays shaped (m, d, d) and use closed-form cofactor
expansion, so results do not depend on pivoting.
"""
import numpy as np


def determinant(J: np.ndarray) -> np.ndarray:
    d = J.shape[-1]
    if d == 2:
        return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if d == 3:
        return np.einsum("...i,...i->...", J[..., 0, :], np.cross(J[..., 1, :], J[..., 2, :]))
    raise ValueError(f"Unsupported dimension {d}; expected 2 or 3")


def cofactor(J: np.ndarray) -> np.ndarray:
    """Cofactor matrix, i.e. the derivative of det J with respect to J."""
    d = J.shape[-1]
    cof = np.empty_like(J, dtype=float)
    if d == 2:
        cof[..., 0, 0] = J[..., 1, 1]
        cof[..., 0, 1] = -J[..., 1, 0]
        cof[..., 1, 0] = -J[..., 0, 1]
        cof[..., 1, 1] = J[..., 0, 0]
        return cof
    if d == 3:
        r0, r1, r2 = J[..., 0, :], J[..., 1, :], J[..., 2, :]
        cof[..., 0, :] = np.cross(r1, r2)
        cof[..., 1, :] = np.cross(r2, r0)
        cof[..., 2, :] = np.cross(r0, r1)
        return cof
    raise ValueError(f"Unsupported dimension {d}; expected 2 or 3")


def frobenius_sq(J: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ij->...", J, J)


def inverse(J: np.ndarray) -> np.ndarray:
    """Inverse through the adjugate; caller guarantees non-zero determinants."""
    return np.swapaxes(cofactor(J), -1, -2) / determinant(J)[..., None, None]
