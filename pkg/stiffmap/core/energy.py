"""Distortion densities of a Jacobian and their derivatives with respect to J.

Every kernel works on stacks of Jacobians shaped (m, d, d) and returns a
DensityValue of arrays. The module-level functions with scalar names
(shape_density, mixed_density, ...) accept a single d x d matrix.

A density that is not finite (inverted element, or stiffening barrier
reached) is reported with finite=False, value=inf and a zero gradient.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from .linalg import cofactor, determinant, frobenius_sq

# 1 - t*f below this is treated as the barrier itself.
BARRIER_GAP = 1e-14

ArrayOrFloat = Union[np.ndarray, float]


class DensityKind(str, Enum):
    MIXED = "mixed"
    SYMMETRIC_DIRICHLET = "sd"


@dataclass(frozen=True)
class EnergyParams:
    theta: float = 0.5
    epsilon: float = 0.0
    t: float = 0.0
    density: DensityKind = DensityKind.MIXED

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if not 0.0 <= self.t < 1.0:
            raise ValueError(f"t must lie in [0, 1), got {self.t}")
        if self.epsilon > 0.0 and self.t > 0.0:
            raise ValueError("A density is either regularized (epsilon > 0) or stiffened (t > 0), not both")
        object.__setattr__(self, "density", DensityKind(self.density))


@dataclass
class DensityValue:
    value: ArrayOrFloat
    grad: Optional[np.ndarray]
    finite: Union[np.ndarray, bool]


def chi(D: ArrayOrFloat, epsilon: float) -> ArrayOrFloat:
    """(D + sqrt(eps^2 + D^2)) / 2, evaluated without cancellation for D < 0."""
    D = np.asarray(D, dtype=float)
    root = np.sqrt(epsilon * epsilon + D * D)
    with np.errstate(divide="ignore", invalid="ignore"):
        negative = 0.5 * epsilon * epsilon / (root - D)
    out = np.where(D >= 0, 0.5 * (D + root), np.where(root - D > 0, negative, 0.0))
    return float(out) if out.ndim == 0 else out


def chi_derivative(D: ArrayOrFloat, epsilon: float) -> ArrayOrFloat:
    D = np.asarray(D, dtype=float)
    root = np.sqrt(epsilon * epsilon + D * D)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(root > 0, 0.5 * (1.0 + D / np.where(root > 0, root, 1.0)), 0.5)
    return float(out) if out.ndim == 0 else out


def _barrier(D: np.ndarray, epsilon: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Denominator c, dc/dD and the finite mask for determinant D."""
    if epsilon > 0.0:
        return chi(D, epsilon), chi_derivative(D, epsilon), np.ones(D.shape, dtype=bool)
    finite = D > 0
    return np.where(finite, D, 1.0), np.ones_like(D), finite


def _masked(value: np.ndarray, grad: np.ndarray, finite: np.ndarray) -> DensityValue:
    value = np.where(finite, value, np.inf)
    grad = np.where(finite[:, None, None], grad, 0.0)
    return DensityValue(value=value, grad=grad, finite=finite)


def shape_terms(J: np.ndarray, epsilon: float = 0.0) -> DensityValue:
    d = J.shape[-1]
    D = determinant(J)
    c, dc, finite = _barrier(D, epsilon)
    power = 2.0 / d
    cp = c ** power
    fs = frobenius_sq(J) / (d * cp)
    grad = power * J / cp[:, None, None] - (power * fs * dc / c)[:, None, None] * cofactor(J)
    return _masked(fs, grad, finite)


def volume_terms(J: np.ndarray, epsilon: float = 0.0) -> DensityValue:
    D = determinant(J)
    c, dc, finite = _barrier(D, epsilon)
    fv = (1.0 + D * D) / (2.0 * c)
    dfv = D / c - fv * dc / c
    return _masked(fv, dfv[:, None, None] * cofactor(J), finite)


def mixed_terms(J: np.ndarray, theta: float, epsilon: float = 0.0) -> DensityValue:
    shape = shape_terms(J, epsilon)
    volume = volume_terms(J, epsilon)
    finite = shape.finite & volume.finite
    value = (1.0 - theta) * np.where(finite, shape.value, 0.0) + theta * np.where(finite, volume.value, 0.0)
    grad = (1.0 - theta) * shape.grad + theta * volume.grad
    return _masked(value, grad, finite)


def symmetric_dirichlet_terms(J: np.ndarray, epsilon: float = 0.0) -> DensityValue:
    """(tr JᵀJ + |cof J|² / c²) / 2d, which is the SD energy when c = det J > 0."""
    d = J.shape[-1]
    D = determinant(J)
    c, dc, finite = _barrier(D, epsilon)
    cof = cofactor(J)
    cof_sq = frobenius_sq(cof)
    if d == 2:
        cof_sq_grad = 2.0 * J
    else:
        C = np.swapaxes(J, -1, -2) @ J
        trace = np.trace(C, axis1=-2, axis2=-1)
        cof_sq_grad = 2.0 * (trace[:, None, None] * J - J @ C)
    c2 = c * c
    value = (frobenius_sq(J) + cof_sq / c2) / (2.0 * d)
    grad = (
        2.0 * J
        + cof_sq_grad / c2[:, None, None]
        - (2.0 * cof_sq * dc / (c2 * c))[:, None, None] * cof
    ) / (2.0 * d)
    return _masked(value, grad, finite)


def stiffen_terms(base: DensityValue, t: float) -> DensityValue:
    """w = f / (1 - t f) with dw/dJ = (df/dJ) / (1 - t f)^2."""
    f = np.where(base.finite, base.value, 0.0)
    gap = 1.0 - t * f
    finite = base.finite & (gap >= BARRIER_GAP)
    safe_gap = np.where(finite, gap, 1.0)
    return _masked(f / safe_gap, base.grad / (safe_gap * safe_gap)[:, None, None], finite)


def evaluate(J: np.ndarray, params: EnergyParams) -> DensityValue:
    """Batched density selected by params: regularized if epsilon > 0, stiffened if t > 0."""
    if params.density is DensityKind.SYMMETRIC_DIRICHLET:
        base = symmetric_dirichlet_terms(J, params.epsilon)
    else:
        base = mixed_terms(J, params.theta, params.epsilon)
    if params.t > 0.0:
        return stiffen_terms(base, params.t)
    return base


# ── single-matrix API ────────────────────────────────────────────────

def _single(result: DensityValue) -> DensityValue:
    finite = bool(result.finite[0])
    return DensityValue(
        value=float(result.value[0]),
        grad=result.grad[0] if finite else None,
        finite=finite,
    )


def _stack(J) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] not in (2, 3):
        raise ValueError(f"Expected a 2x2 or 3x3 matrix, got shape {J.shape}")
    return J[None]


def shape_density(J) -> DensityValue:
    return _single(shape_terms(_stack(J)))


def volume_density(J) -> DensityValue:
    return _single(volume_terms(_stack(J)))


def mixed_density(J, theta: float) -> DensityValue:
    return _single(mixed_terms(_stack(J), EnergyParams(theta=theta).theta))


def regularized_density(J, theta: float, epsilon: float) -> DensityValue:
    if epsilon <= 0.0:
        raise ValueError(f"Regularization needs epsilon > 0, got {epsilon}")
    return _single(mixed_terms(_stack(J), theta, epsilon))


def stiffened_density(J, theta: float, t: float,
                      density: DensityKind = DensityKind.MIXED) -> DensityValue:
    return _single(evaluate(_stack(J), EnergyParams(theta=theta, t=t, density=density)))


def symmetric_dirichlet_density(J) -> DensityValue:
    return _single(symmetric_dirichlet_terms(_stack(J)))


def density_gradient(J, params: EnergyParams) -> np.ndarray:
    """Analytic derivative of the density selected by params at J.

    Raises:
        ValueError: the density is not finite at J
    """
    result = _single(evaluate(_stack(J), params))
    if not result.finite:
        raise ValueError("Density is not finite at this Jacobian; its gradient is undefined")
    return result.grad
