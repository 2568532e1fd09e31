"""Assembly of the mesh objectives F(X, eps) and W(X, t).

Both are sums of element densities weighted by reference volumes. The
gradient is pulled back through J = E B to vertex coordinates and then to
free variables through the constraint reduction.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraints import Reduction, build_reduction
from .density import BaseDensity, MixedDensity
from .linalg import determinant
from .mesh import DeformationState, SimplicialMesh, jacobians


@dataclass
class ObjectiveValue:
    value: float
    gradient: np.ndarray
    finite: bool
    f_max: float
    d_min: float


def vertex_gradient(mesh: SimplicialMesh, element_grad: np.ndarray) -> np.ndarray:
    """Scatter dF/dJ_k (already volume-weighted) to per-vertex gradients (n, d)."""
    # dF/dE = G Bᵀ; column i belongs to vertex i+1, vertex 0 takes minus their sum
    dE = element_grad @ np.swapaxes(mesh.geometry.inv_edge_matrix, 1, 2)
    local = np.empty((mesh.simplex_count, mesh.dim + 1, mesh.dim))
    local[:, 1:, :] = np.swapaxes(dE, 1, 2)
    local[:, 0, :] = -local[:, 1:, :].sum(axis=1)
    out = np.zeros((mesh.vertex_count, mesh.dim))
    np.add.at(out, mesh.simplices, local)
    return out


class Objective:
    """Evaluator of F (epsilon > 0) or W (t >= 0) over free variables."""

    def __init__(self, mesh: SimplicialMesh, density: BaseDensity, reduction: Reduction,
                 epsilon: float = 0.0, t: float = 0.0):
        if epsilon < 0.0:
            raise ValueError(f"epsilon must be non-negative, got {epsilon}")
        if not 0.0 <= t < 1.0:
            raise ValueError(f"t must lie in [0, 1), got {t}")
        if epsilon > 0.0 and t > 0.0:
            raise ValueError("An objective is either regularized or stiffened, not both")
        self.mesh = mesh
        self.density = density
        self.reduction = reduction
        self.epsilon = epsilon
        self.t = t

    def _element_terms(self, J: np.ndarray):
        """Objective density and the plain density used for f_max."""
        base = self.density.terms(J)
        if self.epsilon > 0.0:
            return self.density.terms(J, self.epsilon), base
        if self.t > 0.0:
            return self.density.stiffened(J, self.t), base
        return base, base

    def evaluate_coords(self, coords: np.ndarray) -> ObjectiveValue:
        J = jacobians(self.mesh, coords)
        terms, base = self._element_terms(J)
        d_min = float(np.min(determinant(J)))
        f_max = float(np.max(base.value[base.finite])) if np.any(base.finite) else math.inf
        finite = bool(np.all(terms.finite))
        full_size = self.mesh.vertex_count * self.mesh.dim
        if not finite:
            return ObjectiveValue(math.inf, np.zeros(self.reduction.free_count), False, f_max, d_min)
        volume = self.mesh.geometry.ref_volume
        value = float(np.sum(terms.value * volume))
        grad = vertex_gradient(self.mesh, terms.grad * volume[:, None, None]).reshape(full_size)
        return ObjectiveValue(value, self.reduction.free_gradient(grad), True, f_max, d_min)

    def __call__(self, free: np.ndarray) -> ObjectiveValue:
        return self.evaluate_coords(self.reduction.expand_coords(free))


def _objective(mesh: SimplicialMesh, state: DeformationState, theta: float,
               reduction: Optional[Reduction], density: Optional[BaseDensity],
               epsilon: float, t: float) -> ObjectiveValue:
    state.check(mesh)
    if reduction is None:
        reduction = build_reduction(None, mesh.vertex_count, mesh.dim)
    objective = Objective(mesh, density or MixedDensity(theta), reduction, epsilon=epsilon, t=t)
    return objective.evaluate_coords(state.coords)


def eval_F(mesh: SimplicialMesh, state: DeformationState, theta: float, epsilon: float,
           reduction: Optional[Reduction] = None,
           density: Optional[BaseDensity] = None) -> ObjectiveValue:
    """Regularized energy sum f_eps(J_k) vol(T_k); finite for every state."""
    if epsilon <= 0.0:
        raise ValueError(f"F needs epsilon > 0, got {epsilon}")
    return _objective(mesh, state, theta, reduction, density, epsilon, 0.0)


def eval_W(mesh: SimplicialMesh, state: DeformationState, theta: float, t: float,
           reduction: Optional[Reduction] = None,
           density: Optional[BaseDensity] = None) -> ObjectiveValue:
    """Stiffened energy sum f/(1 - t f) vol(T_k); infinite outside f < 1/t."""
    return _objective(mesh, state, theta, reduction, density, 0.0, t)
