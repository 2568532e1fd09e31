"""Foldover removal by a decreasing-epsilon continuation on F(X, eps)."""
import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np

from .assembly import Objective
from .constraints import ConstraintSet, build_reduction
from .density import BaseDensity, MixedDensity
from .linalg import determinant
from .mesh import DeformationState, SimplicialMesh, jacobians
from .report import ContinuationReport, IterationRecord
from .schema import SolverConfig, UntangleConfig
from .solver import minimize

logger = logging.getLogger(__name__)


def _schedule_target(d_min: float, config: UntangleConfig) -> float:
    depth = min(0.0, d_min)
    return math.sqrt(config.epsilon_floor ** 2 + config.schedule_coefficient * depth * depth)


def initial_epsilon(d_min: float, mean_abs_det: float, config: UntangleConfig) -> float:
    """Starting eps: deep enough for the worst inversion, never tiny next to typical dets."""
    return max(_schedule_target(d_min, config), config.initial_det_fraction * mean_abs_det)


def epsilon_update(epsilon_prev: float, d_min_current: float, config: UntangleConfig) -> float:
    """eps^{k+1} = min(eps^k, sqrt(floor^2 + c min(0, d_min)^2))."""
    if epsilon_prev <= 0.0:
        raise ValueError(f"epsilon_prev must be positive, got {epsilon_prev}")
    return min(epsilon_prev, _schedule_target(d_min_current, config))


def untangle(mesh: SimplicialMesh, initial_state: DeformationState,
             constraints: Optional[ConstraintSet] = None,
             config: Optional[UntangleConfig] = None,
             solver_config: Optional[SolverConfig] = None,
             density: Optional[BaseDensity] = None,
             on_iteration: Optional[Callable[[IterationRecord], None]] = None,
             ) -> Tuple[DeformationState, ContinuationReport]:
    """Drive an arbitrary initial map into the set of maps with all det J_k > 0.

    Stops once the map is untangled and F(X^k, eps^k) no longer drops by
    more than relative_stagnation between consecutive outer steps. When the
    outer budget runs out first, the iterate with the largest d_min is
    returned and the report says so.
    """
    config = config or UntangleConfig()
    solver_config = solver_config or SolverConfig()
    density = density or MixedDensity(config.theta)
    initial_state.check(mesh)

    reduction = build_reduction(constraints, mesh.vertex_count, mesh.dim)
    free = reduction.project(initial_state.flat())
    det0 = determinant(jacobians(mesh, reduction.expand_coords(free)))
    epsilon = initial_epsilon(float(np.min(det0)), float(np.mean(np.abs(det0))), config)
    logger.info("Untangling %r: d_min=%.6g, eps0=%.6g", mesh, float(np.min(det0)), epsilon)

    report = ContinuationReport(phase="untangle")
    objective = Objective(mesh, density, reduction, epsilon=epsilon)
    current = objective(free)
    previous_start: Optional[float] = None
    best_free, best_d_min = free, current.d_min

    for k in range(config.max_outer_iterations):
        start_value = current.value
        if (previous_start is not None and current.d_min > 0.0
                and start_value > (1.0 - config.relative_stagnation) * previous_start):
            report.converged = True
            break

        result = minimize(objective, free, solver_config)
        free = result.x
        after = result.evaluation
        record = IterationRecord(
            iteration=k,
            param=epsilon,
            objective=after.value,
            f_max=after.f_max,
            d_min=after.d_min,
            inner_iterations=result.iterations,
        )
        report.records.append(record)
        logger.info("untangle k=%d eps=%.3e F=%.9g d_min=%.6g inner=%d",
                    k, epsilon, after.value, after.d_min, result.iterations)
        if on_iteration is not None:
            on_iteration(record)
        if after.d_min > best_d_min:
            best_free, best_d_min = free, after.d_min

        epsilon = epsilon_update(epsilon, after.d_min, config)
        previous_start = start_value
        objective = Objective(mesh, density, reduction, epsilon=epsilon)
        current = objective(free)

    report.terminal_param = epsilon
    if current.d_min > 0.0:
        report.feasible = True
        state = reduction.state(free)
        if not report.converged:
            report.message = "outer budget exhausted after reaching an untangled map"
    else:
        state = reduction.state(best_free)
        report.message = (f"outer budget of {config.max_outer_iterations} iterations exhausted; "
                          f"best d_min={best_d_min:.6g}")
        logger.warning("Untangling failed: %s", report.message)
    return state, report
