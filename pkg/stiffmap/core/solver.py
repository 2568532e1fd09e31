"""Barrier-aware limited-memory BFGS over free variables."""
import logging
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Deque, Optional, Tuple

import numpy as np

from .errors import InfeasibleStartError
from .schema import SolverConfig

logger = logging.getLogger(__name__)

ROUNDOFF_GRADIENT = 1e-14
# Values closer than this many ulps of |f| are indistinguishable to the Armijo test.
ROUNDOFF_ULPS = 8.0
STALL_GRADIENT = math.sqrt(np.finfo(float).eps)


class ConvergedReason(str, Enum):
    GRADIENT_SMALL = "gradient_small"
    MAX_ITERATIONS = "max_iterations"
    NO_PROGRESS = "no_progress"


@dataclass
class InnerSolveResult:
    x: np.ndarray
    initial_value: float
    final_value: float
    iterations: int
    converged_reason: ConvergedReason
    evaluation: Any = None      # objective output at x
    evaluations: int = 0
    rejected_infeasible: int = 0


def _two_loop(gradient: np.ndarray, history: Deque[Tuple[np.ndarray, np.ndarray, float]]) -> np.ndarray:
    q = gradient.copy()
    alphas = []
    for s, y, rho in reversed(history):
        alpha = rho * float(s @ q)
        q -= alpha * y
        alphas.append(alpha)
    s, y, _ = history[-1]
    r = (float(s @ y) / float(y @ y)) * q
    for (s, y, rho), alpha in zip(history, reversed(alphas)):
        beta = rho * float(y @ r)
        r += s * (alpha - beta)
    return -r


def _flat_but_closer(current: Any, trial: Any, g_norm: float) -> bool:
    """Trial value equals current up to round-off while the gradient shrinks."""
    resolution = ROUNDOFF_ULPS * np.finfo(float).eps * max(1.0, abs(current.value))
    if abs(trial.value - current.value) > resolution:
        return False
    return float(np.linalg.norm(trial.gradient)) < g_norm


def minimize(objective: Callable[[np.ndarray], Any], start: np.ndarray,
             config: Optional[SolverConfig] = None,
             callback: Optional[Callable[[np.ndarray, Any], None]] = None) -> InnerSolveResult:
    """Minimize objective(x) from start without ever accepting a non-finite point.

    objective returns an object with value, gradient and finite attributes.
    Trial points with finite=False are rejected exactly like points failing
    the Armijo condition.

    Raises:
        InfeasibleStartError: the objective is not finite at start
    """
    config = config or SolverConfig()
    x = np.array(start, dtype=float)
    current = objective(x)
    evaluations = 1
    if not current.finite:
        raise InfeasibleStartError(
            "Objective is not finite at the starting point; relax epsilon or t before minimizing"
        )
    initial_value = current.value
    if x.size == 0:
        return InnerSolveResult(x, initial_value, initial_value, 0, ConvergedReason.GRADIENT_SMALL,
                                current, evaluations)

    g = current.gradient
    # relative to the first gradient, with a floor at round-off level
    tolerance = max(config.gradient_tolerance * float(np.linalg.norm(g)),
                    ROUNDOFF_GRADIENT * max(1.0, abs(initial_value)))
    stall_floor = STALL_GRADIENT * float(np.linalg.norm(g))
    history: Deque[Tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=config.history_size)
    reason = ConvergedReason.MAX_ITERATIONS
    rejected = 0
    iterations = 0

    for _ in range(config.max_inner_iterations):
        g_norm = float(np.linalg.norm(g))
        if g_norm <= tolerance:
            reason = ConvergedReason.GRADIENT_SMALL
            break
        if history:
            direction = _two_loop(g, history)
        else:
            direction = -g * min(1.0, 1.0 / g_norm)
        slope = float(g @ direction)
        if slope >= 0.0:
            history.clear()
            direction = -g * min(1.0, 1.0 / g_norm)
            slope = float(g @ direction)

        step = 1.0
        accepted = None
        for _ in range(config.max_backtracks):
            trial_x = x + step * direction
            trial = objective(trial_x)
            evaluations += 1
            if trial.finite and (trial.value <= current.value + config.armijo_c1 * step * slope
                                 or _flat_but_closer(current, trial, g_norm)):
                accepted = (trial_x, trial)
                break
            if not trial.finite:
                rejected += 1
            step *= config.backtrack_factor
        if accepted is None or not (accepted[1].value < current.value
                                    or _flat_but_closer(current, accepted[1], g_norm)):
            # stalled within round-off of a stationary point
            if g_norm <= stall_floor:
                reason = ConvergedReason.GRADIENT_SMALL
            else:
                reason = ConvergedReason.NO_PROGRESS
            break

        trial_x, trial = accepted
        s = trial_x - x
        y = trial.gradient - g
        sy = float(s @ y)
        if sy > config.curvature_floor:
            history.append((s, y, 1.0 / sy))
        x, current, g = trial_x, trial, trial.gradient
        iterations += 1
        if callback is not None:
            callback(x, current)

    logger.debug("L-BFGS: %d iterations, %d evaluations, %.6g -> %.6g (%s)",
                 iterations, evaluations, initial_value, current.value, reason.value)
    return InnerSolveResult(
        x=x,
        initial_value=initial_value,
        final_value=current.value,
        iterations=iterations,
        converged_reason=reason,
        evaluation=current,
        evaluations=evaluations,
        rejected_infeasible=rejected,
    )


def descent_coefficient(initial_value: float, final_value: float, sigma_floor: float) -> float:
    """Relative decrease of one inner solve, floored at sigma_floor.

    Returns a value in [sigma_floor, 1).

    Raises:
        ValueError: values not positive and finite, or floor outside (0, 1)
    """
    if not (math.isfinite(initial_value) and math.isfinite(final_value)):
        raise ValueError("descent_coefficient needs finite objective values")
    if initial_value <= 0.0 or final_value <= 0.0:
        raise ValueError("descent_coefficient needs positive objective values")
    if not 0.0 < sigma_floor < 1.0:
        raise ValueError(f"sigma_floor must lie in (0, 1), got {sigma_floor}")
    return max(1.0 - final_value / initial_value, sigma_floor)
