"""Quasi-isometric stiffening: an increasing-t continuation on W(X, t)."""
import logging
import math
from typing import Callable, List, Optional, Tuple

from .assembly import Objective
from .constraints import ConstraintSet, build_reduction
from .density import BaseDensity, DensityRegistry
from .errors import InfeasibleStartError, TangledInputError
from .mesh import DeformationState, SimplicialMesh
from .report import ContinuationReport, IterationRecord
from .schema import SolverConfig, StiffenConfig
from .solver import descent_coefficient, minimize

logger = logging.getLogger(__name__)


def t_update(t_prev: float, f_max_current: float, sigma_current: float,
             feasibility_margin: float = 1e-12) -> float:
    """t + sigma (1 - t f_max) / f_max, kept strictly below 1/f_max.

    When the step would land within feasibility_margin of the barrier the
    increment is halved toward 1/f_max instead.

    Raises:
        InfeasibleStartError: t_prev * f_max_current >= 1
    """
    if not math.isfinite(f_max_current) or f_max_current <= 0.0:
        raise InfeasibleStartError(f"f_max must be finite and positive, got {f_max_current}")
    if t_prev * f_max_current >= 1.0:
        raise InfeasibleStartError(
            f"State violates the barrier for t={t_prev}: f_max * t = {t_prev * f_max_current:.17g}"
        )
    t_next = t_prev + sigma_current * (1.0 - t_prev * f_max_current) / f_max_current
    if f_max_current * t_next >= 1.0 - feasibility_margin:
        t_next = t_prev + 0.5 * (1.0 / f_max_current - t_prev)
    return t_next


def stiffen(mesh: SimplicialMesh, initial_state: DeformationState,
            constraints: Optional[ConstraintSet] = None,
            config: Optional[StiffenConfig] = None,
            solver_config: Optional[SolverConfig] = None,
            density: Optional[BaseDensity] = None,
            on_iteration: Optional[Callable[[IterationRecord], None]] = None,
            ) -> Tuple[DeformationState, ContinuationReport]:
    """Push the maximal element distortion down by raising the stiffening parameter t.

    Every inner solve starts and ends inside f < 1/t, so the returned state
    satisfies f_max * t_terminal < 1 for the terminal t stored in the report.

    Raises:
        TangledInputError: initial_state has an inverted element
    """
    config = config or StiffenConfig()
    solver_config = solver_config or SolverConfig()
    density = density or DensityRegistry().create(config.density, config.theta)
    initial_state.check(mesh)

    reduction = build_reduction(constraints, mesh.vertex_count, mesh.dim)
    free = reduction.project(initial_state.flat())
    t = 0.0
    objective = Objective(mesh, density, reduction, t=t)
    current = objective(free)
    if not current.finite or current.d_min <= 0.0:
        raise TangledInputError(
            f"Stiffening needs an untangled map (d_min={current.d_min:.6g}); run untangle first"
        )
    logger.info("Stiffening %r: f_max=%.6g", mesh, current.f_max)

    report = ContinuationReport(phase="stiffen")
    for k in range(config.max_outer_iterations):
        result = minimize(objective, free, solver_config)
        free = result.x
        after = result.evaluation
        if k == 0:
            sigma = config.sigma_floor
        else:
            sigma = descent_coefficient(result.initial_value, result.final_value, config.sigma_floor)
        t_next = t_update(t, after.f_max, sigma, config.feasibility_margin)

        next_objective = Objective(mesh, density, reduction, t=t_next)
        next_start = next_objective(free)
        if not next_start.finite:
            raise InfeasibleStartError(f"W is not finite after raising t to {t_next:.17g}")

        record = IterationRecord(
            iteration=k,
            param=t,
            objective=after.value,
            f_max=after.f_max,
            d_min=after.d_min,
            inner_iterations=result.iterations,
            sigma=sigma,
            objective_next=next_start.value,
            param_next=t_next,
        )
        report.records.append(record)
        logger.info("stiffen k=%d t=%.9f W=%.9g f_max=%.9g sigma=%.4f inner=%d",
                    k, t, after.value, after.f_max, sigma, result.iterations)
        if on_iteration is not None:
            on_iteration(record)

        stalled_energy = next_start.value > (1.0 - config.relative_stagnation) * current.value
        stalled_t = (t_next - t) < config.relative_stagnation * t_next
        t, objective, current = t_next, next_objective, next_start
        if stalled_energy and stalled_t:
            report.converged = True
            break

    report.terminal_param = t
    report.feasible = current.finite
    if not report.converged:
        report.message = f"outer budget of {config.max_outer_iterations} iterations exhausted"
        logger.warning("Stiffening stopped: %s", report.message)
    return reduction.state(free), report


def validate_stiffening_report(report: ContinuationReport, tolerance: float = 1e-9) -> List[str]:
    """Check the invariants every stiffening run must satisfy. Returns list of error messages (empty = valid).

    Checked: t strictly increasing from 0, total increase at most 1, the
    per-step bound (1 - sigma) W(X^{k+1}, t^{k+1}) <= W(X^{k+1}, t^k), finite
    energies, and f_max * t < 1 at every step including the terminal one.
    """
    errors = []
    records = report.records
    if not records:
        return errors
    if records[0].param != 0.0:
        errors.append(f"First t must be 0, got {records[0].param}")
    for prev, rec in zip(records, records[1:]):
        if rec.param != prev.param_next:
            errors.append(f"Iteration {rec.iteration}: t={rec.param} does not continue t_next={prev.param_next}")
    for rec in records:
        if rec.param_next is None or not rec.param_next > rec.param:
            errors.append(f"Iteration {rec.iteration}: t does not increase ({rec.param} -> {rec.param_next})")
        if not (math.isfinite(rec.objective) and rec.objective_next is not None
                and math.isfinite(rec.objective_next)):
            errors.append(f"Iteration {rec.iteration}: non-finite W")
            continue
        if rec.sigma is not None:
            lhs = (1.0 - rec.sigma) * rec.objective_next
            if lhs > rec.objective + tolerance * abs(rec.objective):
                errors.append(
                    f"Iteration {rec.iteration}: (1 - sigma) W(t_next) = {lhs:.17g} exceeds W(t) = {rec.objective:.17g}"
                )
        if rec.f_max * rec.param >= 1.0:
            errors.append(f"Iteration {rec.iteration}: f_max * t = {rec.f_max * rec.param:.17g} >= 1")
        if rec.param_next is not None and rec.f_max * rec.param_next >= 1.0:
            errors.append(f"Iteration {rec.iteration}: f_max * t_next = {rec.f_max * rec.param_next:.17g} >= 1")
    total = (records[-1].param_next or records[-1].param) - records[0].param
    if total > 1.0:
        errors.append(f"Sum of t increments {total:.17g} exceeds 1")
    if report.terminal_param is not None and report.terminal_param != records[-1].param_next:
        errors.append("Terminal t does not match the last update")
    return errors
