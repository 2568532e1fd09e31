import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Optional

from ..io.constraintfile import load_constraints
from ..io.meshfile import MeshFormat, detect_format, load_mesh, load_state, store_mesh
from ..io.reportfile import write_quality, write_report
from .audit import RunAuditLogger
from .constraints import ConstraintSet
from .density import BaseDensity, DensityRegistry
from .errors import ConfigError, MeshError
from .mesh import DeformationState, SimplicialMesh
from .quality import QualityStats, compute_quality
from .report import ContinuationReport, IterationRecord, RunSummary
from .schema import RunConfig
from .stiffen import stiffen, validate_stiffening_report
from .untangle import untangle

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_BUDGET = 2


@dataclass
class Problem:
    mesh: SimplicialMesh
    state: DeformationState
    constraints: Optional[ConstraintSet] = None
    format: MeshFormat = MeshFormat.MEDIT
    mesh_path: str = ""


@dataclass
class RunOutcome:
    state: DeformationState
    reports: List[ContinuationReport] = field(default_factory=list)
    stats: Optional[QualityStats] = None
    summary: RunSummary = field(default_factory=RunSummary)
    exit_code: int = EXIT_OK


class MappingController:
    """Load a problem, run the continuation phases and store what they produce."""

    def __init__(self, config: Optional[RunConfig] = None, audit: Optional[RunAuditLogger] = None):
        self.config = config or RunConfig()
        self.audit = audit or RunAuditLogger()

        self.registry = DensityRegistry()
        for name, path in self.config.densities.items():
            try:
                self.registry.load_plugin(name, path)
            except TypeError as e:
                raise ConfigError(str(e)) from e

    def density(self, theta: float) -> BaseDensity:
        try:
            return self.registry.create(self.config.stiffen.density, theta)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def load_problem(self, mesh_path: str, init_path: Optional[str] = None,
                     constraints_path: Optional[str] = None) -> Problem:
        """Read the reference mesh, the starting map and the constraint file.

        The starting map is, in order: the --init file, OBJ texture
        coordinates stored with the mesh, or the identity for a volume or
        planar mesh.

        Raises:
            MeshError: a surface mesh comes without any starting map
        """
        mesh_file = load_mesh(mesh_path)
        mesh = mesh_file.mesh
        if init_path:
            state = load_state(init_path).check(mesh)
        elif mesh_file.initial_state is not None:
            state = mesh_file.initial_state.check(mesh)
        elif mesh.is_surface:
            raise MeshError(
                f"{mesh_path} is a surface in 3D; flattening needs an initial planar map (--init)"
            )
        else:
            state = DeformationState.identity(mesh)

        constraints = load_constraints(constraints_path, mesh, state) if constraints_path else None
        logger.info("Loaded %r from %s", mesh, mesh_path)
        return Problem(mesh=mesh, state=state, constraints=constraints,
                       format=mesh_file.format, mesh_path=mesh_path)

    # ━━ phases ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def _on_iteration(self, phase: str):
        def record(rec: IterationRecord):
            self.audit.log_event("OUTER_ITERATION", {"phase": phase, **dataclasses.asdict(rec)})
        return record

    def _phase_end(self, report: ContinuationReport):
        self.audit.log_event("PHASE_END", {
            "phase": report.phase,
            "outer_iterations": len(report.records),
            "inner_iterations": report.total_inner_iterations,
            "converged": report.converged,
            "feasible": report.feasible,
            "terminal_param": report.terminal_param,
            "message": report.message,
        })

    def _run_start(self, command: str, problem: Problem):
        self.audit.log_event("RUN_START", {
            "command": command,
            "mesh": problem.mesh_path,
            "vertices": problem.mesh.vertex_count,
            "simplices": problem.mesh.simplex_count,
            "dim": problem.mesh.dim,
            "surface": problem.mesh.is_surface,
            "density": self.config.stiffen.density,
            "config": dataclasses.asdict(self.config),
        })

    def _finish(self, problem: Problem, state: DeformationState, reports: List[ContinuationReport],
                density: BaseDensity, exit_code: int, t: Optional[float] = None) -> RunOutcome:
        stats = compute_quality(problem.mesh, state, density)
        summary = RunSummary(
            gamma=None if density.conformal else stats.measured_gamma,
            gamma_bound=density.gamma_bound(t, problem.mesh.dim) if t else None,
            t=t,
            f_max=stats.f_max,
            d_min=stats.d_min,
        )
        self.audit.log_event("RUN_END", {"exit_code": exit_code, **dataclasses.asdict(summary)})
        return RunOutcome(state=state, reports=reports, stats=stats, summary=summary, exit_code=exit_code)

    def _untangle(self, problem: Problem) -> ContinuationReport:
        density = self.density(self.config.untangle.theta)
        state, report = untangle(problem.mesh, problem.state, problem.constraints,
                                 self.config.untangle, self.config.solver, density,
                                 on_iteration=self._on_iteration("untangle"))
        self._phase_end(report)
        problem.state = state
        return report

    def _stiffen(self, problem: Problem) -> ContinuationReport:
        density = self.density(self.config.stiffen.theta)
        state, report = stiffen(problem.mesh, problem.state, problem.constraints,
                                self.config.stiffen, self.config.solver, density,
                                on_iteration=self._on_iteration("stiffen"))
        self._phase_end(report)
        for problem_found in validate_stiffening_report(report):
            logger.warning("Stiffening report check: %s", problem_found)
        problem.state = state
        return report

    def run_untangle(self, problem: Problem) -> RunOutcome:
        self._run_start("untangle", problem)
        report = self._untangle(problem)
        exit_code = EXIT_OK if report.feasible else EXIT_BUDGET
        return self._finish(problem, problem.state, [report],
                            self.density(self.config.untangle.theta), exit_code)

    def run_stiffen(self, problem: Problem) -> RunOutcome:
        """Stiffen an untangled map.

        Raises:
            TangledInputError: the starting map has an inverted element
        """
        self._run_start("stiffen", problem)
        report = self._stiffen(problem)
        exit_code = EXIT_OK if report.converged else EXIT_BUDGET
        return self._finish(problem, problem.state, [report],
                            self.density(self.config.stiffen.theta), exit_code, t=report.terminal_param)

    def run_pipeline(self, problem: Problem) -> RunOutcome:
        """Untangle, then stiffen; stiffening is skipped when untangling fails."""
        self._run_start("pipeline", problem)
        first = self._untangle(problem)
        if not first.feasible:
            logger.warning("Untangling did not reach a foldover-free map; skipping stiffening")
            return self._finish(problem, problem.state, [first],
                                self.density(self.config.untangle.theta), EXIT_BUDGET)
        second = self._stiffen(problem)
        exit_code = EXIT_OK if second.converged else EXIT_BUDGET
        return self._finish(problem, problem.state, [first, second],
                            self.density(self.config.stiffen.theta), exit_code, t=second.terminal_param)

    def run_quality(self, problem: Problem) -> RunOutcome:
        self._run_start("quality", problem)
        return self._finish(problem, problem.state, [], self.density(self.config.stiffen.theta), EXIT_OK)

    # ━━ output ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

    def store(self, problem: Problem, outcome: RunOutcome, out_path: Optional[str] = None,
              report_path: Optional[str] = None):
        if out_path:
            store_mesh(out_path, problem.mesh, outcome.state, detect_format(out_path))
        if report_path:
            write_report(report_path, outcome.reports, outcome.stats, outcome.summary)

    def store_quality(self, outcome: RunOutcome, report_path: str):
        write_quality(report_path, outcome.stats)
