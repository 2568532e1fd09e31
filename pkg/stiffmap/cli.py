import argparse
import logging
import sys
from typing import List, Optional

import yaml

from . import __version__
from .core.audit import RunAuditLogger
from .core.controller import EXIT_INPUT_ERROR, MappingController, RunOutcome
from .core.energy import DensityKind
from .core.errors import ConfigError, StiffmapError
from .core.parser import ConfigLoader, merge_overrides
from .core.schema import RunConfig

logger = logging.getLogger("stiffmap")

COMMANDS = ("untangle", "stiffen", "pipeline", "quality")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh", required=True, help="Reference mesh (.mesh or .obj)")
    common.add_argument("--theta", type=float, help="Shape/volume balance in [0, 1] (default 0.5)")
    common.add_argument(
        "--density",
        help=f"Distortion density: {DensityKind.MIXED.value}, {DensityKind.SYMMETRIC_DIRICHLET.value} "
             f"or a name declared in --config (default {DensityKind.MIXED.value})"
    )
    common.add_argument("--config", help="YAML file with solver, untangle, stiffen and densities sections")
    common.add_argument("--log", help="Append JSON-lines run events to this file")
    common.add_argument("--verbose", "-v", action="store_true", help="Log every inner solve to stderr")
    return common


def _run_parser() -> argparse.ArgumentParser:
    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--init", help="Initial map; required for a surface without texture coordinates")
    run.add_argument("--constraints", help="Constraint file (lock, affine, singularity, transition)")
    run.add_argument("--out", required=True, help="Where to write the resulting mesh")
    run.add_argument("--report", help="CSV trace of the outer iterations, plus a _hist.csv companion")
    run.add_argument("--max-outer", type=int, dest="max_outer", help="Outer iteration budget per phase")
    run.add_argument("--stagnation", type=float, help="Relative decrease below which a phase stops")
    return run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stiffmap",
        description="Foldover-free simplicial maps with bounded distortion"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command")
    common, run = _common_parser(), _run_parser()

    untangle_parser = subparsers.add_parser(
        "untangle", parents=[common, run],
        help="Remove inverted elements by a decreasing-epsilon continuation"
    )
    untangle_parser.add_argument("--eps-floor", type=float, dest="eps_floor",
                                 help="Smallest regularization epsilon (default 1e-9)")

    stiffen_parser = subparsers.add_parser(
        "stiffen", parents=[common, run],
        help="Bound the distortion of an untangled map by an increasing-t continuation"
    )
    stiffen_parser.add_argument("--sigma0", type=float,
                                help="Floor of the per-step descent coefficient (default 0.1)")

    pipeline_parser = subparsers.add_parser(
        "pipeline", parents=[common, run],
        help="Untangle, then stiffen, with one combined report"
    )
    pipeline_parser.add_argument("--eps-floor", type=float, dest="eps_floor",
                                 help="Smallest regularization epsilon (default 1e-9)")
    pipeline_parser.add_argument("--sigma0", type=float,
                                 help="Floor of the per-step descent coefficient (default 0.1)")

    quality_parser = subparsers.add_parser(
        "quality", parents=[common],
        help="Per-element singular values, condition numbers and determinants"
    )
    quality_parser.add_argument("--state", help="Mapped coordinates (defaults to the texture coordinates)")
    quality_parser.add_argument("--report", required=True, help="Per-element CSV, plus a _hist.csv companion")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """The --config file (or defaults) with explicit flags applied on top."""
    try:
        config = ConfigLoader.load(args.config) if args.config else RunConfig()
        return _apply_flags(config, args)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _apply_flags(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    stagnation = getattr(args, "stagnation", None)
    max_outer = getattr(args, "max_outer", None)
    config = merge_overrides(
        config, "untangle",
        theta=args.theta,
        epsilon_floor=getattr(args, "eps_floor", None),
        relative_stagnation=stagnation,
        max_outer_iterations=max_outer,
    )
    return merge_overrides(
        config, "stiffen",
        theta=args.theta,
        sigma_floor=getattr(args, "sigma0", None),
        relative_stagnation=stagnation,
        max_outer_iterations=max_outer,
        density=args.density,
    )


def _print_outcome(command: str, outcome: RunOutcome):
    for report in outcome.reports:
        status = "converged" if report.converged else "budget exhausted"
        line = (f"{report.phase}: {len(report.records)} outer / "
                f"{report.total_inner_iterations} inner iterations, {status}")
        if report.message:
            line += f" ({report.message})"
        print(line)
    stats = outcome.stats
    if command == "quality" and stats is not None:
        print(f"elements={stats.element_count} inverted={stats.inverted_count} "
              f"max_condition={stats.max_condition:.17g} min_det={stats.d_min:.17g}")
        if stats.inverted_count:
            print(f"warning: {stats.inverted_count} inverted elements (d_min < 0); gamma is undefined")
    print(outcome.summary.format_line())


def _run_phase(ctrl: MappingController, args: argparse.Namespace, run) -> RunOutcome:
    problem = ctrl.load_problem(args.mesh, args.init, args.constraints)
    outcome = run(problem)
    ctrl.store(problem, outcome, args.out, args.report)
    return outcome


def cmd_untangle(ctrl: MappingController, args: argparse.Namespace) -> RunOutcome:
    return _run_phase(ctrl, args, ctrl.run_untangle)


def cmd_stiffen(ctrl: MappingController, args: argparse.Namespace) -> RunOutcome:
    return _run_phase(ctrl, args, ctrl.run_stiffen)


def cmd_pipeline(ctrl: MappingController, args: argparse.Namespace) -> RunOutcome:
    """Untangle, then stiffen unless untangling ended infeasible."""
    return _run_phase(ctrl, args, ctrl.run_pipeline)


def cmd_quality(ctrl: MappingController, args: argparse.Namespace) -> RunOutcome:
    problem = ctrl.load_problem(args.mesh, init_path=args.state)
    outcome = ctrl.run_quality(problem)
    ctrl.store_quality(outcome, args.report)
    return outcome


HANDLERS = {
    "untangle": cmd_untangle,
    "stiffen": cmd_stiffen,
    "pipeline": cmd_pipeline,
    "quality": cmd_quality,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # usage errors map to 1; 2 means budget exhaustion
        return EXIT_INPUT_ERROR if e.code else 0
    if args.command not in COMMANDS:
        parser.print_help()
        return EXIT_INPUT_ERROR

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )

    try:
        ctrl = MappingController(load_config(args), RunAuditLogger(args.log))
        outcome = HANDLERS[args.command](ctrl, args)
    except (StiffmapError, OSError, ImportError, yaml.YAMLError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    _print_outcome(args.command, outcome)
    return outcome.exit_code
