from dataclasses import dataclass, field
from typing import Dict


@dataclass
class SolverConfig:
    """Inner L-BFGS minimization settings."""
    max_inner_iterations: int = 500
    gradient_tolerance: float = 1e-6   # relative to the initial gradient norm
    history_size: int = 10
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 50
    curvature_floor: float = 1e-12     # pairs with yᵀs at or below this are skipped

    def __post_init__(self):
        if self.max_inner_iterations <= 0 or self.history_size <= 0 or self.max_backtracks <= 0:
            raise ValueError("SolverConfig iteration counts must be positive")
        if self.gradient_tolerance <= 0:
            raise ValueError("SolverConfig.gradient_tolerance must be positive")
        if not 0.0 < self.armijo_c1 <= 0.5:
            raise ValueError(f"SolverConfig.armijo_c1 must lie in (0, 1/2], got {self.armijo_c1}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError(f"SolverConfig.backtrack_factor must lie in (0, 1), got {self.backtrack_factor}")


@dataclass
class UntangleConfig:
    theta: float = 0.5
    epsilon_floor: float = 1e-9
    schedule_coefficient: float = 0.04
    relative_stagnation: float = 1e-3
    max_outer_iterations: int = 200
    initial_det_fraction: float = 1e-2  # eps0 is at least this fraction of mean |det J|

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"UntangleConfig.theta must lie in [0, 1], got {self.theta}")
        if self.epsilon_floor <= 0:
            raise ValueError("UntangleConfig.epsilon_floor must be positive")
        if self.schedule_coefficient <= 0:
            raise ValueError("UntangleConfig.schedule_coefficient must be positive")
        if not 0.0 < self.relative_stagnation < 1.0:
            raise ValueError("UntangleConfig.relative_stagnation must lie in (0, 1)")
        if self.max_outer_iterations <= 0:
            raise ValueError("UntangleConfig.max_outer_iterations must be positive")
        if self.initial_det_fraction < 0:
            raise ValueError("UntangleConfig.initial_det_fraction must be non-negative")


@dataclass
class StiffenConfig:
    theta: float = 0.5
    sigma_floor: float = 0.1
    relative_stagnation: float = 1e-3
    max_outer_iterations: int = 200
    density: str = "mixed"
    feasibility_margin: float = 1e-12  # f_max * t_next must stay below 1 - margin

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"StiffenConfig.theta must lie in [0, 1], got {self.theta}")
        if not 0.0 < self.sigma_floor < 1.0:
            raise ValueError(f"StiffenConfig.sigma_floor must lie in (0, 1), got {self.sigma_floor}")
        if not 0.0 < self.relative_stagnation < 1.0:
            raise ValueError("StiffenConfig.relative_stagnation must lie in (0, 1)")
        if self.max_outer_iterations <= 0:
            raise ValueError("StiffenConfig.max_outer_iterations must be positive")


@dataclass
class RunConfig:
    """Everything a command needs, assembled from an optional YAML file and CLI flags."""
    solver: SolverConfig = field(default_factory=SolverConfig)
    untangle: UntangleConfig = field(default_factory=UntangleConfig)
    stiffen: StiffenConfig = field(default_factory=StiffenConfig)
    densities: Dict[str, str] = field(default_factory=dict)  # name -> 'module.ClassName'
