from dataclasses import dataclass, field
from typing import List, Optional


@dataclass
class IterationRecord:
    """One outer continuation step.

    param is eps^k (untangle) or t^k (stiffen); objective is the value after
    the inner solve, still at param.
    """
    iteration: int
    param: float
    objective: float
    f_max: float
    d_min: float
    inner_iterations: int
    sigma: Optional[float] = None
    objective_next: Optional[float] = None  # W(X^{k+1}, t^{k+1})
    param_next: Optional[float] = None


@dataclass
class ContinuationReport:
    phase: str                          # "untangle" | "stiffen"
    records: List[IterationRecord] = field(default_factory=list)
    converged: bool = False             # stagnation test met before the budget ran out
    feasible: bool = False              # final state lies in the phase's feasible set
    terminal_param: Optional[float] = None
    message: str = ""

    @property
    def budget_exhausted(self) -> bool:
        return not self.converged

    @property
    def total_inner_iterations(self) -> int:
        return sum(r.inner_iterations for r in self.records)


def _fmt(value: Optional[float], missing: str) -> str:
    return missing if value is None else f"{value:.17g}"


@dataclass
class RunSummary:
    """Terminal numbers printed as the last stdout line and stored in reports."""
    gamma: Optional[float] = None
    gamma_bound: Optional[float] = None
    t: Optional[float] = None
    f_max: Optional[float] = None
    d_min: Optional[float] = None

    def format_line(self, missing: str = "n/a") -> str:
        return " ".join(
            f"{name}={_fmt(getattr(self, name), missing)}"
            for name in ("gamma", "gamma_bound", "t", "f_max", "d_min")
        )
