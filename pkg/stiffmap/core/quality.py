"""Per-element distortion diagnostics and certified quasi-isometry bounds."""
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .errors import CertificationError
from .linalg import determinant
from .mesh import DeformationState, SimplicialMesh, jacobians

if TYPE_CHECKING:
    from .density import BaseDensity

logger = logging.getLogger(__name__)

HISTOGRAM_EDGES = 2.0 ** np.arange(-10, 11)


@dataclass
class QualityStats:
    sigma_max: np.ndarray
    sigma_min: np.ndarray
    condition: np.ndarray
    det: np.ndarray
    f_max: float
    d_min: float
    max_condition: float
    measured_gamma: Optional[float]
    bin_edges: np.ndarray = field(default_factory=lambda: HISTOGRAM_EDGES.copy())
    condition_counts: Optional[np.ndarray] = None
    det_counts: Optional[np.ndarray] = None

    @property
    def element_count(self) -> int:
        return len(self.det)

    @property
    def inverted_count(self) -> int:
        return int(np.count_nonzero(self.det <= 0))


def singular_values(J: np.ndarray) -> np.ndarray:
    """Singular values in descending order, for one matrix or a stack of them.

    Taken as square roots of the eigenvalues of JᵀJ.
    """
    J = np.asarray(J, dtype=float)
    gram = np.swapaxes(J, -1, -2) @ J
    eig = np.linalg.eigvalsh(gram)
    return np.sqrt(np.clip(eig, 0.0, None))[..., ::-1]


def log2_histogram(values: np.ndarray, edges: np.ndarray = HISTOGRAM_EDGES) -> np.ndarray:
    """Counts per log2 bin; values outside the edges (and non-positive ones) land in the end bins."""
    clipped = np.where(values > 0, values, edges[0])
    clipped = np.clip(clipped, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    return counts


def compute_quality(mesh: SimplicialMesh, state: DeformationState,
                    density: 'BaseDensity') -> QualityStats:
    state.check(mesh)
    J = jacobians(mesh, state.coords)
    sigma = singular_values(J)
    det = determinant(J)
    sigma_max = sigma[:, 0]
    sigma_min = sigma[:, -1]
    with np.errstate(divide="ignore"):
        condition = np.where(sigma_min > 0, sigma_max / np.where(sigma_min > 0, sigma_min, 1.0), np.inf)
    values = density.terms(J)
    f_max = float(np.max(values.value[values.finite])) if np.any(values.finite) else math.inf

    stats = QualityStats(
        sigma_max=sigma_max,
        sigma_min=sigma_min,
        condition=condition,
        det=det,
        f_max=f_max,
        d_min=float(np.min(det)),
        max_condition=float(np.max(condition)),
        measured_gamma=None,
    )
    stats.condition_counts = log2_histogram(condition, stats.bin_edges)
    stats.det_counts = log2_histogram(det, stats.bin_edges)
    if stats.inverted_count == 0:
        stats.measured_gamma = measured_gamma(stats)
    else:
        logger.warning("%d inverted elements; measured gamma is undefined", stats.inverted_count)
    return stats


def measured_gamma(stats: QualityStats) -> float:
    """Best-scaling quasi-isometry estimate sqrt(max sigma_1 / min sigma_d).

    Raises:
        CertificationError: an element is inverted or flat
    """
    if np.any(stats.det <= 0):
        raise CertificationError("Measured gamma is undefined for a map with inverted elements")
    return math.sqrt(float(np.max(stats.sigma_max)) / float(np.min(stats.sigma_min)))


def gamma_bound_mixed(t: float, theta: float, d: int) -> float:
    """Upper bound on gamma for maps whose mixed density stays below 1/t.

    Raises:
        CertificationError: theta is 0 or 1, or t is outside (0, 1)
    """
    if not 0.0 < t < 1.0:
        raise CertificationError(f"The bound needs 0 < t < 1, got t={t}")
    if not 0.0 < theta < 1.0:
        raise CertificationError(f"The mixed-density bound degenerates for theta={theta}")
    c1 = ((1.0 - t * theta) / (t * (1.0 - theta))) ** (d / 2.0)
    c2 = 1.0 + (1.0 - t) / (t * theta)
    shape = (c1 + math.sqrt(max(c1 * c1 - 1.0, 0.0))) ** ((d - 1.0) / d)
    volume = (c2 + math.sqrt(max(c2 * c2 - 1.0, 0.0))) ** (1.0 / d)
    return shape * volume


def gamma_bound_sd(t: float, d: int) -> float:
    if not 0.0 < t < 1.0:
        raise CertificationError(f"The bound needs 0 < t < 1, got t={t}")
    c3 = 1.0 + d * (1.0 - t) / t
    return c3 + math.sqrt(c3 * c3 - 1.0)
