import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MeshError
from .linalg import determinant

logger = logging.getLogger(__name__)

# Reference elements smaller than this fraction of scale**d are rejected.
DEGENERATE_VOLUME_RATIO = 1e-14


@dataclass(frozen=True)
class ElementGeometry:
    """Per-simplex data of the piecewise-affine map, fixed by the rest shape."""
    inv_edge_matrix: np.ndarray  # (m, d, d)
    ref_volume: np.ndarray       # (m,), positive

    @property
    def total_volume(self) -> float:
        return float(np.sum(self.ref_volume))


@dataclass(frozen=True)
class DeformationState:
    """Target coordinates of every vertex; the optimization variable."""
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] not in (2, 3):
            raise MeshError(f"Deformation coordinates must be an (n, 2) or (n, 3) array, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise MeshError("Deformation coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def vertex_count(self) -> int:
        return self.coords.shape[0]

    def flat(self) -> np.ndarray:
        """Vertex-major flat copy: x0, y0, [z0,] x1, y1, ..."""
        return self.coords.reshape(-1).copy()

    @classmethod
    def from_flat(cls, values: np.ndarray, dim: int) -> 'DeformationState':
        return cls(np.asarray(values, dtype=float).reshape(-1, dim))

    @classmethod
    def identity(cls, mesh: 'SimplicialMesh') -> 'DeformationState':
        if mesh.is_surface:
            raise MeshError(
                "A surface mesh has no identity deformation in the plane; provide an initial state"
            )
        return cls(mesh.ref_vertices)

    def check(self, mesh: 'SimplicialMesh') -> 'DeformationState':
        if self.vertex_count != mesh.vertex_count:
            raise MeshError(
                f"State has {self.vertex_count} vertices but the mesh has {mesh.vertex_count}"
            )
        if self.dim != mesh.dim:
            raise MeshError(f"State is {self.dim}D but the mesh maps into {mesh.dim}D")
        return self


def signed_volume(points: Sequence[Sequence[float]]) -> float:
    """Signed volume of a simplex given by d+1 points in R^d."""
    p = np.asarray(points, dtype=float)
    d = p.shape[1]
    if p.shape[0] != d + 1:
        raise ValueError(f"A {d}D simplex needs {d + 1} points, got {p.shape[0]}")
    edges = (p[1:] - p[0]).T
    return float(determinant(edges[None])[0]) / math.factorial(d)


def edge_matrices(coords: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Edge matrices with columns p_i - p_0, shape (m, coord_dim, d)."""
    corners = coords[simplices]
    return np.swapaxes(corners[:, 1:, :] - corners[:, :1, :], 1, 2)


def _local_frames(coords: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Edge matrices of 3D triangles expressed in their own orthonormal plane frame."""
    p0, p1, p2 = (coords[simplices[:, i]] for i in range(3))
    a = p1 - p0
    b = p2 - p0
    length = np.linalg.norm(a, axis=1)
    normal = np.cross(a, b)
    normal_len = np.linalg.norm(normal, axis=1)
    safe_len = np.where(length > 0, length, 1.0)
    safe_normal = np.where(normal_len > 0, normal_len, 1.0)
    e1 = a / safe_len[:, None]
    e2 = np.cross(normal / safe_normal[:, None], e1)
    E = np.zeros((len(simplices), 2, 2))
    E[:, 0, 0] = length
    E[:, 0, 1] = np.einsum("ij,ij->i", b, e1)
    E[:, 1, 1] = np.einsum("ij,ij->i", b, e2)
    return E


class SimplicialMesh:
    """Triangle or tetrahedral mesh with its reference (parametric) geometry.

    A triangle mesh whose reference coordinates are 3D is a surface to
    flatten: every triangle gets its own 2D orthonormal frame and the map is
    computed with 2x2 Jacobians.
    """

    def __init__(self, ref_vertices, simplices):
        ref = np.array(ref_vertices, dtype=float)
        simp = np.array(simplices, dtype=np.int64)
        if ref.ndim != 2 or ref.shape[1] not in (2, 3):
            raise MeshError(f"Reference vertices must be an (n, 2) or (n, 3) array, got shape {ref.shape}")
        if not np.all(np.isfinite(ref)):
            raise MeshError("Reference vertices must be finite")
        if simp.ndim != 2 or simp.shape[1] not in (3, 4):
            raise MeshError(f"Simplices must be triangles or tetrahedra, got shape {simp.shape}")
        if len(simp) == 0:
            raise MeshError("Mesh has no simplices")

        dim = simp.shape[1] - 1
        if ref.shape[1] < dim:
            raise MeshError(f"Tetrahedra need 3D reference coordinates, got {ref.shape[1]}D")
        n = len(ref)
        bad = np.flatnonzero(np.any((simp < 0) | (simp >= n), axis=1))
        if len(bad):
            raise MeshError(f"Simplex {bad[0]} references a vertex outside [0, {n})")
        ordered = np.sort(simp, axis=1)
        repeated = np.flatnonzero(np.any(ordered[:, 1:] == ordered[:, :-1], axis=1))
        if len(repeated):
            raise MeshError(f"Simplex {repeated[0]} repeats a vertex index")

        self.dim = dim
        self.is_surface = ref.shape[1] == 3 and dim == 2
        extent = np.ptp(ref, axis=0).max() if n else 0.0
        self.scale = float(extent) if extent > 0 else 1.0

        if self.is_surface:
            E = _local_frames(ref, simp)
        else:
            E = edge_matrices(ref, simp)
            flipped = determinant(E) < 0
            if np.any(flipped):
                logger.info("Reoriented %d reference simplices with negative volume", int(flipped.sum()))
                swap = list(range(dim + 1))
                swap[-2], swap[-1] = swap[-1], swap[-2]
                simp[flipped] = simp[flipped][:, swap]
                E = edge_matrices(ref, simp)

        volume = determinant(E) / math.factorial(dim)
        threshold = DEGENERATE_VOLUME_RATIO * self.scale ** dim
        degenerate = np.flatnonzero(np.abs(volume) < threshold)
        if len(degenerate):
            raise MeshError(
                f"Reference simplex {degenerate[0]} is degenerate (volume {volume[degenerate[0]]:.3e})"
            )

        ref.setflags(write=False)
        simp.setflags(write=False)
        self.ref_vertices = ref
        self.simplices = simp
        inv = np.linalg.inv(E)
        inv.setflags(write=False)
        volume.setflags(write=False)
        self.geometry = ElementGeometry(inv_edge_matrix=inv, ref_volume=volume)

    @property
    def vertex_count(self) -> int:
        return len(self.ref_vertices)

    @property
    def simplex_count(self) -> int:
        return len(self.simplices)

    def __repr__(self) -> str:
        kind = "surface" if self.is_surface else f"{self.dim}D"
        return f"SimplicialMesh({kind}, vertices={self.vertex_count}, simplices={self.simplex_count})"


def jacobians(mesh: SimplicialMesh, coords: np.ndarray) -> np.ndarray:
    """All element Jacobians J_k = E_k B_k for target coordinates (n, d)."""
    return edge_matrices(np.asarray(coords, dtype=float), mesh.simplices) @ mesh.geometry.inv_edge_matrix


def jacobian(mesh: SimplicialMesh, state: DeformationState, k: int) -> np.ndarray:
    if not 0 <= k < mesh.simplex_count:
        raise IndexError(f"Simplex index {k} out of range [0, {mesh.simplex_count})")
    E = edge_matrices(state.coords, mesh.simplices[k:k + 1])
    return (E @ mesh.geometry.inv_edge_matrix[k:k + 1])[0]


def min_det_ratio(mesh: SimplicialMesh, state: DeformationState) -> float:
    """Smallest det J_k; positive iff no element is inverted or flat."""
    state.check(mesh)
    return float(np.min(determinant(jacobians(mesh, state.coords))))
