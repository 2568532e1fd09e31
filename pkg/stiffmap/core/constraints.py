"""Affine equality constraints on vertex coordinates.

Coordinates are addressed in vertex-major order: entry v*dim + axis of the
flat coordinate vector. A Reduction parameterizes the solution set as
full = M @ free + c.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr

from .errors import ConstraintError
from .mesh import DeformationState, SimplicialMesh

logger = logging.getLogger(__name__)

RELATIVE_PIVOT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class AffineRow:
    """sum(coef * x[index]) == rhs over the flat coordinate vector."""
    terms: Tuple[Tuple[int, float], ...]
    rhs: float = 0.0
    label: str = ""

    @classmethod
    def from_vertex_terms(cls, terms: Iterable[Tuple[int, int, float]], rhs: float,
                          dim: int, label: str = "") -> 'AffineRow':
        merged: Dict[int, float] = {}
        for vertex, axis, coef in terms:
            if not 0 <= axis < dim:
                raise ConstraintError(f"Axis {axis} is out of range for {dim}D coordinates")
            key = vertex * dim + axis
            merged[key] = merged.get(key, 0.0) + float(coef)
        return cls(terms=tuple(sorted(merged.items())), rhs=float(rhs), label=label)

    def residual(self, full: np.ndarray) -> float:
        return sum(coef * full[i] for i, coef in self.terms) - self.rhs

    def describe(self, position: int) -> str:
        return f"row {position}" + (f" ({self.label})" if self.label else "")


@dataclass
class ConstraintSet:
    dim: int
    locked: List[Tuple[int, np.ndarray]] = field(default_factory=list)
    affine_rows: List[AffineRow] = field(default_factory=list)

    def lock(self, vertex: int, position: Sequence[float], label: str = ""):
        position = np.asarray(position, dtype=float)
        if position.shape != (self.dim,):
            raise ConstraintError(
                f"Locked position for vertex {vertex} needs {self.dim} coordinates, got {position.size}"
            )
        self.locked.append((vertex, position))

    def add_rows(self, rows: Iterable[AffineRow]):
        self.affine_rows.extend(rows)

    def rows(self) -> List[AffineRow]:
        """Locks first, as one-term rows, then the affine rows in insertion order."""
        rows = []
        for vertex, position in self.locked:
            for axis in range(self.dim):
                rows.append(AffineRow(((vertex * self.dim + axis, 1.0),), float(position[axis]),
                                      label=f"lock {vertex}"))
        return rows + list(self.affine_rows)

    def is_empty(self) -> bool:
        return not self.locked and not self.affine_rows

    def max_residual(self, full: np.ndarray) -> float:
        return max((abs(row.residual(full)) for row in self.rows()), default=0.0)


@dataclass(frozen=True)
class Reduction:
    matrix: sp.csr_matrix      # (full_size, free_count)
    offset: np.ndarray         # (full_size,)
    dim: int
    free_columns: np.ndarray   # coordinate carried by each free variable
    is_identity: bool = False

    @property
    def full_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def free_count(self) -> int:
        return self.matrix.shape[1]

    def expand(self, free: np.ndarray) -> np.ndarray:
        return self.matrix @ free + self.offset

    def expand_coords(self, free: np.ndarray) -> np.ndarray:
        return self.expand(free).reshape(-1, self.dim)

    def free_gradient(self, full_gradient: np.ndarray) -> np.ndarray:
        return self.matrix.T @ full_gradient

    def project(self, full: np.ndarray) -> np.ndarray:
        """Free variables whose expansion is closest to full in the least-squares sense."""
        full = np.asarray(full, dtype=float)
        if self.is_identity:
            return full.copy()
        if self.free_count == 0:
            return np.zeros(0)
        solution = lsqr(self.matrix, full - self.offset, atol=1e-14, btol=1e-14,
                        iter_lim=10 * self.free_count + 100, x0=full[self.free_columns])
        return solution[0]

    def state(self, free: np.ndarray) -> DeformationState:
        return DeformationState(self.expand_coords(free))


def build_reduction(constraints: Optional[ConstraintSet], vertex_count: int, dim: int) -> Reduction:
    """Parameterize the affine solution set of the constraint rows.

    Gauss-Jordan elimination with partial pivoting over the coordinates the
    rows touch. Rows are added in order; a row that reduces to zero is a
    duplicate (dropped) when its right-hand side also vanishes and a conflict
    otherwise.

    Raises:
        ConstraintError: a row contradicts the rows before it, or references
            a coordinate outside the mesh
    """
    full_size = vertex_count * dim
    rows = constraints.rows() if constraints is not None else []
    if constraints is not None and constraints.dim != dim:
        raise ConstraintError(f"Constraints are {constraints.dim}D but the map is {dim}D")
    if not rows:
        return Reduction(sp.identity(full_size, format="csr"), np.zeros(full_size), dim,
                         free_columns=np.arange(full_size), is_identity=True)

    columns = sorted({i for row in rows for i, _ in row.terms})
    if columns[0] < 0 or columns[-1] >= full_size:
        bad = next(p for p, row in enumerate(rows)
                   if any(not 0 <= i < full_size for i, _ in row.terms))
        raise ConstraintError(f"Constraint {rows[bad].describe(bad)} references a vertex outside the mesh", row=bad)
    local = {c: j for j, c in enumerate(columns)}
    A = np.zeros((len(rows), len(columns)))
    b = np.zeros(len(rows))
    for p, row in enumerate(rows):
        for i, coef in row.terms:
            A[p, local[i]] += coef
        b[p] = row.rhs
    tol = RELATIVE_PIVOT_TOLERANCE * max(1.0, float(np.max(np.abs(A))))
    rhs_tol = RELATIVE_PIVOT_TOLERANCE * max(1.0, float(np.max(np.abs(A))), float(np.max(np.abs(b))))

    basis: List[np.ndarray] = []   # reduced rows, each [coefficients | rhs]
    pivots: List[int] = []
    merged = 0
    for p in range(len(rows)):
        r = np.append(A[p], b[p])
        for q, pivot in enumerate(pivots):
            if r[pivot] != 0.0:
                r -= r[pivot] * basis[q]
        candidate = int(np.argmax(np.abs(r[:-1])))
        if abs(r[candidate]) <= tol:
            if abs(r[-1]) > rhs_tol:
                raise ConstraintError(
                    f"Constraint {rows[p].describe(p)} conflicts with the rows before it "
                    f"(residual {r[-1]:.3e})", row=p)
            merged += 1
            continue
        r /= r[candidate]
        r[np.abs(r) <= tol * 1e-6] = 0.0
        for q in range(len(basis)):
            if basis[q][candidate] != 0.0:
                basis[q] -= basis[q][candidate] * r
        basis.append(r)
        pivots.append(candidate)
    if merged:
        logger.debug("Merged %d redundant constraint rows", merged)

    pivot_columns = {columns[j]: q for q, j in enumerate(pivots)}
    free_columns = [c for c in range(full_size) if c not in pivot_columns]
    free_index = {c: k for k, c in enumerate(free_columns)}

    data, row_idx, col_idx = [], [], []
    offset = np.zeros(full_size)
    for c in free_columns:
        row_idx.append(c)
        col_idx.append(free_index[c])
        data.append(1.0)
    for c, q in pivot_columns.items():
        r = basis[q]
        offset[c] = r[-1]
        for j in np.flatnonzero(r[:-1]):
            other = columns[j]
            if other == c:
                continue
            row_idx.append(c)
            col_idx.append(free_index[other])
            data.append(-r[j])
    matrix = sp.csr_matrix((data, (row_idx, col_idx)), shape=(full_size, len(free_columns)))
    logger.debug("Reduction: %d coordinates, %d free", full_size, len(free_columns))
    return Reduction(matrix, offset, dim, free_columns=np.asarray(free_columns, dtype=np.int64))


def _rotation(angle: float, scale: float = 1.0) -> Tuple[float, float]:
    return scale * math.cos(angle), scale * math.sin(angle)


def _similarity_rows(src: int, dst: int, center: Optional[int], a: float, b: float,
                     rhs: Tuple[float, float], label: str) -> List[AffineRow]:
    """Rows for x_dst - x_center = [[a, -b], [b, a]] (x_src - x_center) + rhs."""
    terms_x = [(dst, 0, 1.0), (src, 0, -a), (src, 1, b)]
    terms_y = [(dst, 1, 1.0), (src, 0, -b), (src, 1, -a)]
    if center is not None:
        terms_x += [(center, 0, a - 1.0), (center, 1, -b)]
        terms_y += [(center, 0, b), (center, 1, a - 1.0)]
    return [
        AffineRow.from_vertex_terms(terms_x, rhs[0], 2, label),
        AffineRow.from_vertex_terms(terms_y, rhs[1], 2, label),
    ]


def one_ring(mesh: SimplicialMesh, vertex: int) -> Tuple[List[int], bool]:
    """Neighbours of a vertex in rotation order and whether the ring closes.

    Raises:
        ConstraintError: the triangles around the vertex do not form a single
            consistently oriented fan
    """
    if mesh.dim != 2:
        raise ConstraintError("One rings are only defined on triangle meshes")
    successor: Dict[int, int] = {}
    for tri in mesh.simplices:
        tri = [int(i) for i in tri]
        if vertex not in tri:
            continue
        k = tri.index(vertex)
        a, b = tri[(k + 1) % 3], tri[(k + 2) % 3]
        if a in successor:
            raise ConstraintError(f"One ring of vertex {vertex} is not a manifold fan")
        successor[a] = b
    if not successor:
        raise ConstraintError(f"Vertex {vertex} belongs to no triangle")
    starts = set(successor) - set(successor.values())
    if len(starts) > 1:
        raise ConstraintError(f"One ring of vertex {vertex} is split into several fans")
    closed = not starts
    current = next(iter(starts)) if starts else min(successor)
    ring = [current]
    seen = {current}
    while current in successor:
        current = successor[current]
        if current in seen:
            break
        seen.add(current)
        ring.append(current)
    if len(ring) != len(successor) + (0 if closed else 1):
        raise ConstraintError(f"One ring of vertex {vertex} is not a single fan")
    return ring, closed


def index_preservation_constraints(mesh: SimplicialMesh, state: Optional[DeformationState],
                                   singular_vertex: int, index_value: Union[Fraction, float],
                                   open_ring: bool = False) -> List[AffineRow]:
    """Rows fixing the similarity that maps each ring neighbour of a vertex to the next.

    The reference one ring is flattened (corner angles rescaled to sum to
    2*pi, edge lengths kept) and every turning angle is multiplied by
    1 - index_value. The rows are homogeneous, so the ring keeps a free
    overall scale and rotation.

    A vertex on a cut of a global parameterization (open_ring=True) has an
    open fan; its corner angles are used unscaled and only the interior
    neighbour pairs produce rows.

    Raises:
        ConstraintError: open ring without open_ring, zero-area ring, or a
            map that is not planar
    """
    if state is not None and state.dim != 2:
        raise ConstraintError("Index preservation needs a planar map")
    ring, closed = one_ring(mesh, singular_vertex)
    if not closed and not open_ring:
        raise ConstraintError(f"Vertex {singular_vertex} has an open one ring (boundary vertex)")

    ref = mesh.ref_vertices
    spokes = [ref[u] - ref[singular_vertex] for u in ring]
    lengths = [float(np.linalg.norm(s)) for s in spokes]
    if min(lengths) <= 1e-14 * mesh.scale:
        raise ConstraintError(f"One ring of vertex {singular_vertex} has a zero-length edge")
    n = len(ring)
    pairs = [(i, (i + 1) % n) for i in range(n if closed else n - 1)]
    angles = []
    for i, j in pairs:
        u, w = spokes[i], spokes[j]
        if len(u) == 2:
            sin = abs(float(u[0] * w[1] - u[1] * w[0]))
        else:
            sin = float(np.linalg.norm(np.cross(u, w)))
        angles.append(math.atan2(sin, float(np.dot(u, w))))
    total = sum(angles)
    if total <= 1e-12:
        raise ConstraintError(f"One ring of vertex {singular_vertex} has zero area")

    flatten = 2.0 * math.pi / total if closed else 1.0
    turning = 1.0 - float(index_value)
    if closed and abs(turning - round(turning)) > 1e-12:
        logger.warning(
            "Closed ring at vertex %d with fractional index %s only admits a collapsed ring; "
            "mark the vertex as open if it lies on a cut", singular_vertex, index_value)

    rows = []
    label = f"singularity {singular_vertex}"
    for (i, j), angle in zip(pairs, angles):
        a, b = _rotation(angle * flatten * turning, lengths[j] / lengths[i])
        rows.extend(_similarity_rows(ring[i], ring[j], singular_vertex, a, b, (0.0, 0.0), label))
    return rows


def transition_rows(pairs: Sequence[Tuple[int, int]], quarter_turns: int,
                    translation: Optional[Sequence[float]] = None, dim: int = 2,
                    label: str = "transition") -> List[AffineRow]:
    """Grid-preserving transition x_b = R(k*pi/2) x_a + T across a cut.

    Without a translation only the rotation is imposed, on differences
    relative to the first pair.
    """
    if dim != 2:
        raise ConstraintError("Transition functions are defined for planar maps")
    if not pairs:
        return []
    k = quarter_turns % 4
    cos, sin = [(1, 0), (0, 1), (-1, 0), (0, -1)][k]
    rows = []
    if translation is not None:
        tx, ty = (float(v) for v in translation)
        for a, b in pairs:
            rows.extend(_similarity_rows(a, b, None, cos, sin, (tx, ty), label))
        return rows
    a0, b0 = pairs[0]
    for a, b in pairs[1:]:
        terms_x = [(b, 0, 1.0), (b0, 0, -1.0), (a, 0, -cos), (a0, 0, cos), (a, 1, sin), (a0, 1, -sin)]
        terms_y = [(b, 1, 1.0), (b0, 1, -1.0), (a, 0, -sin), (a0, 0, sin), (a, 1, -cos), (a0, 1, cos)]
        rows.append(AffineRow.from_vertex_terms(terms_x, 0.0, 2, label))
        rows.append(AffineRow.from_vertex_terms(terms_y, 0.0, 2, label))
    return rows
