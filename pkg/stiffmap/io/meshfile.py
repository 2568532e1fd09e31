"""MEDIT (.mesh) and Wavefront OBJ readers and writers.

MEDIT carries triangles or tetrahedra with 1-based indices; the deformed
map is stored as the vertex positions. OBJ carries triangles; the planar
map is stored as texture coordinates next to the reference positions.
"""
import logging
import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Tuple

import numpy as np

from ..core.errors import MeshError, ParseError
from ..core.mesh import DeformationState, SimplicialMesh
from .atomic import atomic_write, format_float

logger = logging.getLogger(__name__)

# OBJ records that carry nothing a simplicial map needs.
OBJ_PASSIVE_TAGS = frozenset({"vn", "vp", "l", "o", "g", "s", "usemtl", "mtllib"})
_OBJ_COUNTS = re.compile(r"^#\s*(\d+) vertices (\d+) faces\s*$")


class MeshFormat(str, Enum):
    MEDIT = "medit"
    OBJ = "obj"


@dataclass
class MeshFile:
    mesh: SimplicialMesh
    initial_state: Optional[DeformationState] = None
    format: MeshFormat = MeshFormat.MEDIT


def detect_format(path: str) -> MeshFormat:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".mesh":
        return MeshFormat.MEDIT
    if ext == ".obj":
        return MeshFormat.OBJ
    raise MeshError(f"Cannot infer mesh format from '{path}'; use a .mesh or .obj extension")


class _Tokens:
    """Whitespace tokens of a MEDIT file with their line numbers."""

    def __init__(self, text: str, path: Optional[str]):
        self.path = path
        self._items: List[Tuple[str, int]] = []
        for lineno, line in enumerate(text.splitlines(), 1):
            for token in line.split('#', 1)[0].split():
                self._items.append((token, lineno))
        self._pos = 0

    def exhausted(self) -> bool:
        return self._pos >= len(self._items)

    def line(self) -> Optional[int]:
        if self._pos < len(self._items):
            return self._items[self._pos][1]
        return self._items[-1][1] if self._items else None

    def next(self, section: str) -> Tuple[str, int]:
        if self.exhausted():
            raise ParseError(f"file ended inside section '{section}'", self.path, self.line())
        item = self._items[self._pos]
        self._pos += 1
        return item

    def integer(self, section: str) -> int:
        token, lineno = self.next(section)
        try:
            return int(token)
        except ValueError:
            raise ParseError(f"expected an integer in section '{section}', got '{token}'", self.path, lineno)

    def real(self, section: str) -> float:
        token, lineno = self.next(section)
        try:
            value = float(token)
        except ValueError:
            raise ParseError(f"expected a number in section '{section}', got '{token}'", self.path, lineno)
        if not np.isfinite(value):
            raise ParseError(f"non-finite value in section '{section}'", self.path, lineno)
        return value


def _read_elements(tokens: _Tokens, section: str, width: int, vertex_count: Optional[int]) -> np.ndarray:
    count = tokens.integer(section)
    if count < 0:
        raise ParseError(f"negative count in section '{section}'", tokens.path, tokens.line())
    if vertex_count is None:
        raise ParseError(f"section '{section}' appears before 'Vertices'", tokens.path, tokens.line())
    out = np.empty((count, width), dtype=np.int64)
    for k in range(count):
        for j in range(width):
            lineno = tokens.line()
            index = tokens.integer(section)
            if not 1 <= index <= vertex_count:
                raise ParseError(f"vertex index {index} out of range [1, {vertex_count}] in '{section}'",
                                 tokens.path, lineno)
            out[k, j] = index - 1
        tokens.integer(section)  # reference tag
    return out


def _parse_medit(text: str, path: Optional[str]) -> Tuple[np.ndarray, np.ndarray]:
    tokens = _Tokens(text, path)
    token, lineno = tokens.next("MeshVersionFormatted")
    if token != "MeshVersionFormatted":
        raise ParseError(f"expected 'MeshVersionFormatted', got '{token}'", path, lineno)
    tokens.integer("MeshVersionFormatted")
    token, lineno = tokens.next("Dimension")
    if token != "Dimension":
        raise ParseError(f"expected 'Dimension', got '{token}'", path, lineno)
    dim = tokens.integer("Dimension")
    if dim not in (2, 3):
        raise ParseError(f"unsupported dimension {dim}", path, lineno)

    vertices: Optional[np.ndarray] = None
    elements = {}
    while True:
        keyword, lineno = tokens.next("End")
        if keyword == "End":
            break
        if keyword == "Vertices":
            if vertices is not None:
                raise ParseError("duplicate section 'Vertices'", path, lineno)
            count = tokens.integer(keyword)
            if count < 0:
                raise ParseError("negative count in section 'Vertices'", path, lineno)
            vertices = np.empty((count, dim))
            for k in range(count):
                for j in range(dim):
                    vertices[k, j] = tokens.real(keyword)
                tokens.integer(keyword)
        elif keyword in ("Triangles", "Tetrahedra"):
            if keyword in elements:
                raise ParseError(f"duplicate section '{keyword}'", path, lineno)
            width = 3 if keyword == "Triangles" else 4
            elements[keyword] = _read_elements(tokens, keyword, width,
                                               None if vertices is None else len(vertices))
        else:
            raise ParseError(f"unsupported section '{keyword}'", path, lineno)
    if not tokens.exhausted():
        raise ParseError("unexpected data after 'End'", path, tokens.line())
    if vertices is None:
        raise ParseError("missing section 'Vertices'", path)
    if len(elements) != 1:
        if not elements:
            raise ParseError("no 'Triangles' or 'Tetrahedra' section", path)
        raise ParseError("mixed element types: both 'Triangles' and 'Tetrahedra' present", path)
    (keyword, simplices), = elements.items()
    if keyword == "Tetrahedra" and dim != 3:
        raise ParseError("'Tetrahedra' need Dimension 3", path)
    return vertices, simplices


def read_medit(text: str, path: Optional[str] = None) -> MeshFile:
    vertices, simplices = _parse_medit(text, path)
    return MeshFile(mesh=SimplicialMesh(vertices, simplices), format=MeshFormat.MEDIT)


def _obj_index(token: str, count: int, path: Optional[str], lineno: int) -> int:
    try:
        index = int(token)
    except ValueError:
        raise ParseError(f"bad index '{token}'", path, lineno)
    if index < 0:
        index = count + index + 1
    if index == 0:
        raise ParseError("OBJ indices are 1-based", path, lineno)
    return index - 1


def _parse_obj(text: str, path: Optional[str]):
    positions: List[List[float]] = []
    uvs: List[List[float]] = []
    faces: List[Tuple[List[int], List[Optional[int]], int]] = []
    declared: Optional[Tuple[int, int, int]] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        counts = _OBJ_COUNTS.match(raw.strip())
        if counts and declared is None:
            declared = (int(counts.group(1)), int(counts.group(2)), lineno)
        parts = raw.split('#', 1)[0].split()
        if not parts:
            continue
        tag, values = parts[0], parts[1:]
        try:
            if tag == "v":
                if len(values) not in (3, 4):
                    raise ParseError(f"'v' needs 3 coordinates, got {len(values)}", path, lineno)
                positions.append([float(v) for v in values[:3]])
            elif tag == "vt":
                if len(values) not in (2, 3):
                    raise ParseError(f"'vt' needs 2 coordinates, got {len(values)}", path, lineno)
                uvs.append([float(v) for v in values[:2]])
            elif tag == "f":
                if len(values) != 3:
                    raise ParseError(f"only triangular faces are supported, got {len(values)} corners",
                                     path, lineno)
                corners, textures = [], []
                for ref in values:
                    fields = ref.split('/')
                    corners.append(_obj_index(fields[0], len(positions), path, lineno))
                    has_uv = len(fields) > 1 and fields[1] != ""
                    textures.append(_obj_index(fields[1], len(uvs), path, lineno) if has_uv else None)
                faces.append((corners, textures, lineno))
            elif tag not in OBJ_PASSIVE_TAGS:
                raise ParseError(f"unknown record '{tag}'", path, lineno)
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(f"malformed '{tag}' record: {e}", path, lineno)

    if not faces:
        raise ParseError("no faces", path)
    if declared is not None and (len(positions), len(faces)) != declared[:2]:
        raise ParseError(f"header declares {declared[0]} vertices and {declared[1]} faces, "
                         f"found {len(positions)} and {len(faces)}", path, declared[2])
    coords = np.array(positions, dtype=float).reshape(-1, 3)
    uv = np.array(uvs, dtype=float).reshape(-1, 2)
    for corners, textures, lineno in faces:
        if any(not 0 <= c < len(coords) for c in corners):
            raise ParseError("face references a missing vertex", path, lineno)
        if any(t is not None and not 0 <= t < len(uv) for t in textures):
            raise ParseError("face references a missing texture coordinate", path, lineno)

    if len(coords) and np.all(coords[:, 2] == 0.0):
        coords = coords[:, :2]
    return coords, faces, uv


def read_obj(text: str, path: Optional[str] = None) -> MeshFile:
    coords, faces, uv = _parse_obj(text, path)
    mesh = SimplicialMesh(coords, [corners for corners, _, _ in faces])
    return MeshFile(mesh=mesh, initial_state=_obj_uv_state(faces, uv, len(coords), path),
                    format=MeshFormat.OBJ)


def _obj_uv_state(faces, uv: np.ndarray, vertex_count: int, path: Optional[str]) -> Optional[DeformationState]:
    if len(uv) == 0:
        return None
    if len(uv) != vertex_count:
        logger.warning("%s: %d texture coordinates for %d vertices; ignoring them",
                       path or "<obj>", len(uv), vertex_count)
        return None
    mapping = np.full(vertex_count, -1, dtype=np.int64)
    for corners, textures, lineno in faces:
        for c, t in zip(corners, textures):
            if t is None:
                continue
            if mapping[c] not in (-1, t):
                raise ParseError(f"vertex {c + 1} has several texture coordinates", path, lineno)
            mapping[c] = t
    if np.all(mapping == -1):
        return DeformationState(uv)
    if np.any(mapping == -1):
        raise ParseError("some vertices have no texture coordinate", path)
    return DeformationState(uv[mapping])


def read_text(path: str) -> str:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return f.read()
    except UnicodeDecodeError as e:
        raise ParseError(f"not a UTF-8 text file ({e.reason} at byte {e.start})", path)


def load_mesh(path: str, format: Optional[MeshFormat] = None) -> MeshFile:
    """Read a mesh; OBJ texture coordinates matching the vertex count become the initial state.

    Raises:
        FileNotFoundError: path does not exist
        ParseError: malformed file, with line number
        MeshError: valid syntax but an invalid mesh
    """
    format = MeshFormat(format) if format is not None else detect_format(path)
    text = read_text(path)
    if format is MeshFormat.OBJ:
        return read_obj(text, path)
    return read_medit(text, path)


def load_state(path: str, format: Optional[MeshFormat] = None) -> DeformationState:
    """Read only the coordinates of a mesh file, to serve as an initial map.

    No element checks are made, so tangled or degenerate maps load fine.
    OBJ files give their texture coordinates when present.
    """
    format = MeshFormat(format) if format is not None else detect_format(path)
    text = read_text(path)
    if format is MeshFormat.MEDIT:
        vertices, _ = _parse_medit(text, path)
        return DeformationState(vertices)
    coords, faces, uv = _parse_obj(text, path)
    state = _obj_uv_state(faces, uv, len(coords), path)
    return state if state is not None else DeformationState(coords)


def _medit_lines(mesh: SimplicialMesh, state: DeformationState) -> Iterator[str]:
    yield "MeshVersionFormatted 2"
    yield f"Dimension {state.dim}"
    yield "Vertices"
    yield str(state.vertex_count)
    for row in state.coords:
        yield " ".join(format_float(v) for v in row) + " 0"
    yield "Triangles" if mesh.dim == 2 else "Tetrahedra"
    yield str(mesh.simplex_count)
    for simplex in mesh.simplices:
        yield " ".join(str(int(i) + 1) for i in simplex) + " 0"
    yield "End"


def _obj_lines(mesh: SimplicialMesh, state: DeformationState) -> Iterator[str]:
    yield "# stiffmap: v = reference positions, vt = map"
    yield f"# {mesh.vertex_count} vertices {mesh.simplex_count} faces"
    for row in mesh.ref_vertices:
        xyz = list(row) + [0.0] * (3 - len(row))
        yield "v " + " ".join(format_float(v) for v in xyz)
    for row in state.coords:
        yield "vt " + " ".join(format_float(v) for v in row)
    for simplex in mesh.simplices:
        yield "f " + " ".join(f"{int(i) + 1}/{int(i) + 1}" for i in simplex)


def store_mesh(path: str, mesh: SimplicialMesh, state: DeformationState,
               format: Optional[MeshFormat] = None):
    """Write the deformed mesh atomically.

    Raises:
        MeshError: state does not fit the mesh, or the format cannot hold it
    """
    format = MeshFormat(format) if format is not None else detect_format(path)
    if state.vertex_count != mesh.vertex_count:
        raise MeshError(f"State has {state.vertex_count} vertices but the mesh has {mesh.vertex_count}")
    if format is MeshFormat.OBJ:
        if mesh.dim != 2:
            raise MeshError("OBJ holds triangle meshes only")
        if state.dim != 2:
            raise MeshError("OBJ stores the map as texture coordinates, which are 2D")
        lines = _obj_lines(mesh, state)
    else:
        lines = _medit_lines(mesh, state)
    with atomic_write(path) as f:
        for line in lines:
            f.write(line + "\n")
