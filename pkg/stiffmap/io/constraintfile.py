"""Line-oriented constraint files.

    lock <vidx> <x> <y> [<z>]
    affine <b> <n> (<coef> <vidx> <axis>)*n
    singularity <vidx> <num>/<den> [open]
    transition <k> <tx|*> <ty|*> <n> (<a> <b>)*n

Vertex indices are 0-based; '#' starts a comment.
"""
from fractions import Fraction
from typing import List, Optional

from ..core.constraints import (AffineRow, ConstraintSet, index_preservation_constraints,
                                transition_rows)
from ..core.errors import ConstraintError, ParseError
from ..core.mesh import DeformationState, SimplicialMesh
from .meshfile import read_text


class _Line:
    def __init__(self, fields: List[str], lineno: int, path: Optional[str]):
        self.fields = fields
        self.lineno = lineno
        self.path = path
        self.pos = 1

    def error(self, message: str) -> ParseError:
        return ParseError(f"'{self.fields[0]}': {message}", self.path, self.lineno)

    def take(self, what: str) -> str:
        if self.pos >= len(self.fields):
            raise self.error(f"missing {what}")
        token = self.fields[self.pos]
        self.pos += 1
        return token

    def integer(self, what: str) -> int:
        token = self.take(what)
        try:
            return int(token)
        except ValueError:
            raise self.error(f"{what} must be an integer, got '{token}'")

    def real(self, what: str) -> float:
        token = self.take(what)
        try:
            return float(token)
        except ValueError:
            raise self.error(f"{what} must be a number, got '{token}'")

    def vertex(self, mesh: SimplicialMesh) -> int:
        index = self.integer("vertex index")
        if not 0 <= index < mesh.vertex_count:
            raise self.error(f"vertex {index} out of range [0, {mesh.vertex_count})")
        return index

    def finish(self):
        if self.pos != len(self.fields):
            raise self.error(f"unexpected trailing field '{self.fields[self.pos]}'")


def parse_constraints(text: str, mesh: SimplicialMesh, state: Optional[DeformationState] = None,
                      path: Optional[str] = None) -> ConstraintSet:
    """Build a ConstraintSet from constraint-file text.

    Raises:
        ParseError: malformed line or invalid vertex index, with its line number
    """
    dim = mesh.dim
    constraints = ConstraintSet(dim=dim)
    for lineno, raw in enumerate(text.splitlines(), 1):
        fields = raw.split('#', 1)[0].split()
        if not fields:
            continue
        line = _Line(fields, lineno, path)
        label = f"line {lineno}"
        keyword = fields[0]
        if keyword == "lock":
            vertex = line.vertex(mesh)
            coords = [line.real("coordinate") for _ in range(dim)]
            line.finish()
            constraints.lock(vertex, coords, label=label)
        elif keyword == "affine":
            rhs = line.real("right-hand side")
            count = line.integer("term count")
            if count <= 0:
                raise line.error("term count must be positive")
            terms = []
            for _ in range(count):
                coef = line.real("coefficient")
                vertex = line.vertex(mesh)
                axis = line.integer("axis")
                if not 0 <= axis < dim:
                    raise line.error(f"axis {axis} out of range [0, {dim})")
                terms.append((vertex, axis, coef))
            line.finish()
            constraints.add_rows([AffineRow.from_vertex_terms(terms, rhs, dim, label)])
        elif keyword == "singularity":
            vertex = line.vertex(mesh)
            token = line.take("index")
            try:
                index = Fraction(token)
            except (ValueError, ZeroDivisionError):
                raise line.error(f"index must be a fraction like -1/4, got '{token}'")
            open_ring = False
            if line.pos < len(fields):
                if line.take("flag") != "open":
                    raise line.error(f"unknown flag '{fields[line.pos - 1]}'")
                open_ring = True
            line.finish()
            try:
                constraints.add_rows(index_preservation_constraints(mesh, state, vertex, index, open_ring))
            except ConstraintError as e:
                raise line.error(str(e))
        elif keyword == "transition":
            quarter_turns = line.integer("quarter turns")
            tx, ty = line.take("tx"), line.take("ty")
            if (tx == "*") != (ty == "*"):
                raise line.error("translation must be given for both axes or neither")
            try:
                translation = None if tx == "*" else (float(tx), float(ty))
            except ValueError:
                raise line.error("translation must be numbers or '*'")
            count = line.integer("pair count")
            if count <= 0:
                raise line.error("pair count must be positive")
            pairs = [(line.vertex(mesh), line.vertex(mesh)) for _ in range(count)]
            line.finish()
            try:
                constraints.add_rows(transition_rows(pairs, quarter_turns, translation, dim, label))
            except ConstraintError as e:
                raise line.error(str(e))
        else:
            raise ParseError(f"unknown constraint '{keyword}'", path, lineno)
    return constraints


def load_constraints(path: str, mesh: SimplicialMesh,
                     state: Optional[DeformationState] = None) -> ConstraintSet:
    return parse_constraints(read_text(path), mesh, state, path)
