"""Tests for affine constraint reduction, index preservation and transition rows."""
import math
from fractions import Fraction

import numpy as np
import pytest

from stiffmap.core.constraints import (AffineRow, ConstraintSet, build_reduction,
                                       index_preservation_constraints, one_ring, transition_rows)
from stiffmap.core.errors import ConstraintError
from stiffmap.core.mesh import DeformationState, SimplicialMesh
from tests.meshes import grid, saddle_fan, unit_square, unit_tet, wheel


# ── Helpers ──────────────────────────────────────────────────────────


def _strip() -> SimplicialMesh:
    """Four triangles over [0, 2] x [0, 1]: vertices 0-2 on y = 0, 3-5 on y = 1."""
    vertices = [[x, 0.0] for x in range(3)] + [[x, 1.0] for x in range(3)]
    return SimplicialMesh(vertices, [[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4]])


def _satisfied(rows, full: np.ndarray, tol: float = 1e-9) -> bool:
    return all(abs(row.residual(full)) <= tol for row in rows)


# ━━ build_reduction ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestBuildReduction:
    def test_empty_is_identity(self):
        reduction = build_reduction(ConstraintSet(dim=2), 5, 2)
        assert reduction.is_identity
        assert reduction.free_count == 10
        x = np.arange(10.0)
        np.testing.assert_array_equal(reduction.expand(x), x)

    def test_none_is_identity(self):
        assert build_reduction(None, 3, 3).free_count == 9

    def test_one_locked_vertex(self):
        constraints = ConstraintSet(dim=2)
        constraints.lock(1, [5.0, 6.0])
        reduction = build_reduction(constraints, 4, 2)
        assert reduction.free_count == 6
        full = reduction.expand(np.zeros(6))
        np.testing.assert_array_equal(full[2:4], [5.0, 6.0])

    def test_every_expansion_satisfies_rows(self):
        constraints = ConstraintSet(dim=2)
        constraints.lock(0, [0.0, 0.0])
        constraints.add_rows([
            AffineRow.from_vertex_terms([(1, 0, 1.0), (2, 0, 1.0)], 3.0, 2),
            AffineRow.from_vertex_terms([(3, 1, 2.0), (1, 1, -1.0)], 0.5, 2),
        ])
        reduction = build_reduction(constraints, 4, 2)
        assert reduction.free_count == 8 - 4
        rng = np.random.default_rng(1)
        for _ in range(5):
            full = reduction.expand(rng.normal(size=reduction.free_count))
            assert constraints.max_residual(full) < 1e-12

    def test_duplicate_rows_are_merged(self):
        constraints = ConstraintSet(dim=2)
        constraints.lock(2, [1.0, 1.0])
        constraints.lock(2, [1.0, 1.0])
        assert build_reduction(constraints, 3, 2).free_count == 4

    def test_dependent_consistent_row_is_merged(self):
        constraints = ConstraintSet(dim=2)
        constraints.add_rows([
            AffineRow.from_vertex_terms([(0, 0, 1.0), (1, 0, -1.0)], 1.0, 2),
            AffineRow.from_vertex_terms([(0, 0, 2.0), (1, 0, -2.0)], 2.0, 2),
        ])
        assert build_reduction(constraints, 2, 2).free_count == 3

    def test_conflicting_rows_name_the_row(self):
        constraints = ConstraintSet(dim=2)
        constraints.lock(0, [0.0, 0.0], label="first")
        constraints.add_rows([AffineRow.from_vertex_terms([(0, 0, 1.0)], 1.0, 2, "clash")])
        with pytest.raises(ConstraintError, match="clash") as info:
            build_reduction(constraints, 2, 2)
        assert info.value.row == 2

    def test_vertex_out_of_range(self):
        constraints = ConstraintSet(dim=2)
        constraints.lock(7, [0.0, 0.0])
        with pytest.raises(ConstraintError, match="outside"):
            build_reduction(constraints, 3, 2)

    def test_lock_needs_full_position(self):
        with pytest.raises(ConstraintError, match="coordinates"):
            ConstraintSet(dim=3).lock(0, [1.0, 2.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ConstraintError, match="3D"):
            build_reduction(ConstraintSet(dim=3), 4, 2)

    def test_gradient_is_transposed_map(self):
        constraints = ConstraintSet(dim=2)
        constraints.add_rows([AffineRow.from_vertex_terms([(0, 0, 1.0), (1, 0, -2.0)], 0.0, 2)])
        reduction = build_reduction(constraints, 2, 2)
        g = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(reduction.free_gradient(g), reduction.matrix.T @ g)


# ━━ Reduction.project ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestProject:
    def test_locked_values_are_exact(self):
        mesh = grid(2)
        constraints = ConstraintSet(dim=2)
        constraints.lock(0, [-1.0, -1.0])
        reduction = build_reduction(constraints, mesh.vertex_count, 2)
        full = reduction.expand(reduction.project(mesh.ref_vertices.reshape(-1)))
        np.testing.assert_array_equal(full[:2], [-1.0, -1.0])
        np.testing.assert_allclose(full[2:], mesh.ref_vertices.reshape(-1)[2:])

    def test_feasible_point_is_kept(self):
        constraints = ConstraintSet(dim=2)
        constraints.add_rows([AffineRow.from_vertex_terms([(0, 0, 1.0), (1, 0, 1.0)], 1.0, 2)])
        reduction = build_reduction(constraints, 2, 2)
        full = np.array([0.25, 3.0, 0.75, -2.0])
        np.testing.assert_allclose(reduction.expand(reduction.project(full)), full, atol=1e-10)

    def test_identity_projection_copies(self):
        reduction = build_reduction(None, 2, 2)
        full = np.array([1.0, 2.0, 3.0, 4.0])
        free = reduction.project(full)
        free[0] = 9.0
        assert full[0] == 1.0


# ━━ one_ring ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestOneRing:
    def test_closed_ring_in_rotation_order(self):
        ring, closed = one_ring(wheel(5), 0)
        assert closed
        assert ring == [1, 2, 3, 4, 5]

    def test_boundary_vertex_is_open(self):
        ring, closed = one_ring(unit_square(), 0)
        assert not closed
        assert ring == [1, 2, 3]

    def test_tetrahedra_rejected(self):
        with pytest.raises(ConstraintError):
            one_ring(unit_tet(), 0)


# ━━ index_preservation_constraints ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestIndexPreservation:
    def test_flat_vertex_index_zero_accepts_identity(self):
        mesh = wheel(4)
        rows = index_preservation_constraints(mesh, None, 0, 0)
        assert len(rows) == 2 * 4
        assert _satisfied(rows, mesh.ref_vertices.reshape(-1))

    def test_similarity_of_ring_still_satisfies(self):
        mesh = wheel(6)
        rows = index_preservation_constraints(mesh, None, 0, Fraction(0))
        R = np.array([[math.cos(1.0), -math.sin(1.0)], [math.sin(1.0), math.cos(1.0)]])
        mapped = 2.5 * mesh.ref_vertices @ R.T + np.array([3.0, -1.0])
        assert _satisfied(rows, mapped.reshape(-1))

    def test_valence_five_quarter_index(self, caplog):
        mesh = wheel(5)
        rows = index_preservation_constraints(mesh, None, 0, Fraction(-1, 4))
        assert len(rows) == 2 * 5
        # each neighbour pair turns by (5/4) (2 pi / 5) around the centre
        angle = 1.25 * 2.0 * math.pi / 5.0
        full = np.zeros(12)
        full[2:4] = [1.0, 0.0]
        full[4:6] = [math.cos(angle), math.sin(angle)]
        assert abs(rows[0].residual(full)) < 1e-12
        assert abs(rows[1].residual(full)) < 1e-12
        assert "fractional index" in caplog.text

    def test_saddle_index_zero_flattens_to_one_turn(self):
        mesh = saddle_fan()
        rows = index_preservation_constraints(mesh, None, 0, 0)
        full = np.zeros(2 * 13)
        for k in range(12):
            a = 2.0 * math.pi * k / 12
            full[2 + 2 * k:4 + 2 * k] = [math.cos(a), math.sin(a)]
        assert _satisfied(rows, full)

    def test_saddle_index_minus_one_is_double_cover(self):
        mesh = saddle_fan()
        rows = index_preservation_constraints(mesh, None, 0, -1)
        full = np.zeros(2 * 13)
        for k in range(12):
            a = math.pi / 3.0 * k
            full[2 + 2 * k:4 + 2 * k] = [math.cos(a), math.sin(a)]
        assert _satisfied(rows, full)

    def test_open_ring_needs_flag(self):
        with pytest.raises(ConstraintError, match="open"):
            index_preservation_constraints(unit_square(), None, 0, 0)

    def test_open_ring_with_flag(self):
        mesh = unit_square()
        rows = index_preservation_constraints(mesh, None, 0, 0, open_ring=True)
        assert len(rows) == 2 * 2
        assert _satisfied(rows, mesh.ref_vertices.reshape(-1))

    def test_planar_map_required(self):
        mesh = wheel(4)
        state = DeformationState(np.column_stack([mesh.ref_vertices, np.zeros(5)]))
        with pytest.raises(ConstraintError, match="planar"):
            index_preservation_constraints(mesh, state, 0, 0)


# ━━ transition_rows ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestTransitionRows:
    def test_quarter_turn_with_translation(self):
        mesh = _strip()
        pairs = [(0, 2), (3, 5)]
        rows = transition_rows(pairs, 1, (1.0, 0.0))
        constraints = ConstraintSet(dim=2)
        constraints.lock(0, [0.0, 0.0])
        constraints.lock(3, [0.0, 1.0])
        constraints.add_rows(rows)
        reduction = build_reduction(constraints, mesh.vertex_count, 2)
        rng = np.random.default_rng(4)
        coords = reduction.expand_coords(rng.normal(size=reduction.free_count))
        R = np.array([[0.0, -1.0], [1.0, 0.0]])
        for a, b in pairs:
            np.testing.assert_allclose(coords[b], R @ coords[a] + [1.0, 0.0], atol=1e-12)

    def test_unknown_translation_constrains_differences(self):
        pairs = [(0, 2), (3, 5), (1, 4)]
        rows = transition_rows(pairs, 2)
        assert len(rows) == 4
        coords = np.array([[0, 0], [1, 0], [7, 7], [0, 1], [6, 7], [7, 6]], dtype=float)
        assert _satisfied(rows, coords.reshape(-1))

    def test_full_turns_wrap(self):
        assert transition_rows([(0, 1)], 4, (0.0, 0.0)) == transition_rows([(0, 1)], 0, (0.0, 0.0))

    def test_planar_only(self):
        with pytest.raises(ConstraintError):
            transition_rows([(0, 1)], 1, None, dim=3)
