"""Tests for the CSV continuation reports and quality files."""
import csv

import numpy as np
import pytest

from stiffmap.core.density import MixedDensity
from stiffmap.core.errors import ParseError
from stiffmap.core.mesh import DeformationState
from stiffmap.core.quality import compute_quality
from stiffmap.core.report import ContinuationReport, IterationRecord, RunSummary
from stiffmap.io.reportfile import (HISTOGRAM_HEADER, QUALITY_HEADER, REPORT_HEADER, histogram_path,
                                    read_report, write_quality, write_report)
from tests.meshes import grid, write_text


# ── Helpers ──────────────────────────────────────────────────────────


def _report(phase: str, count: int, sigma=None) -> ContinuationReport:
    report = ContinuationReport(phase=phase, converged=True, feasible=True)
    for k in range(count):
        report.records.append(IterationRecord(
            iteration=k, param=0.1 * k + 1.0 / 3.0, objective=2.0 - 0.1 * k, f_max=1.5,
            d_min=0.25, inner_iterations=7 + k, sigma=sigma,
        ))
    return report


def _rows(path):
    with open(path, encoding="utf-8") as f:
        return list(csv.reader(f))


# ━━ write_report / read_report ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestReport:
    def test_empty_report_is_header_only(self, tmp_path):
        path = str(tmp_path / "r.csv")
        write_report(path, ContinuationReport(phase="untangle"))
        assert _rows(path) == [REPORT_HEADER]

    def test_single_phase_round_trip(self, tmp_path):
        path = str(tmp_path / "r.csv")
        report = _report("stiffen", 3, sigma=0.1)
        write_report(path, report)
        loaded = read_report(path)
        assert len(loaded.reports) == 1
        for written, read in zip(report.records, loaded.records):
            assert read.param == written.param
            assert read.objective == written.objective
            assert read.inner_iterations == written.inner_iterations
            assert read.sigma == 0.1

    def test_untangle_sigma_is_blank(self, tmp_path):
        path = str(tmp_path / "r.csv")
        write_report(path, _report("untangle", 1))
        assert _rows(path)[1][-1] == ""
        assert read_report(path).records[0].sigma is None

    def test_pipeline_phases_and_summary(self, tmp_path):
        path = str(tmp_path / "r.csv")
        summary = RunSummary(gamma=1.25, gamma_bound=3.0, t=0.75, f_max=1.3, d_min=0.5)
        write_report(path, [_report("untangle", 2), _report("stiffen", 4, 0.2)], summary=summary)
        with open(path, encoding="utf-8") as f:
            text = f.read()
        assert "# phase=untangle\n" in text
        assert "# phase=stiffen\n" in text
        loaded = read_report(path)
        assert [r.phase for r in loaded.reports] == ["untangle", "stiffen"]
        assert [len(r.records) for r in loaded.reports] == [2, 4]
        assert loaded.summary == summary

    def test_undefined_gamma_is_blank(self, tmp_path):
        path = str(tmp_path / "r.csv")
        write_report(path, _report("stiffen", 1, 0.1), summary=RunSummary(gamma=None, t=0.5))
        with open(path, encoding="utf-8") as f:
            last = f.read().splitlines()[-1]
        assert last.startswith("# gamma= gamma_bound= t=0.5")
        assert read_report(path).summary.gamma is None

    def test_histogram_companion(self, tmp_path):
        mesh = grid(3)
        stats = compute_quality(mesh, DeformationState.identity(mesh), MixedDensity())
        path = str(tmp_path / "r.csv")
        write_report(path, _report("untangle", 1), stats=stats)
        rows = _rows(histogram_path(path))
        assert rows[0] == HISTOGRAM_HEADER
        assert sum(int(r[2]) for r in rows[1:]) == mesh.simplex_count
        assert sum(int(r[3]) for r in rows[1:]) == mesh.simplex_count

    def test_bad_header(self, tmp_path):
        path = write_text(tmp_path / "r.csv", "a,b\n")
        with pytest.raises(ParseError, match="header"):
            read_report(path)

    def test_bad_field_count_has_line(self, tmp_path):
        path = write_text(tmp_path / "r.csv", ",".join(REPORT_HEADER) + "\n0,1,2\n")
        with pytest.raises(ParseError) as info:
            read_report(path)
        assert info.value.line == 2


# ━━ write_quality ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestQualityFile:
    def test_one_row_per_element(self, tmp_path):
        mesh = grid(2)
        state = DeformationState(mesh.ref_vertices * [2.0, 1.0])
        stats = compute_quality(mesh, state, MixedDensity())
        path = str(tmp_path / "q.csv")
        write_quality(path, stats)
        rows = _rows(path)
        assert rows[0] == QUALITY_HEADER
        assert len(rows) == 1 + mesh.simplex_count
        np.testing.assert_allclose([float(r[3]) for r in rows[1:]], 2.0)
        assert (tmp_path / "q_hist.csv").exists()
