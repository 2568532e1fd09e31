import csv
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

from ..core.errors import ParseError
from ..core.quality import QualityStats
from ..core.report import ContinuationReport, IterationRecord, RunSummary
from .atomic import atomic_write, format_float

REPORT_HEADER = ["iter", "param", "objective", "f_max", "d_min", "inner_iters", "sigma"]
HISTOGRAM_HEADER = ["bin_lo", "bin_hi", "count_condition", "count_det"]
QUALITY_HEADER = ["element", "sigma_max", "sigma_min", "condition", "det"]
PHASE_MARKER = "# phase="


@dataclass
class ReportFile:
    reports: List[ContinuationReport] = field(default_factory=list)
    summary: Optional[RunSummary] = None

    @property
    def records(self) -> List[IterationRecord]:
        return [r for report in self.reports for r in report.records]


def histogram_path(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return f"{stem}_hist.csv"


def _optional(value: Optional[float]) -> str:
    return "" if value is None else format_float(value)


def write_histogram(path: str, stats: QualityStats):
    edges = stats.bin_edges
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HISTOGRAM_HEADER)
        for lo, hi, nc, nd in zip(edges[:-1], edges[1:], stats.condition_counts, stats.det_counts):
            writer.writerow([format_float(lo), format_float(hi), int(nc), int(nd)])


def write_report(path: str, report: Union[ContinuationReport, Sequence[ContinuationReport]],
                 stats: Optional[QualityStats] = None, summary: Optional[RunSummary] = None):
    """Write the continuation trace as CSV, plus the histogram companion when stats are given.

    Several reports (a pipeline run) are separated by '# phase=<name>' lines;
    the terminal summary is a final '# gamma=...' comment with blank fields
    where a value is undefined.
    """
    reports = [report] if isinstance(report, ContinuationReport) else list(report)
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for rep in reports:
            if len(reports) > 1:
                f.write(f"{PHASE_MARKER}{rep.phase}\n")
            for r in rep.records:
                writer.writerow([
                    r.iteration, format_float(r.param), format_float(r.objective),
                    format_float(r.f_max), format_float(r.d_min), r.inner_iterations,
                    _optional(r.sigma),
                ])
        if summary is not None:
            f.write(f"# {summary.format_line(missing='')}\n")
    if stats is not None:
        write_histogram(histogram_path(path), stats)


def _parse_summary(text: str, path: str, lineno: int) -> RunSummary:
    summary = RunSummary()
    for item in text.split():
        name, sep, value = item.partition("=")
        if not sep or not hasattr(summary, name):
            raise ParseError(f"bad summary field '{item}'", path, lineno)
        try:
            setattr(summary, name, float(value) if value not in ("", "n/a") else None)
        except ValueError:
            raise ParseError(f"bad summary value '{item}'", path, lineno)
    return summary


def read_report(path: str) -> ReportFile:
    """Parse a file produced by write_report.

    Raises:
        ParseError: wrong header, wrong field count or unparsable number
    """
    result = ReportFile()
    current: Optional[ContinuationReport] = None
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.read().splitlines()
    if not lines or lines[0].split(",") != REPORT_HEADER:
        raise ParseError("missing report header", path, 1)
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        if line.startswith(PHASE_MARKER):
            current = ContinuationReport(phase=line[len(PHASE_MARKER):].strip())
            result.reports.append(current)
            continue
        if line.startswith("# "):
            result.summary = _parse_summary(line[2:], path, lineno)
            continue
        fields = line.split(",")
        if len(fields) != len(REPORT_HEADER):
            raise ParseError(f"expected {len(REPORT_HEADER)} fields, got {len(fields)}", path, lineno)
        try:
            record = IterationRecord(
                iteration=int(fields[0]),
                param=float(fields[1]),
                objective=float(fields[2]),
                f_max=float(fields[3]),
                d_min=float(fields[4]),
                inner_iterations=int(fields[5]),
                sigma=float(fields[6]) if fields[6] else None,
            )
        except ValueError as e:
            raise ParseError(f"bad record: {e}", path, lineno)
        if current is None:
            current = ContinuationReport(phase="")
            result.reports.append(current)
        current.records.append(record)
    return result


def write_quality(path: str, stats: QualityStats):
    """Per-element singular values, condition numbers and determinants, plus the histogram file."""
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(QUALITY_HEADER)
        for k in range(stats.element_count):
            writer.writerow([k, format_float(stats.sigma_max[k]), format_float(stats.sigma_min[k]),
                             format_float(stats.condition[k]), format_float(stats.det[k])])
    write_histogram(histogram_path(path), stats)
