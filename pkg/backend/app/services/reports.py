"""CSV and plain-text rendering for verify, bench, run and sweep results."""

import csv
import io
import logging
from pathlib import Path
from typing import Any, Iterable, List, Sequence

from .scenario import CoreTraceRow, HubTraceRow, LandingReport, LandingTrace, VehicleTraceRow

logger = logging.getLogger(__name__)


def format_cell(value: Any) -> str:
    """Fixed textual form so identical runs give byte-identical files."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows), encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def format_table(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Right-aligned columns for terminal output."""
    cells: List[List[str]] = [list(header)] + [[format_cell(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines)


def landing_summary(report: LandingReport) -> str:
    verdict = "SUCCESS" if report.success else "FAILURE"
    mode = "degraded thresholds" if report.degraded else "nominal thresholds"
    if not report.touchdown:
        return f"{verdict}: no touchdown after {report.steps_elapsed} steps ({mode})"
    return (
        f"{verdict}: touchdown after {report.steps_elapsed} steps at "
        f"{report.touchdown_speed_mps:.3f} m/s, inclination error "
        f"{report.inclination_error_deg:.2f} deg ({mode})"
    )


def write_landing_outputs(directory: Path, report: LandingReport, trace: LandingTrace) -> List[Path]:
    """Write trace.csv, core_trace.csv, hub_trace.csv and report.csv."""
    directory = Path(directory)
    return [
        write_csv(directory / "trace.csv", VehicleTraceRow._fields, trace.vehicle),
        write_csv(directory / "core_trace.csv", CoreTraceRow._fields, trace.cores),
        write_csv(directory / "hub_trace.csv", HubTraceRow._fields, trace.hub),
        write_csv(directory / "report.csv", LandingReport.HEADER, [report.row()]),
    ]
