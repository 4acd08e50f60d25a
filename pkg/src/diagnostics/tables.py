"""
Convergence Tables Module

Ratio/order tables over nested refinements and CSV/JSON report files.
"""

import csv
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import structlog
from pydantic import BaseModel, Field

from src.models.reports import ConvergenceRow, ConvergenceTable, ErrorReport


logger = structlog.get_logger(__name__)

CSV_COLUMNS = (
    "problem", "p", "q", "level", "N", "dof", "NT",
    "e0", "eE", "ratio_eE", "order_eE", "wall_s",
)
REPORT_FORMATS = ("csv", "json")


class ReportFile(BaseModel):
    """On-disk JSON layout: one table per (problem, p, q) block."""
    tables: List[ConvergenceTable] = Field(default_factory=list)


def order_from_ratio(ratio: float, h_ratio: float = 2.0) -> float:
    """log(ratio) / log(h_ratio); log2 for halved meshes."""
    return math.log(ratio) / math.log(h_ratio)


def _ratio(previous: float, current: float) -> Optional[float]:
    if current == 0.0:
        return None
    return previous / current


def convergence_table(reports: Sequence[ErrorReport], h_ratio: float = 2.0) -> ConvergenceTable:
    """Rows with ratio e_{i-1}/e_i and order log(ratio)/log(h_ratio)."""
    rows: List[ConvergenceRow] = []
    previous: Optional[ErrorReport] = None
    for report in reports:
        if previous is not None:
            if (report.problem, report.p, report.q) != (previous.problem, previous.p, previous.q):
                raise ValueError("a convergence table holds a single (problem, p, q) block")
            if report.refinement <= previous.refinement:
                raise ValueError(
                    f"refinement must increase: {previous.refinement} then {report.refinement}"
                )
        row = ConvergenceRow(report=report)
        if previous is not None:
            row.ratio_e0 = _ratio(previous.e0, report.e0)
            row.ratio_eE = _ratio(previous.eE, report.eE)
            row.order_e0 = None if row.ratio_e0 is None else order_from_ratio(row.ratio_e0, h_ratio)
            row.order_eE = None if row.ratio_eE is None else order_from_ratio(row.ratio_eE, h_ratio)
            if previous.e_neg is not None and report.e_neg is not None:
                row.ratio_e_neg = _ratio(previous.e_neg, report.e_neg)
                row.order_e_neg = (
                    None if row.ratio_e_neg is None else order_from_ratio(row.ratio_e_neg, h_ratio)
                )
        rows.append(row)
        previous = report
    return ConvergenceTable(rows=rows)


def group_reports(reports: Iterable[ErrorReport]) -> List[ConvergenceTable]:
    """Split mixed reports into per-(problem, p, q) tables sorted by refinement."""
    blocks: Dict[Tuple[str, int, int], List[ErrorReport]] = {}
    for report in reports:
        blocks.setdefault((report.problem, report.p, report.q), []).append(report)
    return [
        convergence_table(sorted(block, key=lambda r: r.refinement))
        for block in blocks.values()
    ]


def _cell(value: Optional[float]) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _csv_row(row: ConvergenceRow) -> List[str]:
    r = row.report
    return [
        r.problem,
        str(r.p),
        str(r.q),
        _cell(r.level),
        _cell(r.N),
        str(r.n_dof),
        str(r.n_steps),
        _cell(r.e0),
        _cell(r.eE),
        _cell(row.ratio_eE),
        _cell(row.order_eE),
        _cell(r.wall_time),
    ]


def write_report(
    tables: Union[ConvergenceTable, Sequence[ConvergenceTable]],
    fmt: str,
    path: Union[str, Path],
) -> Path:
    """Write tables as CSV (one header, rows block by block) or JSON."""
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown report format '{fmt}' (expected csv or json)")
    if isinstance(tables, ConvergenceTable):
        tables = [tables]

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        target.write_text(ReportFile(tables=list(tables)).model_dump_json(indent=2))
    else:
        with target.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for table in tables:
                for row in table.rows:
                    writer.writerow(_csv_row(row))

    logger.info("report_written", path=str(target), format=fmt, tables=len(tables))
    return target


def read_report(path: Union[str, Path]) -> List[ConvergenceTable]:
    """Load a JSON report written by write_report."""
    return ReportFile.model_validate_json(Path(path).read_text()).tables


def format_table(table: ConvergenceTable) -> str:
    """Plain-text rendering in the e_E / ratio / order layout."""
    lines = [f"{'ref':>5} {'NT':>8} {'e0':>10} {'eE':>10} {'ratio':>7} {'order':>6}"]
    for row in table.rows:
        r = row.report
        ratio = f"{row.ratio_eE:7.2f}" if row.ratio_eE is not None else " " * 7
        order = f"{row.order_eE:6.2f}" if row.order_eE is not None else " " * 6
        lines.append(f"{r.refinement:>5} {r.n_steps:>8} {r.e0:10.2e} {r.eE:10.2e} {ratio} {order}")
    return "\n".join(lines)
