"""
Bandwidth Sentinel - Reporting Module
Tabular reports of network bandwidth results

This module provides:
- ReportRow, the unit of every strategy / controller report
- pandas frames rendered as CSV (LF line endings) or Markdown tables
- Re-parsing of emitted CSV
- Strategy dominance checking
- Comparison of computed totals against the published reference tables
"""

import io
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from .partitioner import BASELINE_STRATEGIES, Strategy

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["network", "macs", "strategy", "mode", "total_activations", "total_millions"]
SAVINGS_COLUMNS = ["network", "macs", "passive_activations", "active_activations", "savings_percent"]
DISCREPANCY_COLUMNS = [
    "catalog", "groups", "table", "network", "column", "macs",
    "computed_millions", "reference_millions", "relative_error", "within_tolerance",
]

# min-bw rows have no MAC budget
UNBOUNDED_MACS = 0


class ReportFormat(Enum):
    """Supported report formats"""
    CSV = "csv"
    MARKDOWN = "md"


class DominanceViolation(ValueError):
    """Raised when a baseline strategy beats the optimal partitioning"""

    def __init__(self, violations: List[str]):
        self.violations = violations
        super().__init__(f"{len(violations)} dominance violation(s): " + "; ".join(violations))


@dataclass(frozen=True)
class ReportRow:
    """One network total under one (MAC budget, strategy, controller) setting"""
    network: str
    macs: int
    strategy: str
    mode: str
    total: int

    @property
    def total_millions(self) -> float:
        return round(self.total / 1e6, 2)

    def to_record(self) -> Dict:
        return {
            "network": self.network,
            "macs": self.macs,
            "strategy": self.strategy,
            "mode": self.mode,
            "total_activations": self.total,
            "total_millions": self.total_millions,
        }


@dataclass
class Report:
    """Rows of one command plus the side tables and notes it produced"""
    title: str
    rows: List[ReportRow] = field(default_factory=list)
    savings: Optional[pd.DataFrame] = None
    notes: List[str] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return rows_to_frame(self.rows)

    def render(self, report_format: ReportFormat = ReportFormat.CSV, decimals: int = 2) -> str:
        text = render_frame(self.to_frame(), report_format, decimals)
        if self.savings is not None:
            text += "\n" + render_frame(self.savings, report_format, decimals)
        return text

    def raise_for_violations(self):
        if self.violations:
            raise DominanceViolation(self.violations)


def rows_to_frame(rows: Sequence[ReportRow]) -> pd.DataFrame:
    return pd.DataFrame([row.to_record() for row in rows], columns=REPORT_COLUMNS)


def render_csv(frame: pd.DataFrame, decimals: int = 2) -> str:
    return frame.to_csv(index=False, lineterminator="\n", float_format=f"%.{decimals}f")


def render_markdown(frame: pd.DataFrame, decimals: int = 2) -> str:
    """Pipe table with right-aligned numeric columns"""
    def cell(value) -> str:
        if isinstance(value, float):
            return f"{value:.{decimals}f}"
        return str(value)

    columns = list(frame.columns)
    numeric = [pd.api.types.is_numeric_dtype(frame[c]) and not pd.api.types.is_bool_dtype(frame[c])
               for c in columns]
    lines = [
        "| " + " | ".join(columns) + " |",
        "|" + "|".join("---:" if num else "---" for num in numeric) + "|",
    ]
    for record in frame.itertuples(index=False):
        lines.append("| " + " | ".join(cell(v) for v in record) + " |")
    return "\n".join(lines) + "\n"


def render_frame(frame: pd.DataFrame, report_format: ReportFormat, decimals: int = 2) -> str:
    if report_format is ReportFormat.MARKDOWN:
        return render_markdown(frame, decimals)
    return render_csv(frame, decimals)


def parse_rows(text: str) -> List[ReportRow]:
    """
    Re-read the primary table of a CSV report

    Parsing stops at the first blank line, where side tables begin.
    """
    primary = text.split("\n\n", 1)[0]
    frame = pd.read_csv(io.StringIO(primary), keep_default_na=False,
                        dtype={"network": str, "strategy": str, "mode": str})
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"report is missing columns: {', '.join(missing)}")
    return [
        ReportRow(
            network=record.network,
            macs=int(record.macs),
            strategy=record.strategy,
            mode=record.mode,
            total=int(record.total_activations),
        )
        for record in frame.itertuples(index=False)
    ]


def check_dominance(rows: Sequence[ReportRow]) -> List[str]:
    """
    Rows where a baseline strategy is strictly below the optimal one

    Rows are grouped by (network, macs, mode); groups without an optimal row are skipped.
    """
    frame = rows_to_frame(rows)
    if frame.empty:
        return []
    baselines = {s.value for s in BASELINE_STRATEGIES}
    violations = []
    for (network, macs, mode), group in frame.groupby(["network", "macs", "mode"], sort=False):
        optimal = group[group["strategy"] == Strategy.OPTIMAL.value]
        if optimal.empty:
            continue
        best = int(optimal["total_activations"].iloc[0])
        for record in group[group["strategy"].isin(baselines)].itertuples(index=False):
            if record.total_activations < best:
                violations.append(
                    f"{network} P={macs} {mode}: {record.strategy} {record.total_activations} "
                    f"< optimal {best}"
                )
    for violation in violations:
        logger.error(f"Dominance violation: {violation}")
    return violations


def savings_frame(passive: Sequence[ReportRow], active: Sequence[ReportRow]) -> pd.DataFrame:
    """Pair passive and active rows by (network, macs): savings% = 100*(P-A)/P"""
    active_totals = {(r.network, r.macs): r.total for r in active}
    records = []
    for row in passive:
        key = (row.network, row.macs)
        if key not in active_totals:
            continue
        active_total = active_totals[key]
        saving = 100.0 * (row.total - active_total) / row.total if row.total else 0.0
        records.append({
            "network": row.network,
            "macs": row.macs,
            "passive_activations": row.total,
            "active_activations": active_total,
            "savings_percent": round(saving, 2),
        })
    return pd.DataFrame(records, columns=SAVINGS_COLUMNS)


class ReferenceTables:
    """
    Published per-network bandwidth figures (million activations)

    Layout of the reference file:
        min_bandwidth:  {network: value}
        strategies:     {macs: {network: {strategy: value}}}
        controller:     {mode: {network: {macs: value}}}
    """

    def __init__(self, data: Dict):
        self.data = data

    @classmethod
    def load(cls, path: str) -> 'ReferenceTables':
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        logger.info(f"Reference tables loaded from {path}")
        return cls(data)

    def min_bandwidth(self, network: str) -> Optional[float]:
        return self.data.get('min_bandwidth', {}).get(network)

    def strategy_macs(self) -> List[int]:
        return sorted(int(p) for p in self.data.get('strategies', {}))

    def strategy(self, macs: int, network: str, strategy: str) -> Optional[float]:
        return self.data.get('strategies', {}).get(str(macs), {}).get(network, {}).get(strategy)

    def controller_macs(self) -> List[int]:
        first = next(iter(self.data.get('controller', {}).get('passive', {}).values()), {})
        return sorted(int(p) for p in first)

    def controller(self, mode: str, network: str, macs: int) -> Optional[float]:
        return self.data.get('controller', {}).get(mode, {}).get(network, {}).get(str(macs))


def relative_error(computed: float, reference: float) -> float:
    return abs(computed - reference) / reference


@dataclass
class DiscrepancyCell:
    """Computed vs published value of one table cell"""
    catalog: str
    groups: str
    table: str
    network: str
    column: str
    macs: int
    computed: float
    reference: Optional[float]

    def to_record(self, tolerance: float) -> Dict:
        error = relative_error(self.computed, self.reference) if self.reference else None
        return {
            "catalog": self.catalog,
            "groups": self.groups,
            "table": self.table,
            "network": self.network,
            "column": self.column,
            "macs": self.macs,
            "computed_millions": round(self.computed, 3),
            "reference_millions": self.reference,
            "relative_error": round(error, 4) if error is not None else None,
            "within_tolerance": error is not None and error <= tolerance,
        }


def discrepancy_frame(cells: Sequence[DiscrepancyCell], tolerance: float) -> pd.DataFrame:
    missing = [c for c in cells if c.reference is None]
    for cell in missing:
        logger.warning(f"No reference value for {cell.table}/{cell.network}/{cell.column} P={cell.macs}")
    return pd.DataFrame([c.to_record(tolerance) for c in cells], columns=DISCREPANCY_COLUMNS)


# Tables whose pass count is judged on one column only; the other columns are informational
SCORED_COLUMNS = {"strategies": Strategy.OPTIMAL.value}


def summarize_discrepancies(frame: pd.DataFrame, min_networks: int) -> pd.DataFrame:
    """
    Per (catalog, groups, table): how many networks have every scored cell within tolerance

    The strategies table is scored on the optimal column alone.
    """
    scored_column = frame["table"].map(SCORED_COLUMNS)
    scored = frame[scored_column.isna() | (frame["column"] == scored_column)]
    per_network = (
        scored.groupby(["catalog", "groups", "table", "network"], sort=False)["within_tolerance"]
        .all()
        .reset_index()
    )
    summary = (
        per_network.groupby(["catalog", "groups", "table"], sort=False)["within_tolerance"]
        .agg(networks_within="sum", networks="count")
        .reset_index()
    )
    summary["networks_within"] = summary["networks_within"].astype(int)
    summary["passed"] = summary["networks_within"] >= min_networks
    return summary


def savings_range_violations(savings: pd.DataFrame,
                             bounds: Dict[int, Tuple[float, float]]) -> List[str]:
    """Savings percentages outside their [low, high] band for the bounded MAC budgets"""
    violations = []
    for record in savings.itertuples(index=False):
        if record.macs not in bounds:
            continue
        low, high = bounds[record.macs]
        if not low <= record.savings_percent <= high:
            violations.append(
                f"{record.network} P={record.macs}: saving {record.savings_percent:.2f}% "
                f"outside [{low}, {high}]"
            )
    return violations


@dataclass
class ReproductionReport:
    """Discrepancy report against the published tables"""
    cells: pd.DataFrame
    summary: pd.DataFrame
    savings: pd.DataFrame
    savings_violations: List[str] = field(default_factory=list)
    ordering_violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (bool(self.summary["passed"].all())
                and not self.savings_violations
                and not self.ordering_violations)

    def render(self, report_format: ReportFormat = ReportFormat.MARKDOWN, decimals: int = 2) -> str:
        sections = [
            ("Summary", render_frame(self.summary, report_format, decimals)),
            ("Cells", render_frame(self.cells, report_format, 4)),
            ("Savings", render_frame(self.savings, report_format, decimals)),
        ]
        parts = []
        for title, body in sections:
            parts.append(f"# {title}\n{body}")
        checks = self.savings_violations + self.ordering_violations
        parts.append("# Checks\n" + ("\n".join(checks) if checks else "all ordering and savings checks hold")
                     + "\n")
        parts.append(f"# Result\n{'PASS' if self.passed else 'FAIL'}\n")
        return "\n".join(parts)


def write_report(text: str, path: str):
    """Write a rendered report as UTF-8 with LF line endings"""
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    logger.info(f"Report written to {output}")
