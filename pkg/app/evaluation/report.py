from __future__ import annotations
from pathlib import Path
from typing import Dict, List, Sequence

from app.core.errors import RecordError
from app.evaluation.protocol import MetricRow

REPORT_HEADER = "metric,bits,value,num_queries"


def format_report(rows: Sequence[MetricRow]) -> str:
    lines = [REPORT_HEADER]
    lines.extend(f"{row.metric},{row.bits},{row.value:.6f},{row.num_queries}" for row in rows)
    return "\n".join(lines) + "\n"


def write_report(path: Path, rows: Sequence[MetricRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(rows), encoding="ascii")
    return path


def read_report(path: Path) -> List[MetricRow]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"report not found: {path}")
    rows = []
    lines = path.read_text(encoding="ascii").splitlines()
    for line_no, line in enumerate(lines[1:], start=2):
        try:
            metric, bits, value, n = line.split(",")
            rows.append(MetricRow(metric, int(bits), float(value), int(n)))
        except ValueError as e:
            raise RecordError(str(e), record=line_no - 2, line=line_no) from e
    return rows


def report_values(rows: Sequence[MetricRow]) -> Dict[str, float]:
    return {row.metric: row.value for row in rows}
