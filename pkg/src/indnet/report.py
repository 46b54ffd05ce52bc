"""Run records and their tabular summaries."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .bb import SolveStats
from .solution import CoverageStats

SCHEMA_VERSION = 1
METHODS = ("direct", "benders", "sequential", "oracle", "auto-off")
CSV_COLUMNS = ("instance", "method", "percentage", "type", "t", "gap", "n_cuts", "obj_v",
               "demand_R", "demand_S", "demand_RS", "pairs_R", "pairs_S", "pairs_RS")
MISSING = "-"


@dataclass
class RunRecord:
    """Outcome of one solve, serialisable to a small JSON file."""

    instance: str
    method: str
    stats: SolveStats
    coverage: CoverageStats | None = None
    percentage: float | None = None
    selection_type: int | None = None
    seed: int | None = None
    lam: float | None = None
    time_limit: float | None = None
    node_limit: int | None = None
    extra: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["stats"] = self.stats.to_dict()
        for key in ("t", "bound", "gap", "obj_v"):
            v = doc["stats"].get(key)
            if isinstance(v, float) and not math.isfinite(v):
                doc["stats"][key] = str(v)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        version = doc.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema version {version}")
        st = dict(doc["stats"])
        for key in ("t", "bound", "gap", "obj_v"):
            if isinstance(st.get(key), str):
                st[key] = float(st[key])
        cov = doc.get("coverage")
        fields = {k: doc.get(k) for k in ("percentage", "selection_type", "seed", "lam",
                                          "time_limit", "node_limit")}
        return cls(doc["instance"], doc["method"], SolveStats(**st),
                   CoverageStats(**cov) if cov is not None else None,
                   extra=doc.get("extra", {}), **fields)

    def row(self) -> dict:
        """Cells of the summary table, already formatted."""
        cov = self.coverage
        s = self.stats
        has_inc = s.obj_v is not None
        cells = {
            "instance": self.instance,
            "method": self.method,
            "percentage": _num(self.percentage),
            "type": _num(self.selection_type),
            "t": _num(s.t, 2),
            "gap": _num(s.gap, 2),
            "n_cuts": _num(s.n_cuts),
            "obj_v": _num(s.obj_v),
        }
        for key in CSV_COLUMNS[8:]:
            cells[key] = _num(getattr(cov, key)) if has_inc and cov is not None else MISSING
        return cells


def _num(v, digits: int | None = None) -> str:
    if v is None:
        return MISSING
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        if digits is None and v == int(v):
            return str(int(v))
        return f"{v:.{digits if digits is not None else 2}f}"
    return str(v)


def save_record(rec: RunRecord, path: str | Path) -> None:
    Path(path).write_text(json.dumps(rec.to_dict(), indent=1, sort_keys=True) + "\n")


def load_record(path: str | Path) -> RunRecord:
    return RunRecord.from_dict(json.loads(Path(path).read_text()))


def format_csv(records: list[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def format_table(records: list[RunRecord]) -> str:
    rows = [rec.row() for rec in records]
    widths = {c: max([len(c)] + [len(r[c]) for r in rows]) for c in CSV_COLUMNS}
    lines = ["  ".join(c.rjust(widths[c]) for c in CSV_COLUMNS)]
    lines.append("  ".join("-" * widths[c] for c in CSV_COLUMNS))
    for r in rows:
        lines.append("  ".join(r[c].rjust(widths[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[dict]:
    """Inverse of :func:`format_table`, used to compare with the CSV form."""
    lines = [l for l in text.splitlines() if l.strip()]
    header = lines[0].split()
    return [dict(zip(header, l.split())) for l in lines[2:]]
