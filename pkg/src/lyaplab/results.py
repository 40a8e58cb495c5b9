"""Result tables and their CSV / JSON serialization."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "lyaplab-result/1"


@dataclass
class ResultTable:
    schema: str
    scenario: dict
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = list(self.columns)
        self.rows = [[_clean(v) for v in row] for row in self.rows]
        self.summary = _clean(self.summary)
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise ValueError(f"row {i} has {len(row)} values for {len(self.columns)} columns")

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [row[j] for row in self.rows]


def _clean(v):
    """Plain JSON values; non-finite floats become None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def to_json(table: ResultTable) -> str:
    obj = {"schema": table.schema, "scenario": table.scenario, "columns": table.columns,
           "rows": [dict(zip(table.columns, row)) for row in table.rows], "summary": table.summary}
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit(table: ResultTable, fmt: str = "csv", path: str | Path | None = None) -> str:
    """Serialize ``table``; written to ``path`` when given, returned always."""
    if fmt == "csv":
        text = to_csv(table)
    elif fmt == "json":
        text = to_json(table)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        p = Path(path)
        try:
            p.write_text(text, newline="")
        except OSError as exc:
            raise OSError(f"cannot write {p}: {exc.strerror or exc}") from exc
    return text


def read_json(text_or_path) -> ResultTable:
    text = str(text_or_path)
    if not text.lstrip().startswith("{"):
        text = Path(text).read_text()
    obj = json.loads(text)
    cols = obj["columns"]
    rows = [[r.get(c) for c in cols] for r in obj["rows"]]
    return ResultTable(obj["schema"], obj["scenario"], cols, rows, obj["summary"])
