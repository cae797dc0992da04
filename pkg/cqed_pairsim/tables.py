from __future__ import annotations

import csv
import io
import logging
import math
import numbers
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Sequence

from .errors import NumericalError
from .schemas import units_comment
from .utils import ensure_dir

logger = logging.getLogger("cqed_pairsim.tables")

FLOAT_FORMAT = ".12g"


def format_cell(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, numbers.Integral):
        return str(int(value))
    out = format(float(value), FLOAT_FORMAT)
    # keep '-0' out of the files
    return "0" if out == "-0" else out


@dataclass
class CsvTable:
    """Rectangular table of finite numbers (plus label columns) with '#' comment lines."""

    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    comments: List[str] = field(default_factory=list)
    name: str = ""

    def __post_init__(self) -> None:
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"duplicate column names in {self.columns}")
        for row in self.rows:
            self._check_row(row)

    def __len__(self) -> int:
        return len(self.rows)

    def _check_row(self, row: Sequence[Any]) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        for column, value in zip(self.columns, row):
            if isinstance(value, str):
                continue
            if not math.isfinite(float(value)):
                logger.error("Non-finite value in column %s: %r (row %s)", column, value, list(row))
                raise NumericalError(f"non-finite value {value!r} in column {column!r}")

    def append(self, row: Sequence[Any]) -> None:
        row = list(row)
        self._check_row(row)
        self.rows.append(row)

    def column(self, name: str) -> List[Any]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def render(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {units_comment(self.columns)}\n")
        for c in self.comments:
            buf.write(f"# {c}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows([format_cell(v) for v in row] for row in self.rows)
        return buf.getvalue()

    def write(self, path: str | Path) -> Path:
        out = Path(path).expanduser()
        ensure_dir(out.parent)
        out.write_text(self.render(), encoding="utf-8")
        logger.info("Wrote %d rows to %s", len(self.rows), out)
        return out


def read_csv(text: str) -> CsvTable:
    """Parse rendered CSV back into a table; numbers become floats."""
    comments: List[str] = []
    body: List[str] = []
    for line in text.splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line.strip():
            body.append(line)
    if not body:
        raise ValueError("CSV text has no header row")
    records = csv.reader(body)
    columns = next(records)
    rows: List[List[Any]] = []
    for record in records:
        cells: List[Any] = []
        for cell in record:
            try:
                cells.append(float(cell))
            except ValueError:
                cells.append(cell)
        rows.append(cells)
    # the units line is regenerated by render()
    return CsvTable(columns=columns, rows=rows, comments=[c for c in comments if not c.startswith("units:")])
