"""Typed tables with CSV, JSON and aligned-text renderings.

Cells hold ``None`` (missing), ``str``, ``int``, ``float`` or a
``(coef, se)`` tuple. Tuples render as ``coef(se)`` in text and CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

DASH = "–"


def fmt_float(x: float, digits: int = 4) -> str:
    if not math.isfinite(x):
        return str(x)
    ax = abs(x)
    if ax != 0 and (ax >= 1e6 or ax < 10 ** -(digits + 2)):
        return f"{x:.1e}"
    return f"{x:.{digits}f}"


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, tuple):
        return f"{_csv_cell(v[0])}({_csv_cell(v[1])})"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_cell(v: Any) -> Any:
    if isinstance(v, tuple):
        return {"coef": _json_cell(v[0]), "se": _json_cell(v[1])}
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


@dataclass(frozen=True)
class ReportTable:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]
    formats: dict[str, Callable[[Any], str]] = field(default_factory=dict, compare=False)
    note: str = ""

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row {r!r} does not match columns {self.columns!r}")

    def column(self, name: str) -> list[Any]:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def row_by(self, column: str, value: Any) -> dict[str, Any]:
        for rec in self.records():
            if rec[column] == value:
                return rec
        raise KeyError(value)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_csv_cell(v) for v in r])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "columns": list(self.columns),
            "rows": [[_json_cell(v) for v in r] for r in self.rows],
        }
        if self.note:
            payload["note"] = self.note
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"

    def _text_cell(self, col: str, v: Any) -> str:
        if col in self.formats:
            return self.formats[col](v)
        if v is None:
            return DASH
        if isinstance(v, tuple):
            return f"{fmt_float(v[0])}({fmt_float(v[1])})"
        if isinstance(v, float):
            return fmt_float(v)
        return str(v)

    def to_text(self) -> str:
        cells = [list(self.columns)] + [
            [self._text_cell(c, v) for c, v in zip(self.columns, r)] for r in self.rows
        ]
        widths = [max(len(row[j]) for row in cells) for j in range(len(self.columns))]
        lines = [self.name, ""]
        for i, row in enumerate(cells):
            lines.append("  ".join(s.ljust(w) for s, w in zip(row, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        if self.note:
            lines += ["", self.note]
        return "\n".join(lines) + "\n"

    def write(self, directory: str | Path, stem: str) -> list[Path]:
        """Write ``stem``.csv/.json/.txt into ``directory``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        out = []
        for ext, text in (("csv", self.to_csv()), ("json", self.to_json()), ("txt", self.to_text())):
            p = d / f"{stem}.{ext}"
            p.write_text(text, encoding="utf-8")
            out.append(p)
        return out
