"""Monthly series, the assembled panel, and the stationarity-inducing transforms."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, AssemblyError, DomainError, InputError, SizeError
from .report import ReportTable

MONTH = np.timedelta64(1, "M")


def _frozen(a, dtype=None) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def to_months(dates: Iterable) -> np.ndarray:
    """Parse ISO dates (any day of the month) to ``datetime64[M]``."""
    return np.array([np.datetime64(str(d)[:10], "D") for d in dates]).astype("datetime64[M]")


def month_end(ts: np.ndarray) -> list[str]:
    ends = (ts.astype("datetime64[M]") + MONTH).astype("datetime64[D]") - np.timedelta64(1, "D")
    return [str(d) for d in ends]


def _check_monthly(name: str, ts: np.ndarray) -> None:
    if len(ts) > 1 and not np.all(np.diff(ts) == MONTH):
        raise AlignmentError(f"{name}: timestamps must be consecutive months")


@dataclass(frozen=True)
class TimeSeries:
    """One monthly series; missing observations are NaN."""

    name: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = _frozen(self.timestamps, "datetime64[M]")
        vals = _frozen(self.values, float)
        if ts.shape != vals.shape or vals.ndim != 1:
            raise SizeError(f"{self.name}: {len(ts)} timestamps but {vals.shape} values")
        _check_monthly(self.name, ts)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_start(cls, name: str, start: str, values: Sequence[float]) -> "TimeSeries":
        t0 = np.datetime64(start[:7], "M")
        return cls(name, t0 + np.arange(len(values)) * MONTH, np.asarray(values, float))

    @property
    def mask(self) -> np.ndarray:
        """True where the observation is missing."""
        return np.isnan(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def renamed(self, name: str) -> "TimeSeries":
        return TimeSeries(name, self.timestamps, self.values)


@dataclass(frozen=True)
class StandardizationRecord:
    names: tuple[str, ...]
    means: tuple[float, ...]
    sds: tuple[float, ...]

    def invert(self, panel: "Panel") -> "Panel":
        vals = panel.values * np.array(self.sds) + np.array(self.means)
        return panel.replace(values=vals, standardization=None)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "means": list(self.means), "sds": list(self.sds)}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationRecord":
        return cls(tuple(d["names"]), tuple(map(float, d["means"])), tuple(map(float, d["sds"])))


@dataclass(frozen=True)
class Panel:
    """T_obs x M matrix on a shared monthly axis; NaN marks missing."""

    names: tuple[str, ...]
    timestamps: np.ndarray
    values: np.ndarray
    dropped: tuple[str, ...] = ()
    provenance: dict = field(default_factory=dict, compare=False)
    standardization: StandardizationRecord | None = None

    def __post_init__(self):
        names = tuple(self.names)
        ts = _frozen(self.timestamps, "datetime64[M]")
        vals = _frozen(self.values, float)
        if vals.ndim != 2 or vals.shape != (len(ts), len(names)):
            raise SizeError(f"panel values {vals.shape} vs {len(ts)} timestamps x {len(names)} names")
        if len(names) < 1 or len(ts) < 2:
            raise SizeError(f"panel needs M >= 1 and T_obs >= 2, got {vals.shape}")
        if len(set(names)) != len(names):
            raise InputError(f"duplicate column names in {names}")
        _check_monthly("panel", ts)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def columns(self) -> list[TimeSeries]:
        return [TimeSeries(n, self.timestamps, self.values[:, j]) for j, n in enumerate(self.names)]

    def _index(self, name: str) -> int:
        if name not in self.names:
            raise InputError(f"no column named {name!r}")
        return self.names.index(name)

    def column(self, name: str) -> TimeSeries:
        j = self._index(name)
        return TimeSeries(name, self.timestamps, self.values[:, j])

    def select(self, names: Sequence[str]) -> "Panel":
        idx = [self._index(n) for n in names]
        return self.replace(names=tuple(names), values=self.values[:, idx], standardization=None)

    def replace(self, **kw) -> "Panel":
        d = dict(
            names=self.names,
            timestamps=self.timestamps,
            values=self.values,
            dropped=self.dropped,
            provenance=dict(self.provenance),
            standardization=self.standardization,
        )
        d.update(kw)
        return Panel(**d)

    @classmethod
    def from_series(cls, series: Sequence[TimeSeries]) -> "Panel":
        ts = series[0].timestamps
        for s in series[1:]:
            if not np.array_equal(s.timestamps, ts):
                raise AlignmentError(f"{s.name} is not on the same timestamp axis as {series[0].name}")
        return cls(tuple(s.name for s in series), ts, np.column_stack([s.values for s in series]))


# -- transforms -------------------------------------------------------------


def log_diff(series: TimeSeries, scale: float = 100.0) -> TimeSeries:
    """``scale * (ln v[t] - ln v[t-1])``; one observation shorter than the input."""
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")
    if len(series) < 2:
        raise SizeError(f"{series.name}: need at least 2 observations")
    v = series.values
    bad = ~np.isnan(v) & (v <= 0)
    if bad.any():
        i = int(np.argmax(bad))
        raise DomainError(
            f"{series.name}: non-positive value {v[i]} at {series.timestamps[i]} in log transform"
        )
    lv = np.log(v)
    return TimeSeries(series.name, series.timestamps[1:], scale * np.diff(lv))


def first_diff(series: TimeSeries) -> TimeSeries:
    if len(series) < 2:
        raise SizeError(f"{series.name}: need at least 2 observations")
    return TimeSeries(series.name, series.timestamps[1:], np.diff(series.values))


def excess_return(index: TimeSeries, annual_yield_pct: TimeSeries) -> TimeSeries:
    """Monthly log excess return of a price index over a bill yield quoted in annual percent.

    ``ln(P_t / P_{t-1}) - ln(1 + y_t / 1200)``, where the yield observed in
    month t is the risk-free rate for that month.
    """
    if not np.array_equal(index.timestamps, annual_yield_pct.timestamps):
        raise AlignmentError(
            f"{index.name} and {annual_yield_pct.name} are not on the same timestamp axis"
        )
    gross = log_diff(index, scale=1.0).values
    rf = np.log1p(annual_yield_pct.values[1:] / 1200.0)
    return TimeSeries(index.name, index.timestamps[1:], gross - rf)


TRANSFORMS = {"log_diff", "first_diff", "excess_return", "none"}


def standardize(panel: Panel) -> tuple[Panel, StandardizationRecord]:
    """Center and scale each column (sample sd) over its non-missing entries."""
    vals = panel.values
    n = np.sum(~np.isnan(vals), axis=0)
    short = [name for name, k in zip(panel.names, n) if k < 2]
    if short:
        raise SizeError(f"columns with fewer than 2 observations: {short}")
    mu = np.nanmean(vals, axis=0)
    sd = np.nanstd(vals, axis=0, ddof=1)
    flat = [name for name, s, m in zip(panel.names, sd, mu) if not s > 1e-12 * max(1.0, abs(m))]
    if flat:
        raise DomainError(f"zero-variance columns cannot be standardized: {flat}")
    z = (vals - mu) / sd
    rec = StandardizationRecord(panel.names, tuple(map(float, mu)), tuple(map(float, sd)))
    return panel.replace(values=z, standardization=rec), rec


def align_and_assemble(
    series: Sequence[TimeSeries],
    max_missing_fraction: float = 0.30,
    how: str = "intersection",
) -> Panel:
    """Put series on one monthly grid, dropping heavily-missing columns.

    The missing fraction of each column is measured over the union of all
    observed months, so a series that starts late counts as missing before
    its start. Columns above ``max_missing_fraction`` are dropped and listed
    in ``Panel.dropped``. Among the kept columns, ``how="intersection"``
    keeps the months between the latest first observation and the earliest
    last observation; ``"union"`` spans all of them. Interior gaps stay NaN.
    """
    if not 0 <= max_missing_fraction < 1:
        raise InputError(f"max_missing_fraction must be in [0, 1), got {max_missing_fraction}")
    if how not in ("intersection", "union"):
        raise InputError(f"unknown alignment mode {how!r}")
    if not series:
        raise AssemblyError("no series to assemble")
    spans = []
    for s in series:
        obs = np.flatnonzero(~s.mask)
        if obs.size == 0:
            raise AssemblyError(f"{s.name} has no observations")
        spans.append((s.timestamps[obs[0]], s.timestamps[obs[-1]]))
    lo, hi = min(a for a, _ in spans), max(b for _, b in spans)
    grid = np.arange(lo, hi + MONTH, MONTH)
    kept, cols, kept_spans, dropped = [], [], [], []
    for s, span in zip(series, spans):
        col = np.full(len(grid), np.nan)
        pos = (s.timestamps - lo).astype(int)
        ok = (pos >= 0) & (pos < len(grid))
        col[pos[ok]] = s.values[ok]
        if np.isnan(col).mean() > max_missing_fraction:
            dropped.append(s.name)
        else:
            kept.append(s.name)
            cols.append(col)
            kept_spans.append(span)
    if not kept:
        raise AssemblyError(f"every column exceeds the missing threshold {max_missing_fraction}")
    if how == "intersection":
        start, end = max(a for a, _ in kept_spans), min(b for _, b in kept_spans)
    else:
        start, end = min(a for a, _ in kept_spans), max(b for _, b in kept_spans)
    if start > end:
        raise AssemblyError(f"date ranges do not overlap (latest start {start}, earliest end {end})")
    keep = (grid >= start) & (grid <= end)
    return Panel(tuple(kept), grid[keep], np.column_stack(cols)[keep], dropped=tuple(dropped))


def descriptive_stats(panel: Panel) -> ReportTable:
    rows = []
    for name, col in zip(panel.names, panel.values.T):
        x = col[~np.isnan(col)]
        if x.size == 0:
            rows.append((name, None, None, None, None))
            continue
        sd = float(np.std(x, ddof=1)) if x.size > 1 else None
        rows.append((name, float(x.mean()), sd, float(x.min()), float(x.max())))
    return ReportTable(
        "Descriptive statistics of the panel data",
        ("Variable", "Mean", "Std Dev", "Min", "Max"),
        tuple(rows),
        formats={c: (lambda v: "–" if v is None else f"{v:.3f}") for c in ("Mean", "Std Dev", "Min", "Max")},
    )


# -- I/O --------------------------------------------------------------------


def read_csv(path: str | Path) -> list[TimeSeries]:
    """Read a date-indexed CSV: first column ISO month-end dates, empty cell = missing."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise InputError(f"{path}: need a header with a date column and at least one series")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        ts = to_months(r[0] for r in body)
    except ValueError as exc:
        raise InputError(f"{path}: bad date: {exc}") from None
    out = []
    for j, name in enumerate(header[1:], start=1):
        vals = []
        for i, r in enumerate(body):
            cell = r[j].strip() if j < len(r) else ""
            try:
                vals.append(float(cell) if cell else math.nan)
            except ValueError:
                raise InputError(f"{path}: row {i + 2}, column {name!r}: not a number: {cell!r}") from None
        out.append(TimeSeries(name.strip(), ts, np.array(vals)))
    return out


def write_series_csv(path: str | Path, timestamps: np.ndarray, names: Sequence[str], values: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *names])
        for d, row in zip(month_end(timestamps), np.atleast_2d(values)):
            w.writerow([d, *("" if np.isnan(v) else repr(float(v)) for v in row)])


def write_panel(panel: Panel, path: str | Path) -> None:
    """Write ``path`` (CSV) plus a ``.json`` sidecar with metadata."""
    path = Path(path)
    write_series_csv(path, panel.timestamps, panel.names, panel.values)
    meta = {
        "columns": list(panel.names),
        "shape": list(panel.shape),
        "dropped": list(panel.dropped),
        "provenance": panel.provenance,
        "standardization": panel.standardization.to_dict() if panel.standardization else None,
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_panel(path: str | Path) -> Panel:
    path = Path(path)
    series = read_csv(path)
    panel = Panel.from_series(series)
    side = path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
        rec = meta.get("standardization")
        panel = panel.replace(
            dropped=tuple(meta.get("dropped", ())),
            provenance=meta.get("provenance", {}),
            standardization=StandardizationRecord.from_dict(rec) if rec else None,
        )
    return panel
