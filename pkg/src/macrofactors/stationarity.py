"""ADF, KPSS and Zivot-Andrews tests plus the per-column decision pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from statsmodels.tsa.adfvalues import mackinnonp

from .errors import DegenerateInputError, InputError, MacroFactorError, SizeError
from .panel import Panel, TimeSeries
from .report import ReportTable

ALPHA = 0.05

# KPSS critical values, upper tail.
_KPSS_CRIT = {
    "level": (0.347, 0.463, 0.574, 0.739),
    "trend": (0.119, 0.146, 0.176, 0.216),
}
_KPSS_P = (0.10, 0.05, 0.025, 0.01)

# Zivot-Andrews (1992) asymptotic critical values at 1%, 2.5%, 5%, 10%.
_ZA_CRIT = {
    "intercept": (-5.34, -5.02, -4.80, -4.58),
    "trend": (-4.93, -4.67, -4.42, -4.11),
    "both": (-5.57, -5.30, -5.08, -4.82),
}


class Verdict(str, Enum):
    STATIONARY = "Stationary"
    NON_STATIONARY = "Non-stationary"
    STATIONARY_WITH_BREAK = "Stationary with structural break"


@dataclass(frozen=True)
class UnitRootResult:
    test: str
    statistic: float
    pvalue: float
    lags: int
    verdict: Verdict
    nobs: int
    break_index: int | None = None
    p_bracket: str | None = None
    critical_values: dict | None = None

    def __post_init__(self):
        if (self.break_index is not None) != (self.test == "ZivotAndrews"):
            raise ValueError("break_index is set exactly for Zivot-Andrews results")


def _contiguous(series: TimeSeries | np.ndarray) -> tuple[np.ndarray, int]:
    """Longest run of non-missing values and its offset in the input."""
    v = np.asarray(series.values if isinstance(series, TimeSeries) else series, float)
    ok = ~np.isnan(v)
    best, best_start, start = 0, 0, None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best:
                best, best_start = i - start, start
            start = None
    y = v[best_start:best_start + best]
    if y.size and np.ptp(y) == 0:
        raise DegenerateInputError("constant series: unit-root tests are undefined")
    return y, best_start


def _tstat(dep: np.ndarray, X: np.ndarray, col: int = 0) -> tuple[float, float]:
    """t-ratio on ``X[:, col]`` and the residual sum of squares."""
    n, k = X.shape
    q, r = np.linalg.qr(X)
    qy = q.T @ dep
    beta = np.linalg.solve(r, qy)
    resid = dep - X @ beta
    ssr = float(resid @ resid)
    rinv = np.linalg.inv(r)
    var = ssr / (n - k) * float(rinv[col] @ rinv[col])
    if var <= 0:
        raise DegenerateInputError("zero residual variance in test regression")
    return float(beta[col] / math.sqrt(var)), ssr


def _adf_design(y: np.ndarray, p: int, start: int, trend: bool) -> tuple[np.ndarray, np.ndarray]:
    """Rows t = start..n-1 of dy; columns [y_{t-1}, dy_{t-1..t-p}, const, (t)]."""
    dy = np.diff(y)
    rows = np.arange(start, dy.size)
    cols = [y[rows]]
    cols += [dy[rows - j] for j in range(1, p + 1)]
    cols.append(np.ones(rows.size))
    if trend:
        cols.append((rows + 1).astype(float))
    return dy[rows], np.column_stack(cols)


def default_adf_maxlag(nobs: int) -> int:
    return int(12 * (nobs / 100) ** 0.25)


def select_adf_lag(y: np.ndarray, max_lags: int, trend: bool) -> int:
    """AIC lag choice on the common sample that the longest lag allows."""
    best, best_p = math.inf, 0
    for p in range(max_lags + 1):
        dep, X = _adf_design(y, p, max_lags, trend)
        n, k = X.shape
        _, ssr = _tstat(dep, X)
        aic = n * math.log(ssr / n) + 2 * k
        if aic < best - 1e-12:
            best, best_p = aic, p
    return best_p


def adf_test(
    series: TimeSeries | np.ndarray,
    max_lags: int | None = None,
    deterministic: str = "constant",
    lags: int | None = None,
) -> UnitRootResult:
    """Augmented Dickey-Fuller t-test with AIC lag selection.

    ``deterministic`` is ``"constant"`` or ``"constant+trend"``. Pass ``lags``
    to skip the search. p-values come from MacKinnon's response surface,
    clamped to [1e-4, 0.9999].
    """
    if deterministic not in ("constant", "constant+trend"):
        raise InputError(f"unknown deterministic term {deterministic!r}")
    trend = deterministic == "constant+trend"
    y, _ = _contiguous(series)
    nobs = y.size
    if max_lags is None:
        max_lags = default_adf_maxlag(nobs)
    # keep enough rows for the widest regression
    max_lags = max(0, min(max_lags, (nobs - 1) // 2 - 3 - int(trend)))
    if lags is None:
        if nobs - 1 - max_lags < 20:
            raise SizeError(f"ADF needs >= 20 usable observations, series has {nobs}")
        lags = select_adf_lag(y, max_lags, trend)
    dep, X = _adf_design(y, lags, lags, trend)
    if dep.size < 20:
        raise SizeError(f"ADF needs >= 20 usable observations, got {dep.size}")
    stat, _ = _tstat(dep, X)
    p = float(np.clip(mackinnonp(stat, regression="ct" if trend else "c", N=1), 1e-4, 0.9999))
    verdict = Verdict.STATIONARY if p <= ALPHA else Verdict.NON_STATIONARY
    return UnitRootResult("ADF", stat, p, lags, verdict, int(dep.size))


def default_kpss_lags(nobs: int) -> int:
    return int(4 * (nobs / 100) ** (2 / 9))


def kpss_test(
    series: TimeSeries | np.ndarray, deterministic: str = "level", lags: int | None = None
) -> UnitRootResult:
    """KPSS LM statistic with a Bartlett-weighted long-run variance.

    The null is stationarity; p is interpolated in the KPSS table and
    clamped to [0.01, 0.10].
    """
    if deterministic not in _KPSS_CRIT:
        raise InputError(f"unknown deterministic term {deterministic!r}")
    y, _ = _contiguous(series)
    n = y.size
    if n < 20:
        raise SizeError(f"KPSS needs >= 20 observations, series has {n}")
    if deterministic == "level":
        e = y - y.mean()
    else:
        t = np.arange(1, n + 1, dtype=float)
        X = np.column_stack([np.ones(n), t])
        e = y - X @ np.linalg.lstsq(X, y, rcond=None)[0]
    if lags is None:
        lags = default_kpss_lags(n)
    lags = min(lags, n - 1)
    s2 = float(e @ e) / n
    for j in range(1, lags + 1):
        s2 += 2 * (1 - j / (lags + 1)) * float(e[j:] @ e[:-j]) / n
    if s2 <= 0:
        raise DegenerateInputError("non-positive long-run variance in KPSS")
    S = np.cumsum(e)
    stat = float(S @ S) / (n * n * s2)
    crit = _KPSS_CRIT[deterministic]
    p = float(np.interp(stat, crit, _KPSS_P))
    verdict = Verdict.STATIONARY if p >= ALPHA else Verdict.NON_STATIONARY
    cv = dict(zip(("10%", "5%", "2.5%", "1%"), crit))
    return UnitRootResult("KPSS", stat, p, lags, verdict, n, critical_values=cv)


def _za_bracket(stat: float, crit: tuple[float, ...]) -> tuple[float, str]:
    c1, _, c5, c10 = crit
    if stat < c1:
        return 0.01, "<0.01"
    if stat < c5:
        return 0.05, "0.01-0.05"
    if stat < c10:
        return 0.10, "0.05-0.10"
    return 0.10, ">0.10"


def zivot_andrews(
    series: TimeSeries | np.ndarray,
    break_model: str = "intercept",
    trim: float = 0.15,
    lags: int | None = None,
    max_lags: int | None = None,
) -> UnitRootResult:
    """Unit-root test against a stationary alternative with one endogenous break.

    The regression carries a constant and a linear trend plus the break
    dummies of ``break_model``. The lag order is chosen once, by AIC on the
    no-break regression with constant and trend, and then held fixed over the
    break search. ``break_index`` is the first observation of the new regime,
    counted in the input's index.
    """
    if break_model not in _ZA_CRIT:
        raise InputError(f"unknown break model {break_model!r}")
    if not 0 < trim < 0.5:
        raise InputError(f"trim must be in (0, 0.5), got {trim}")
    y, offset = _contiguous(series)
    n = y.size
    if n < 50:
        raise SizeError(f"Zivot-Andrews needs >= 50 observations, series has {n}")
    if lags is None:
        lags = adf_test(y, max_lags=max_lags, deterministic="constant+trend").lags
    dep, base = _adf_design(y, lags, lags, trend=True)
    tpos = np.arange(lags + 1, n)  # index in y of each regression row
    lo, hi = int(math.ceil(trim * n)), int(math.floor((1 - trim) * n))
    best, best_b = math.inf, lo
    for b in range(lo, hi + 1):
        extra = []
        if break_model in ("intercept", "both"):
            extra.append((tpos >= b).astype(float))
        if break_model in ("trend", "both"):
            extra.append(np.where(tpos >= b, tpos - b + 1, 0).astype(float))
        X = np.column_stack([base, *extra])
        if np.ptp(extra[0]) == 0:
            continue
        stat, _ = _tstat(dep, X)
        if stat < best:
            best, best_b = stat, b
    crit = _ZA_CRIT[break_model]
    p, bracket = _za_bracket(best, crit)
    verdict = Verdict.STATIONARY_WITH_BREAK if best < crit[2] else Verdict.NON_STATIONARY
    cv = dict(zip(("1%", "2.5%", "5%", "10%"), crit))
    return UnitRootResult(
        "ZivotAndrews", best, p, lags, verdict, int(dep.size),
        break_index=best_b + offset, p_bracket=bracket, critical_values=cv,
    )


STATIONARITY_COLUMNS = (
    "Series",
    "ADF p-value",
    "KPSS p-value",
    "Zivot–Andrews Statistic",
    "Zivot–Andrews p-value",
    "Conclusion",
)


def _needs_break_test(adf: UnitRootResult, kpss: UnitRootResult, trigger: str) -> bool:
    if trigger == "adf":
        return adf.verdict is Verdict.NON_STATIONARY
    return adf.verdict is not kpss.verdict


def classify_column(
    series: TimeSeries, trigger: str = "adf", break_model: str = "intercept", trim: float = 0.15
) -> tuple:
    """One Table-2 row. Errors are caught and reported in the conclusion cell."""
    try:
        adf = adf_test(series)
        kpss = kpss_test(series)
        if not _needs_break_test(adf, kpss, trigger):
            verdict = adf.verdict if trigger == "adf" else kpss.verdict
            return (series.name, adf.pvalue, kpss.pvalue, None, None, verdict.value)
        za = zivot_andrews(series, break_model=break_model, trim=trim)
        return (series.name, adf.pvalue, kpss.pvalue, za.statistic, za.p_bracket, za.verdict.value)
    except MacroFactorError as exc:
        return (series.name, None, None, None, None, f"error: {exc}")


def stationarity_pipeline(
    panel: Panel, trigger: str = "adf", break_model: str = "intercept", trim: float = 0.15
) -> ReportTable:
    """ADF and KPSS on every column; Zivot-Andrews where ``trigger`` says so.

    ``trigger="adf"``: run the break test whenever ADF fails to reject the
    unit root.
    ``trigger="conflict"``: run it only when ADF and KPSS disagree.
    """
    if trigger not in ("adf", "conflict"):
        raise InputError(f"unknown trigger {trigger!r}")
    rows = tuple(classify_column(s, trigger, break_model, trim) for s in panel.columns)

    def p4(v):
        if v is None:
            return "–"
        return "0.0000" if v < 5e-4 else f"{v:.4f}"

    return ReportTable(
        "Unit Root Test Results",
        STATIONARITY_COLUMNS,
        rows,
        formats={
            "ADF p-value": p4,
            "KPSS p-value": p4,
            "Zivot–Andrews Statistic": lambda v: "–" if v is None else f"{v:.3f}",
            "Zivot–Andrews p-value": lambda v: "–" if v is None else str(v),
        },
    )
