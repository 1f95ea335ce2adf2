"""Offline replication-style dataset drawn from a known 3-factor model.

Macro columns mirror the variable list of the inflation/activity/rates/FX/
volatility/oil panel and are scaled to its published means and standard
deviations, then integrated back to levels so that the configured transforms
recover them. Equity index levels and a bill yield are generated alongside.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dfm import simulate_dfm
from .kalman import StateSpaceParams
from .panel import MONTH, write_series_csv

# (panel name, raw column, transform, mean, sd); mean and sd in transformed units
MACRO = [
    ("Brazil Inflation", "Brazil CPI", "log_diff", 0.497, 0.392),
    ("Canada Inflation", "Canada CPI", "log_diff", 0.184, 0.388),
    ("China Inflation", "China CPI", "log_diff", 0.165, 0.602),
    ("France Inflation", "France CPI", "log_diff", 0.139, 0.344),
    ("Germany Inflation", "Germany CPI", "log_diff", 0.157, 0.385),
    ("India Inflation", "India CPI", "log_diff", 0.495, 0.729),
    ("Industrial Production (India)", "India IP", "log_diff", 1.871, 2.827),
    ("Industrial Production (Brazil)", "Brazil IP", "log_diff", 0.079, 2.373),
    ("Interest Rate (US)", "US Policy Rate", "first_diff", -0.002, 0.163),
    ("Interest Rate (Japan)", "Japan Policy Rate", "first_diff", -0.001, 0.035),
    ("US Bond Yield Diff", "US 10Y Yield", "first_diff", -0.008, 0.218),
    ("Germany Bond Yield Diff", "Germany 10Y Yield", "first_diff", -0.011, 0.162),
    ("UK Bond Yield Diff", "UK 10Y Yield", "first_diff", -0.005, 0.187),
    ("Brazil FX", "BRL per USD", "log_diff", -0.405, 4.834),
    ("India FX", "INR per USD", "log_diff", -0.223, 1.573),
    ("Japan FX", "JPY per USD", "log_diff", -0.138, 2.687),
    ("UK FX", "GBP per USD", "log_diff", -0.092, 2.478),
    ("VIX Volatility", "VIX", "log_diff", -0.142, 21.385),
    ("WTI Oil Growth", "WTI", "log_diff", 0.355, 10.918),
]
# extra raw column that is mostly missing and must be dropped at assembly
SPARSE = ("Industrial Production (France)", "France IP", "log_diff", 0.05, 1.5)

COUNTRIES = [
    "United States", "United Kingdom", "Japan", "Italy", "India",
    "Germany", "France", "China", "Canada", "Brazil",
]
MARKET = "United States"
YIELD_COLUMN = "US 3M T-bill"

START = "2000-01"
N_LEVELS = 301  # 300 transformed months


def true_params(M: int = len(MACRO), seed: int = 11) -> StateSpaceParams:
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((M, 3)) * np.array([1.0, 0.9, 0.9])
    Tm = np.array([[0.7, 0.1, 0.0], [0.0, 0.5, 0.1], [0.0, 0.0, 0.3]])
    Q = np.diag([1.0, 0.9, 0.8])
    R = np.diag(rng.uniform(0.3, 0.7, M))
    return StateSpaceParams(Z, Tm, R, Q)


def _levels(x: np.ndarray, transform: str, start_level: float) -> np.ndarray:
    if transform == "log_diff":
        return start_level * np.exp(np.concatenate([[0.0], np.cumsum(x / 100.0)]))
    return start_level + np.concatenate([[0.0], np.cumsum(x)])


def build_bundle(out_dir: str | Path, seed: int = 2024) -> dict[str, Path]:
    """Write macro_levels.csv, equity_indices.csv and tbill.csv; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n = N_LEVELS - 1
    params = true_params()
    sim, F = simulate_dfm(params, n, seed=seed, return_factors=True)
    Xstd = sim.values
    ts = np.datetime64(START, "M") + np.arange(N_LEVELS) * MONTH

    raw_names, raw_cols = [], []
    for j, (_, raw, tr, mu, sd) in enumerate(MACRO):
        z = Xstd[:, j]
        x = mu + sd * (z - z.mean()) / z.std(ddof=1)
        start = 100.0 if tr == "log_diff" else 3.0
        raw_names.append(raw)
        raw_cols.append(_levels(x, tr, start))
    # a few gaps in one kept column
    raw_cols[9][[40, 41, 200]] = np.nan
    _, raw, tr, mu, sd = SPARSE
    sparse = _levels(mu + sd * rng.standard_normal(n), tr, 100.0)
    sparse[: int(0.6 * N_LEVELS)] = np.nan
    raw_names.append(raw)
    raw_cols.append(sparse)
    paths = {"macro": out / "macro_levels.csv"}
    write_series_csv(paths["macro"], ts, raw_names, np.column_stack(raw_cols))

    # bill yield in annual percent, strictly positive
    tt = np.arange(N_LEVELS)
    y = np.maximum(2.0 + 1.5 * np.sin(2 * np.pi * tt / 120) + np.cumsum(rng.normal(0, 0.05, N_LEVELS)), 0.05)
    paths["tbill"] = out / "tbill.csv"
    write_series_csv(paths["tbill"], ts, [YIELD_COLUMN], y[:, None])

    # excess returns: market component plus exposure to the macro factors
    Fs = (F - F.mean(axis=0)) / F.std(axis=0, ddof=1)
    mkt = 0.004 + 0.045 * rng.standard_normal(n)
    cols = []
    for c in COUNTRIES:
        if c == MARKET:
            ex = mkt
        else:
            beta = rng.uniform(0.5, 1.1)
            load = rng.normal(0, 0.012, 3)
            ex = 0.001 + beta * mkt + Fs @ load + rng.normal(0, 0.035, n)
        logp = np.log(1000.0) + np.concatenate([[0.0], np.cumsum(ex + np.log1p(y[1:] / 1200))])
        cols.append(np.exp(logp))
    paths["equity"] = out / "equity_indices.csv"
    write_series_csv(paths["equity"], ts, COUNTRIES, np.column_stack(cols))
    return paths


def replication_config(data_dir: str = "data/synthetic", factor_counts=(1, 2, 3, 4, 5, 6, 7)) -> dict:
    """Config dict (YAML-serialisable) for the bundled dataset."""
    series = [
        {"name": name, "file": "macro", "column": raw, "transform": tr} | ({"scale": 100.0} if tr == "log_diff" else {})
        for name, raw, tr, _, _ in MACRO + [SPARSE]
    ]
    return {
        "seed": 20240101,
        "output_dir": "out",
        "drop_threshold": 0.30,
        "factor_counts": list(factor_counts),
        "data": {
            "macro": f"{data_dir}/macro_levels.csv",
            "equity": f"{data_dir}/equity_indices.csv",
            "tbill": f"{data_dir}/tbill.csv",
        },
        "series": series,
        "returns": {
            "file": "equity",
            "yield_file": "tbill",
            "yield_column": YIELD_COLUMN,
            "assets": COUNTRIES,
        },
        "pricing": {"factor_counts": [3, 4, 5], "hac_lags": None, "significance": 0.05, "market_proxy": MARKET},
    }
