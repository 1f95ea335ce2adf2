"""CAPM time-series regressions and Fama-MacBeth two-pass risk premia."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import stats

from .errors import InputError, SingularDesignError, SizeError
from .panel import Panel, TimeSeries
from .report import ReportTable

log = logging.getLogger(__name__)

MAX_DESIGN_COND = 1e10
SIGNIFICANCE_T = 1.96


@dataclass(frozen=True, eq=False)
class RegressionResult:
    coef: np.ndarray
    se: np.ndarray
    tstat: np.ndarray
    pvalue: np.ndarray
    r2: float
    adj_r2: float
    nobs: int
    resid: np.ndarray


def ols(y: np.ndarray, X: np.ndarray) -> RegressionResult:
    """Least squares via QR. ``X`` must already contain the intercept column."""
    y = np.asarray(y, float)
    X = np.asarray(X, float)
    n, k = X.shape
    if n <= k:
        raise SizeError(f"need more observations ({n}) than regressors ({k})")
    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > MAX_DESIGN_COND:
        raise SingularDesignError(f"design matrix is rank deficient (condition {s[0] / max(s[-1], 1e-300):.3g})")
    q, r = np.linalg.qr(X)
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    ssr = float(resid @ resid)
    dof = n - k
    rinv = np.linalg.inv(r)
    se = np.sqrt(ssr / dof * np.sum(rinv**2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    p = 2 * stats.t.sf(np.abs(t), dof)
    yc = y - y.mean()
    sst = float(yc @ yc)
    if sst > 0:
        r2 = min(max(1 - ssr / sst, 0.0), 1.0)
    else:
        r2 = 1.0 if ssr <= 1e-30 else 0.0
    adj = 1 - (1 - r2) * (n - 1) / dof
    return RegressionResult(coef, se, t, p, r2, adj, n, resid)


def with_intercept(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, float)
    if F.ndim == 1:
        F = F[:, None]
    return np.column_stack([np.ones(len(F)), F])


# -- CAPM ---------------------------------------------------------------------

CAPM_COLUMNS = ("Country", "Alpha", "Alpha P Value", "Beta", "Beta P Value", "R²")


def capm_regress(excess_returns: Panel, market_excess: TimeSeries, min_obs: int = 30) -> ReportTable:
    """Regress each column on an intercept and the market excess return."""
    common, ia, im = np.intersect1d(excess_returns.timestamps, market_excess.timestamps, return_indices=True)
    m = market_excess.values[im]
    rows, errors = [], []
    for j, name in enumerate(excess_returns.names):
        y = excess_returns.values[ia, j]
        ok = ~np.isnan(y) & ~np.isnan(m)
        if ok.sum() < min_obs:
            errors.append(f"{name}: only {int(ok.sum())} overlapping observations (< {min_obs})")
            rows.append((name, None, None, None, None, None))
            continue
        try:
            res = ols(y[ok], with_intercept(m[ok]))
        except (SingularDesignError, SizeError) as exc:
            errors.append(f"{name}: {exc}")
            rows.append((name, None, None, None, None, None))
            continue
        rows.append((
            name,
            float(res.coef[0]), float(res.pvalue[0]),
            float(res.coef[1]), float(res.pvalue[1]),
            float(res.r2),
        ))
    six = lambda v: "–" if v is None else f"{v:.6f}"  # noqa: E731
    return ReportTable(
        "CAPM Regression Results for Each Country",
        CAPM_COLUMNS,
        tuple(rows),
        formats={
            "Alpha": six,
            "Alpha P Value": six,
            "Beta": six,
            "Beta P Value": lambda v: "–" if v is None else f"{v:.6e}",
            "R²": six,
        },
        note="\n".join(errors),
    )


# -- Fama-MacBeth ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BetaMatrix:
    names: tuple[str, ...]
    betas: np.ndarray  # N x K
    intercepts: np.ndarray
    se: np.ndarray
    r2: np.ndarray
    nobs: np.ndarray
    excluded: dict = field(default_factory=dict)

    @property
    def n_factors(self) -> int:
        return self.betas.shape[1]


def _returns_matrix(excess_returns) -> tuple[tuple[str, ...], np.ndarray, np.ndarray | None]:
    if isinstance(excess_returns, Panel):
        return excess_returns.names, excess_returns.values, excess_returns.timestamps
    R = np.atleast_2d(np.asarray(excess_returns, float))
    return tuple(f"asset{i + 1}" for i in range(R.shape[1])), R, None


def first_pass_betas(excess_returns, factors: np.ndarray, min_obs: int | None = None) -> BetaMatrix:
    """Full-sample time-series regression of each asset on an intercept and the factors.

    Missing return months are dropped per asset. Assets with fewer than
    ``K + 10`` usable months are excluded and listed in ``excluded``.
    """
    names, R, _ = _returns_matrix(excess_returns)
    F = np.asarray(factors, float)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != R.shape[0]:
        raise SizeError(f"factors have {F.shape[0]} rows, returns have {R.shape[0]}")
    K = F.shape[1]
    min_obs = K + 10 if min_obs is None else min_obs
    frow = np.all(np.isfinite(F), axis=1)
    kept, B, A, SE, R2, N = [], [], [], [], [], []
    excluded = {}
    for j, name in enumerate(names):
        ok = frow & ~np.isnan(R[:, j])
        if ok.sum() < min_obs:
            excluded[name] = f"{int(ok.sum())} usable observations < {min_obs}"
            log.warning("first pass: excluding %s (%s)", name, excluded[name])
            continue
        res = ols(R[ok, j], with_intercept(F[ok]))
        kept.append(name)
        A.append(res.coef[0])
        B.append(res.coef[1:])
        SE.append(res.se[1:])
        R2.append(res.r2)
        N.append(res.nobs)
    if not kept:
        raise SizeError("no asset has enough observations for the first pass")
    return BetaMatrix(tuple(kept), np.array(B), np.array(A), np.array(SE), np.array(R2), np.array(N), excluded)


@dataclass(frozen=True, eq=False)
class CrossSectionalLambdas:
    """Per-period second-pass estimates for the periods that could be run."""

    periods: np.ndarray  # row index into the returns matrix
    timestamps: np.ndarray | None
    lambdas: np.ndarray  # n_valid x (K+1), intercept first
    r2: np.ndarray
    adj_r2: np.ndarray
    n_assets: np.ndarray
    pricing_errors: np.ndarray  # T x N, NaN where absent or skipped
    skipped: tuple[tuple[int, str], ...]
    mean_return_r2: float | None
    asset_names: tuple[str, ...]


def second_pass(excess_returns, betas: BetaMatrix) -> CrossSectionalLambdas:
    """Cross-sectional regression of each period's returns on an intercept and the betas."""
    names, R, ts = _returns_matrix(excess_returns)
    idx = [names.index(n) for n in betas.names]
    R = R[:, idx]
    K = betas.n_factors
    D = with_intercept(betas.betas)
    periods, lams, r2, adj, counts, skipped = [], [], [], [], [], []
    U = np.full(R.shape, np.nan)
    for t in range(R.shape[0]):
        ok = ~np.isnan(R[t])
        if ok.sum() < K + 2:
            skipped.append((t, f"{int(ok.sum())} assets < K+2"))
            continue
        try:
            res = ols(R[t, ok], D[ok])
        except SingularDesignError as exc:
            skipped.append((t, str(exc)))
            continue
        periods.append(t)
        lams.append(res.coef)
        r2.append(res.r2)
        adj.append(res.adj_r2)
        counts.append(int(ok.sum()))
        U[t, ok] = res.resid
    for t, why in skipped:
        log.info("second pass: skipped period %d (%s)", t, why)
    mean_r2 = None
    mret = np.nanmean(R, axis=0)
    if len(mret) > K + 1:
        try:
            mean_r2 = ols(mret, D).r2
        except SingularDesignError:
            pass
    periods = np.array(periods, int)
    return CrossSectionalLambdas(
        periods=periods,
        timestamps=None if ts is None else ts[periods],
        lambdas=np.array(lams).reshape(-1, K + 1),
        r2=np.array(r2),
        adj_r2=np.array(adj),
        n_assets=np.array(counts, int),
        pricing_errors=U,
        skipped=tuple(skipped),
        mean_return_r2=mean_r2,
        asset_names=betas.names,
    )


def default_hac_lags(T: int) -> int:
    return int(4 * (T / 100) ** (2 / 9))


def newey_west_se(x: np.ndarray, lags: int) -> float:
    """HAC standard error of the sample mean (Bartlett kernel).

    Scaled by T/(T-1) so that ``lags=0`` gives the usual sd/sqrt(T) with
    the sample standard deviation.
    """
    x = np.asarray(x, float)
    T = x.size
    if T < 2:
        raise SizeError("need at least 2 observations")
    if lags < 0:
        raise InputError(f"lags must be >= 0, got {lags}")
    e = x - x.mean()
    s = float(e @ e)
    for j in range(1, min(lags, T - 1) + 1):
        s += 2 * (1 - j / (lags + 1)) * float(e[j:] @ e[:-j])
    return math.sqrt(max(s, 0.0) / (T - 1) / T)


@dataclass(frozen=True, eq=False)
class FMResult:
    lambda_bar: np.ndarray
    lambdas: np.ndarray
    se: np.ndarray
    tstat: np.ndarray
    pvalue: np.ndarray
    avg_r2: float
    avg_r2_unadjusted: float
    mean_return_r2: float | None
    n_obs: int
    n_periods: int
    hac_lags: int

    @property
    def n_factors(self) -> int:
        return self.lambda_bar.size - 1

    def n_significant(self, threshold: float = SIGNIFICANCE_T) -> int:
        return int(np.sum(np.abs(self.tstat[1:]) > threshold))


def fm_premia(cs: CrossSectionalLambdas | np.ndarray, hac_lags: int | None = None, min_periods: int = 24) -> FMResult:
    """Time-series means of the period premia with Newey-West standard errors.

    ``avg_r2`` is the mean adjusted cross-sectional R²; ``avg_r2_unadjusted``
    the mean of the plain per-period R².
    """
    if isinstance(cs, CrossSectionalLambdas):
        L, r2, adj, n_obs = cs.lambdas, cs.r2, cs.adj_r2, int(cs.n_assets.sum())
        mr2 = cs.mean_return_r2
    else:
        L = np.atleast_2d(np.asarray(cs, float))
        r2 = adj = np.full(L.shape[0], np.nan)
        n_obs, mr2 = 0, None
    T = L.shape[0]
    if T < min_periods:
        raise SizeError(f"need >= {min_periods} valid periods, got {T}")
    lags = default_hac_lags(T) if hac_lags is None else int(hac_lags)
    lam = L.mean(axis=0)
    se = np.array([newey_west_se(L[:, j], lags) for j in range(L.shape[1])])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = lam / se
    p = 2 * stats.t.sf(np.abs(t), T - 1)
    return FMResult(
        lambda_bar=lam,
        lambdas=L,
        se=se,
        tstat=t,
        pvalue=p,
        avg_r2=float(np.mean(adj)),
        avg_r2_unadjusted=float(np.mean(r2)),
        mean_return_r2=mr2,
        n_obs=n_obs,
        n_periods=T,
        hac_lags=lags,
    )


def fama_macbeth(excess_returns, factors: np.ndarray, hac_lags: int | None = None) -> tuple[BetaMatrix, CrossSectionalLambdas, FMResult]:
    betas = first_pass_betas(excess_returns, factors)
    cs = second_pass(excess_returns, betas)
    return betas, cs, fm_premia(cs, hac_lags)


def fm_table(results: Mapping[int, FMResult]) -> ReportTable:
    """Premia with HAC standard errors, one column per factor count."""
    ks = sorted(results)
    kmax = max(ks)
    rows = [("Observations", *(results[k].n_obs for k in ks))]
    rows.append(("Intercept", *((float(results[k].lambda_bar[0]), float(results[k].se[0])) for k in ks)))
    for j in range(1, kmax + 1):
        rows.append((
            f"Factor {j}",
            *((float(results[k].lambda_bar[j]), float(results[k].se[j])) if j <= k else None for k in ks),
        ))
    rows.append(("R²", *(results[k].avg_r2 for k in ks)))
    rows.append(("R² (unadjusted)", *(results[k].avg_r2_unadjusted for k in ks)))
    rows.append(("R² (mean returns)", *(results[k].mean_return_r2 for k in ks)))
    return ReportTable(
        "Fama-MacBeth Regression Results",
        ("Variables", *(f"K={k}" for k in ks)),
        tuple(rows),
        note="Standard errors (Newey-West HAC) in parentheses. R² is the time-series mean of the "
        "adjusted cross-sectional R².",
    )


# -- comparison -------------------------------------------------------------------

COMPARISON_COLUMNS = ("Model", "Factors", "Avg. R²", "Significant Factors", "Stability", "Interpretation")


def significance_label(n_sig: int, k: int) -> str:
    if n_sig == 0:
        return "None significant"
    if n_sig == k:
        return "All significant"
    if n_sig > k / 2:
        return "Most significant"
    return "Some significant"


def model_comparison(
    capm: ReportTable | None,
    fm_results: Mapping[int, FMResult],
    fits: Mapping[int, object] | None = None,
    alpha: float = 0.05,
) -> ReportTable:
    """CAPM row plus one row per factor count.

    Stability comes from the fitted model's condition number; without a fit
    for that K it is left blank. The interpretation column is left empty.
    """
    from .dfm import stability_label

    if not fm_results:
        raise InputError("model comparison needs at least one Fama-MacBeth result")
    fits = fits or {}
    rows = []
    if capm is not None:
        r2 = [v for v in capm.column("R²") if v is not None]
        bp = [v for v in capm.column("Beta P Value") if v is not None]
        n_sig = sum(p < alpha for p in bp)
        sig = "Beta significant in all cases" if bp and n_sig == len(bp) else f"Beta significant in {n_sig} of {len(bp)}"
        rows.append(("CAPM", "1 (Market)", float(np.mean(r2)) if r2 else None, sig, "Stable", ""))
    for k in sorted(fm_results):
        fm = fm_results[k]
        fit = fits.get(k)
        stab = stability_label(fit.condition_number) if fit is not None else None
        rows.append((
            f"DFM (k={k})",
            f"{k} latent factors",
            fm.avg_r2,
            significance_label(fm.n_significant(), k),
            stab,
            "",
        ))
    return ReportTable(
        "Relative Performance of CAPM and Dynamic Factor Models",
        COMPARISON_COLUMNS,
        tuple(rows),
        formats={"Avg. R²": lambda v: "–" if v is None else f"{v:.3f}"},
    )
