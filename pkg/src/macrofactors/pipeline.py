"""Stage runners. Each stage reads the previous stage's files from the output
directory, so running stages one by one gives the same files as ``run``."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import panel as pc
from .config import PipelineConfig
from .dfm import fit_mle
from .errors import AlignmentError, InputError, MacroFactorError
from .pricing import capm_regress, fama_macbeth, fm_table, model_comparison
from .report import ReportTable
from .stationarity import stationarity_pipeline

log = logging.getLogger(__name__)

STAGES = ("ingest", "transform", "test-stationarity", "fit-dfm", "price", "report")

try:
    ARTIFACT_VERSION = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    ARTIFACT_VERSION = "0.1.0"


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _series_by_column(cfg: PipelineConfig, key: str, cache: dict) -> dict[str, pc.TimeSeries]:
    if key not in cache:
        cache[key] = {s.name: s for s in pc.read_csv(cfg.path(key))}
    return cache[key]


def _lookup(cols: dict, key: str, column: str) -> pc.TimeSeries:
    if column not in cols:
        raise InputError(f"column {column!r} not found in data file {key!r}")
    return cols[column]


def _trim_common(a: pc.TimeSeries, b: pc.TimeSeries) -> tuple[pc.TimeSeries, pc.TimeSeries]:
    start = max(a.timestamps[0], b.timestamps[0])
    end = min(a.timestamps[-1], b.timestamps[-1])
    if start > end:
        raise AlignmentError(f"{a.name} and {b.name} do not overlap")

    def cut(s):
        keep = (s.timestamps >= start) & (s.timestamps <= end)
        return pc.TimeSeries(s.name, s.timestamps[keep], s.values[keep])

    return cut(a), cut(b)


# -- stages -----------------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig) -> list[str]:
    summary = {}
    cache: dict = {}
    for key in sorted(cfg.data):
        cols = _series_by_column(cfg, key, cache)
        summary[key] = {
            "path": cfg.data[key],
            "columns": {
                name: {
                    "start": pc.month_end(s.timestamps[:1])[0],
                    "end": pc.month_end(s.timestamps[-1:])[0],
                    "n_obs": len(s),
                    "n_missing": int(s.mask.sum()),
                }
                for name, s in cols.items()
            },
        }
    _write_json(cfg.out_path / "ingest.json", summary)
    return []


def stage_transform(cfg: PipelineConfig) -> list[str]:
    out = cfg.out_path
    cache: dict = {}
    transformed, provenance = [], {}
    for spec in cfg.series:
        raw = _lookup(_series_by_column(cfg, spec.file, cache), spec.file, spec.column).renamed(spec.name)
        if spec.transform == "log_diff":
            s = pc.log_diff(raw, spec.scale)
            provenance[spec.name] = {"source": f"{spec.file}:{spec.column}", "transform": "log_diff", "scale": spec.scale}
        elif spec.transform == "first_diff":
            s = pc.first_diff(raw)
            provenance[spec.name] = {"source": f"{spec.file}:{spec.column}", "transform": "first_diff"}
        else:
            s = raw
            provenance[spec.name] = {"source": f"{spec.file}:{spec.column}", "transform": "none"}
        transformed.append(s)
    panel = pc.align_and_assemble(transformed, cfg.drop_threshold, cfg.alignment)
    panel = panel.replace(provenance={n: provenance[n] for n in panel.names})
    pc.write_panel(panel, out / "panel.csv")
    pc.descriptive_stats(panel).write(out, "descriptive_stats")
    warnings = [f"dropped column {n!r}: missing fraction above {cfg.drop_threshold}" for n in panel.dropped]

    if cfg.returns is not None:
        rs = cfg.returns
        ycol = _lookup(_series_by_column(cfg, rs.yield_file, cache), rs.yield_file, rs.yield_column)
        prices = _series_by_column(cfg, rs.file, cache)
        assets = rs.assets or tuple(prices)
        ex = []
        for a in assets:
            p, y = _trim_common(_lookup(prices, rs.file, a), ycol)
            ex.append(pc.excess_return(p, y))
        rpanel = pc.align_and_assemble(ex, max_missing_fraction=0.999999, how="union")
        rpanel = rpanel.replace(provenance={a: {"source": f"{rs.file}:{a}", "transform": "excess_return",
                                                "risk_free": f"{rs.yield_file}:{rs.yield_column}"} for a in rpanel.names})
        pc.write_panel(rpanel, out / "returns.csv")
    return warnings


def stage_stationarity(cfg: PipelineConfig) -> list[str]:
    panel = pc.read_panel(cfg.out_path / "panel.csv")
    if cfg.stationarity.columns:
        panel = panel.select(list(cfg.stationarity.columns))
    st = cfg.stationarity
    table = stationarity_pipeline(panel, trigger=st.trigger, break_model=st.break_model, trim=st.trim)
    table.write(cfg.out_path, "stationarity")
    return [f"stationarity {r['Series']}: {r['Conclusion']}" for r in table.records() if str(r["Conclusion"]).startswith("error")]


def stage_fit(cfg: PipelineConfig) -> list[str]:
    out = cfg.out_path
    panel = pc.read_panel(out / "panel.csv")
    z, rec = pc.standardize(panel)
    warnings = []
    rows = []
    for k in cfg.factor_counts:
        fit = fit_mle(z, k, max_iter=cfg.em.max_iter, tol=cfg.em.tol, seed=cfg.seed)
        fit.save(out / "dfm")
        if not fit.converged:
            warnings.append(f"DFM K={k}: EM did not converge in {cfg.em.max_iter} iterations")
        rows.append((k, fit.aic, fit.bic, fit.condition_number))
    table = ReportTable(
        "Comparison of AIC and BIC across different factor specifications",
        ("No of factor(K)", "AIC", "BIC", "Condition Number"),
        tuple(rows),
        formats={
            "AIC": lambda v: f"{v:.0f}",
            "BIC": lambda v: f"{v:.0f}",
            "Condition Number": lambda v: f"{v:.1e}",
        },
    )
    table.write(out, "model_selection")
    _write_json(out / "dfm" / "standardization.json", rec.to_dict())
    return warnings


def load_fit_summary(directory: Path, k: int):
    """Parameters, condition number and smoothed factors saved by the fit stage."""
    meta = json.loads((directory / f"dfm_k{k}.json").read_text(encoding="utf-8"))
    fac = pc.read_csv(directory / f"dfm_k{k}_factors.csv")
    return meta, pc.Panel.from_series(fac)


@dataclass(frozen=True)
class _FitInfo:
    condition_number: float


def stage_price(cfg: PipelineConfig) -> list[str]:
    out = cfg.out_path
    if cfg.returns is None:
        raise InputError("pricing needs a returns block in the config")
    rets = pc.read_panel(out / "returns.csv")
    warnings = []
    mp = cfg.pricing.market_proxy
    if mp == "equal_weighted":
        market = pc.TimeSeries("equal_weighted", rets.timestamps, np.nanmean(rets.values, axis=1))
        countries = rets
    else:
        market = rets.column(mp)
        countries = rets.select([n for n in rets.names if n != mp])
    capm = capm_regress(countries, market)
    capm.write(out, "capm")
    if capm.note:
        warnings += [f"CAPM {line}" for line in capm.note.splitlines()]

    fm_results, fits = {}, {}
    for k in cfg.priced_counts:
        meta, fac = load_fit_summary(out / "dfm", k)
        common, ir, jf = np.intersect1d(rets.timestamps, fac.timestamps, return_indices=True)
        F = fac.values[jf]
        F = (F - F.mean(axis=0)) / F.std(axis=0, ddof=1)
        R = rets.replace(timestamps=common, values=rets.values[ir])
        betas, cs, fm = fama_macbeth(R, F, hac_lags=cfg.pricing.hac_lags)
        warnings += [f"FM K={k}: excluded asset {a} ({why})" for a, why in betas.excluded.items()]
        warnings += [f"FM K={k}: skipped period {pc.month_end(R.timestamps[t:t + 1])[0]} ({why})" for t, why in cs.skipped]
        fm_results[k] = fm
        fits[k] = _FitInfo(meta["condition_number"])
        _write_json(out / "fm" / f"fm_k{k}.json", {
            "k": k,
            "lambda_bar": fm.lambda_bar.tolist(),
            "hac_se": fm.se.tolist(),
            "tstat": fm.tstat.tolist(),
            "pvalue": fm.pvalue.tolist(),
            "avg_r2": fm.avg_r2,
            "avg_r2_unadjusted": fm.avg_r2_unadjusted,
            "mean_return_r2": fm.mean_return_r2,
            "n_obs": fm.n_obs,
            "n_periods": fm.n_periods,
            "hac_lags": fm.hac_lags,
            "assets": list(betas.names),
            "betas": betas.betas.tolist(),
        })
    if fm_results:
        fm_table(fm_results).write(out, "fama_macbeth")
        model_comparison(capm, fm_results, fits, alpha=cfg.pricing.significance).write(out, "comparison")
    return warnings


REPORT_PARTS = ("stationarity", "descriptive_stats", "model_selection", "fama_macbeth", "capm", "comparison")


def stage_report(cfg: PipelineConfig) -> list[str]:
    out = cfg.out_path
    parts = [(out / f"{p}.txt").read_text(encoding="utf-8") for p in REPORT_PARTS if (out / f"{p}.txt").exists()]
    (out / "report.txt").write_text("\n\n".join(parts), encoding="utf-8")
    return []


RUNNERS = {
    "ingest": stage_ingest,
    "transform": stage_transform,
    "test-stationarity": stage_stationarity,
    "fit-dfm": stage_fit,
    "price": stage_price,
    "report": stage_report,
}


@dataclass
class RunManifest:
    config_digest: str
    artifact_version: str
    seed: int
    config: dict
    stages: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    timings: dict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        d = {
            "artifact_version": self.artifact_version,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "config": self.config,
            "stages": self.stages,
            "warnings": self.warnings,
            "timings": self.timings,
        }
        if self.error is not None:
            d["error"] = self.error
        return d


def run_stage(cfg: PipelineConfig, stage: str) -> list[str]:
    cfg.out_path.mkdir(parents=True, exist_ok=True)
    warnings = RUNNERS[stage](cfg)
    for w in warnings:
        log.warning(w)
    return warnings


def run_pipeline(cfg: PipelineConfig, stages=STAGES, record_timings: bool = False) -> RunManifest:
    """Run ``stages`` in order and write ``manifest.json`` once all of them finish.

    On failure ``manifest.incomplete.json`` records the completed stages and
    the error, and the exception propagates. Wall-clock timings are stored
    only with ``record_timings`` since they would break byte-identical output.
    """
    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(cfg.digest(), ARTIFACT_VERSION, cfg.seed, cfg.to_dict(), timings={} if record_timings else None)
    for p in (out / "manifest.json", out / "manifest.incomplete.json"):
        p.unlink(missing_ok=True)
    for stage in stages:
        t0 = time.perf_counter()
        try:
            man.warnings += run_stage(cfg, stage)
        except (MacroFactorError, OSError) as exc:
            man.error = f"{stage}: {exc}"
            _write_json(out / "manifest.incomplete.json", man.to_dict())
            raise
        man.stages.append(stage)
        elapsed = time.perf_counter() - t0
        log.info("stage %s finished in %.2fs", stage, elapsed)
        if record_timings:
            man.timings[stage] = round(elapsed, 3)
    _write_json(out / "manifest.json", man.to_dict())
    return man
