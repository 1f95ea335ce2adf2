"""Pipeline configuration: one YAML file, validated in full before anything runs.

Relative paths are resolved against the directory holding the config file.

Defaults::

    seed: 0
    output_dir: out
    drop_threshold: 0.30
    alignment: intersection          # or union
    factor_counts: [1, 2, 3]
    em: {max_iter: 500, tol: 1.0e-6}
    stationarity: {trigger: adf, break_model: intercept, trim: 0.15, columns: null}
    pricing: {factor_counts: null, hac_lags: null, significance: 0.05,
              market_proxy: United States}   # an asset name, or equal_weighted
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .errors import ValidationError
from .panel import TRANSFORMS


@dataclass(frozen=True)
class SeriesSpec:
    name: str
    file: str
    column: str
    transform: str = "none"
    scale: float = 100.0


@dataclass(frozen=True)
class ReturnsSpec:
    file: str
    yield_file: str
    yield_column: str
    assets: tuple[str, ...] = ()


@dataclass(frozen=True)
class EMOptions:
    max_iter: int = 500
    tol: float = 1e-6


@dataclass(frozen=True)
class StationarityOptions:
    trigger: str = "adf"
    break_model: str = "intercept"
    trim: float = 0.15
    columns: tuple[str, ...] | None = None


@dataclass(frozen=True)
class PricingOptions:
    factor_counts: tuple[int, ...] | None = None
    hac_lags: int | None = None
    significance: float = 0.05
    market_proxy: str = "United States"


@dataclass(frozen=True)
class PipelineConfig:
    data: dict[str, str]
    series: tuple[SeriesSpec, ...]
    returns: ReturnsSpec | None = None
    seed: int = 0
    output_dir: str = "out"
    drop_threshold: float = 0.30
    alignment: str = "intersection"
    factor_counts: tuple[int, ...] = (1, 2, 3)
    em: EMOptions = field(default_factory=EMOptions)
    stationarity: StationarityOptions = field(default_factory=StationarityOptions)
    pricing: PricingOptions = field(default_factory=PricingOptions)
    base_dir: str = "."

    def path(self, key: str) -> Path:
        p = Path(self.data[key])
        return p if p.is_absolute() else (Path(self.base_dir) / p).resolve()

    @property
    def out_path(self) -> Path:
        p = Path(self.output_dir)
        return p if p.is_absolute() else (Path(self.base_dir) / p).resolve()

    @property
    def priced_counts(self) -> tuple[int, ...]:
        ks = self.pricing.factor_counts or self.factor_counts
        return tuple(k for k in ks if k in self.factor_counts)

    def to_dict(self) -> dict[str, Any]:
        """Everything that determines results; output location and base dir excluded."""
        d = asdict(self)
        d.pop("output_dir")
        d.pop("base_dir")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, seed: int | None = None, out: str | None = None, ks: list[int] | None = None) -> "PipelineConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if out is not None:
            cfg = replace(cfg, output_dir=str(Path(out).resolve()))
        if ks is not None:
            problems = _check_counts(ks, "--k")
            if problems:
                raise ValidationError(problems)
            cfg = replace(cfg, factor_counts=tuple(ks))
        return cfg


_TOP = {
    "data", "series", "returns", "seed", "output_dir", "drop_threshold", "alignment",
    "factor_counts", "em", "stationarity", "pricing",
}


def _check_keys(d: dict, allowed: set, where: str, problems: list[str]) -> None:
    for k in d:
        if k not in allowed:
            problems.append(f"{where}: unknown key {k!r}")


def _check_counts(ks, where: str) -> list[str]:
    if not isinstance(ks, (list, tuple)) or not ks:
        return [f"{where}: must be a non-empty list of integers"]
    bad = [k for k in ks if not isinstance(k, int) or isinstance(k, bool) or k < 1]
    return [f"{where}: factor count {k!r} must be an integer >= 1" for k in bad]


def _build(cls, d: dict, where: str, problems: list[str], **types):
    allowed = set(cls.__dataclass_fields__)
    _check_keys(d, allowed, where, problems)
    kw = {k: v for k, v in d.items() if k in allowed}
    for k, t in types.items():
        if k in kw and kw[k] is not None and not isinstance(kw[k], t):
            problems.append(f"{where}.{k}: expected {t if isinstance(t, type) else t[0]}, got {kw[k]!r}")
    try:
        return cls(**kw)
    except TypeError as exc:
        problems.append(f"{where}: {exc}")
        return None


def parse_config(raw: Any, base_dir: str | Path = ".", check_paths: bool = True) -> PipelineConfig:
    """Validate a parsed YAML document; raises ValidationError listing every problem."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ValidationError(["config must be a mapping"])
    _check_keys(raw, _TOP, "config", problems)
    base = Path(base_dir)

    data = raw.get("data")
    if not isinstance(data, dict) or not data:
        problems.append("data: must map file keys to CSV paths")
        data = {}
    data = {str(k): str(v) for k, v in data.items()}
    if check_paths:
        for k, v in data.items():
            p = Path(v) if Path(v).is_absolute() else base / v
            if not p.is_file():
                problems.append(f"data.{k}: file not found: {p}")

    series = []
    raw_series = raw.get("series")
    if not isinstance(raw_series, list) or not raw_series:
        problems.append("series: must be a non-empty list")
        raw_series = []
    names = set()
    for i, s in enumerate(raw_series):
        where = f"series[{i}]"
        if not isinstance(s, dict):
            problems.append(f"{where}: must be a mapping")
            continue
        spec = _build(SeriesSpec, s, where, problems, scale=(int, float))
        if spec is None:
            continue
        if spec.transform not in TRANSFORMS:
            problems.append(f"{where}.transform: {spec.transform!r} not one of {sorted(TRANSFORMS)}")
        if spec.transform == "excess_return":
            problems.append(f"{where}.transform: excess_return applies to the returns block only")
        if spec.file not in data:
            problems.append(f"{where}.file: {spec.file!r} is not a key of data")
        if isinstance(spec.scale, (int, float)) and not spec.scale > 0:
            problems.append(f"{where}.scale: must be positive")
        if spec.name in names:
            problems.append(f"{where}.name: duplicate {spec.name!r}")
        names.add(spec.name)
        series.append(spec)

    returns = None
    if raw.get("returns") is not None:
        r = dict(raw["returns"]) if isinstance(raw["returns"], dict) else {}
        if "assets" in r:
            r["assets"] = tuple(r["assets"] or ())
        returns = _build(ReturnsSpec, r, "returns", problems)
        if returns is not None:
            for key in ("file", "yield_file"):
                if getattr(returns, key) not in data:
                    problems.append(f"returns.{key}: {getattr(returns, key)!r} is not a key of data")

    def sub(name, cls, **types):
        d = raw.get(name) or {}
        if not isinstance(d, dict):
            problems.append(f"{name}: must be a mapping")
            return cls()
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        out = _build(cls, d, name, problems, **types)
        return out if out is not None else cls()

    em = sub("em", EMOptions, max_iter=int, tol=(int, float))
    if isinstance(em.max_iter, int) and em.max_iter < 1:
        problems.append("em.max_iter: must be >= 1")
    if isinstance(em.tol, (int, float)) and not em.tol > 0:
        problems.append("em.tol: must be positive")
    st = sub("stationarity", StationarityOptions, trim=(int, float))
    if st.trigger not in ("adf", "conflict"):
        problems.append(f"stationarity.trigger: {st.trigger!r} not one of ['adf', 'conflict']")
    if st.break_model not in ("intercept", "trend", "both"):
        problems.append(f"stationarity.break_model: {st.break_model!r} not one of ['both', 'intercept', 'trend']")
    if isinstance(st.trim, (int, float)) and not 0 < st.trim < 0.5:
        problems.append("stationarity.trim: must be in (0, 0.5)")
    pr = sub("pricing", PricingOptions, significance=(int, float), hac_lags=int)
    if pr.factor_counts is not None:
        problems += _check_counts(list(pr.factor_counts), "pricing.factor_counts")
    if isinstance(pr.significance, (int, float)) and not 0 < pr.significance < 1:
        problems.append("pricing.significance: must be in (0, 1)")
    if isinstance(pr.hac_lags, int) and pr.hac_lags < 0:
        problems.append("pricing.hac_lags: must be >= 0")
    if returns is not None and returns.assets and pr.market_proxy != "equal_weighted" and pr.market_proxy not in returns.assets:
        problems.append(f"pricing.market_proxy: {pr.market_proxy!r} is neither 'equal_weighted' nor an asset")

    ks = raw.get("factor_counts", [1, 2, 3])
    problems += _check_counts(ks, "factor_counts")
    n_series = len(series)
    if n_series and isinstance(ks, list):
        problems += [
            f"factor_counts: {k} exceeds the number of configured series ({n_series})"
            for k in ks if isinstance(k, int) and k > n_series
        ]

    thr = raw.get("drop_threshold", 0.30)
    if not isinstance(thr, (int, float)) or not 0 <= thr < 1:
        problems.append(f"drop_threshold: must be in [0, 1), got {thr!r}")
    alignment = raw.get("alignment", "intersection")
    if alignment not in ("intersection", "union"):
        problems.append(f"alignment: {alignment!r} not one of ['intersection', 'union']")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        problems.append(f"seed: must be an integer, got {seed!r}")

    if problems:
        raise ValidationError(problems)
    return PipelineConfig(
        data=data,
        series=tuple(series),
        returns=returns,
        seed=seed,
        output_dir=str(raw.get("output_dir", "out")),
        drop_threshold=float(thr),
        alignment=alignment,
        factor_counts=tuple(ks),
        em=em,
        stationarity=st,
        pricing=pr,
        base_dir=str(base),
    )


def validate_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError([f"config file not found: {path}"])
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ValidationError([f"{path}: not valid YAML: {exc}"]) from None
    return parse_config(raw, base_dir=path.parent.resolve())
