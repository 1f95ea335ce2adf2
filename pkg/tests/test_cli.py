import filecmp
import json
from pathlib import Path

import pytest
import yaml

from macrofactors import cli, pipeline
from macrofactors.config import parse_config, validate_config
from macrofactors.errors import EstimationError, ValidationError
from macrofactors.synthetic import build_bundle, replication_config

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    build_bundle(d, seed=7)
    return d


def write_cfg(dirpath, bundle, **changes):
    cfg = replication_config(data_dir=str(bundle), factor_counts=(1, 2))
    cfg["em"] = {"max_iter": 15}
    cfg["pricing"]["factor_counts"] = [2]
    cfg.update(changes)
    p = Path(dirpath) / "cfg.yaml"
    p.write_text(yaml.safe_dump(cfg, allow_unicode=True))
    return p


def tree(d):
    return sorted(str(p.relative_to(d)) for p in Path(d).rglob("*") if p.is_file())


def same_tree(a, b):
    files = tree(a)
    assert files == tree(b)
    _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    return mismatch + errors


def test_minimal_config_gets_defaults(tmp_path):
    (tmp_path / "x.csv").write_text("date,a,b,c\n2000-01-31,1,2,3\n")
    series = [{"name": c, "file": "f", "column": c} for c in "abc"]
    cfg = parse_config({"data": {"f": "x.csv"}, "series": series}, tmp_path)
    assert cfg.seed == 0 and cfg.drop_threshold == 0.30 and cfg.factor_counts == (1, 2, 3)
    assert cfg.series[0].transform == "none" and cfg.returns is None
    assert cfg.em.max_iter == 500 and cfg.stationarity.trigger == "adf"
    assert cfg.pricing.market_proxy == "United States"


def test_factor_count_zero_named(tmp_path, bundle):
    p = write_cfg(tmp_path, bundle, factor_counts=[0, 2])
    with pytest.raises(ValidationError) as exc:
        validate_config(p)
    assert any(s.startswith("factor_counts") for s in exc.value.problems)


def test_every_problem_reported(tmp_path, bundle):
    p = write_cfg(tmp_path, bundle, factor_counts=[0], alignment="outer", colour="blue", drop_threshold=2)
    raw = yaml.safe_load(p.read_text())
    raw["data"]["macro"] = "missing.csv"
    raw["series"][0]["transform"] = "log"
    p.write_text(yaml.safe_dump(raw))
    with pytest.raises(ValidationError) as exc:
        validate_config(p)
    text = "\n".join(exc.value.problems)
    for needle in ("factor_counts", "alignment", "colour", "drop_threshold", "missing.csv", "series[0].transform"):
        assert needle in text
    assert len(exc.value.problems) >= 6


def test_factor_count_above_series_count(tmp_path, bundle):
    with pytest.raises(ValidationError, match="exceeds"):
        validate_config(write_cfg(tmp_path, bundle, factor_counts=[25]))


def test_bundled_replication_config_validates():
    cfg = validate_config(ROOT / "configs" / "replication.yaml")
    assert cfg.factor_counts == (1, 2, 3, 4, 5, 6, 7)
    assert len(cfg.returns.assets) == 10
    assert sum(1 for s in cfg.series if s.name != "Industrial Production (France)") == 19


def test_help_documents_defaults(capsys):
    with pytest.raises(SystemExit):
        cli.main(["run", "--help"])
    out = capsys.readouterr().out
    assert "drop_threshold: 0.30" in out and "exit codes" in out


def test_run_writes_all_tables_and_manifest(tmp_path, bundle):
    cfg = write_cfg(tmp_path, bundle)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    for stem in ("stationarity", "descriptive_stats", "model_selection", "fama_macbeth", "capm", "comparison"):
        for ext in ("csv", "json", "txt"):
            assert (out / f"{stem}.{ext}").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["stages"] == list(pipeline.STAGES)
    assert man["timings"] is None
    assert any("dropped column" in w for w in man["warnings"])
    assert man["config"]["drop_threshold"] == 0.3
    assert "United States" not in (out / "capm.csv").read_text()
    assert (out / "model_selection.csv").read_text().startswith("No of factor(K),AIC,BIC,Condition Number")


def test_rerun_is_byte_identical(tmp_path, bundle):
    cfg = write_cfg(tmp_path, bundle)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(b)]) == 0
    assert same_tree(a, b) == []


def test_stages_one_by_one_match_full_run(tmp_path, bundle):
    cfg = write_cfg(tmp_path, bundle)
    full, step = tmp_path / "full", tmp_path / "step"
    assert cli.main(["run", "--config", str(cfg), "--out", str(full)]) == 0
    for stage in pipeline.STAGES:
        assert cli.main([stage, "--config", str(cfg), "--out", str(step)]) == 0
    files = [f for f in tree(full) if not f.startswith("manifest")]
    _, mismatch, errors = filecmp.cmpfiles(full, step, files, shallow=False)
    assert mismatch == [] and errors == []


def test_seed_and_k_overrides(tmp_path, bundle):
    cfg = write_cfg(tmp_path, bundle)
    out = tmp_path / "o"
    assert cli.main(["fit-dfm", "--config", str(cfg), "--out", str(out), "--k", "1"]) == 4  # no panel yet
    assert cli.main(["transform", "--config", str(cfg), "--out", str(out)]) == 0
    assert cli.main(["fit-dfm", "--config", str(cfg), "--out", str(out), "--k", "1", "--seed", "99"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 99 and man["config"]["factor_counts"] == [1]
    assert not (out / "dfm" / "dfm_k2.json").exists()


def test_exit_code_validation(tmp_path, bundle, capsys):
    assert cli.main(["run", "--config", str(write_cfg(tmp_path, bundle, factor_counts=[0]))]) == 2
    assert "factor_counts" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_exit_code_numerical_and_incomplete_manifest(tmp_path, bundle, monkeypatch):
    def boom(*a, **k):
        raise EstimationError("EM diverged")

    monkeypatch.setattr(pipeline, "fit_mle", boom)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(write_cfg(tmp_path, bundle)), "--out", str(out)]) == 3
    assert not (out / "manifest.json").exists()
    inc = json.loads((out / "manifest.incomplete.json").read_text())
    assert inc["stages"] == ["ingest", "transform", "test-stationarity"]
    assert "EM diverged" in inc["error"]


def test_exit_code_io(tmp_path, bundle):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert cli.main(["run", "--config", str(write_cfg(tmp_path, bundle)), "--out", str(blocker / "sub")]) == 4


def test_record_timings_flag(tmp_path, bundle):
    out = tmp_path / "o"
    assert cli.main(["ingest", "--config", str(write_cfg(tmp_path, bundle)), "--out", str(out), "--record-timings"]) == 0
    assert set(json.loads((out / "manifest.json").read_text())["timings"]) == {"ingest"}
