import json

from macrofactors.report import ReportTable, fmt_float


def table():
    return ReportTable(
        "Demo", ("Name", "Value", "Pair"),
        (("a", 0.5, (0.25, 0.125)), ("b", None, None)),
        formats={"Value": lambda v: "–" if v is None else f"{v:.2f}"},
    )


def test_csv_uses_repr_and_coef_se():
    lines = table().to_csv().splitlines()
    assert lines[0] == "Name,Value,Pair"
    assert lines[1] == "a,0.5,0.25(0.125)"
    assert lines[2] == "b,,"


def test_json_splits_pairs():
    d = json.loads(table().to_json())
    assert d["columns"] == ["Name", "Value", "Pair"]
    assert d["rows"][0][2] == {"coef": 0.25, "se": 0.125}
    assert d["rows"][1][1] is None


def test_text_alignment_and_dash():
    txt = table().to_text()
    assert txt.splitlines()[0] == "Demo"
    assert "0.50" in txt and "–" in txt


def test_write_three_files(tmp_path):
    paths = table().write(tmp_path, "demo")
    assert sorted(p.name for p in paths) == ["demo.csv", "demo.json", "demo.txt"]


def test_fmt_float_large_values_scientific():
    assert "e+" in fmt_float(2.5e7)
    assert fmt_float(0.12345) == "0.1235"
