import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from macrofactors import panel as pc
from macrofactors.errors import AlignmentError, AssemblyError, DomainError, InputError, SizeError


def ts(name, start, values):
    return pc.TimeSeries.from_start(name, start, values)


def test_log_diff_scaled_by_100():
    s = ts("cpi", "2000-01", [100.0, 101.0, 100.0])
    out = pc.log_diff(s)
    assert out.timestamps[0] == np.datetime64("2000-02")
    np.testing.assert_allclose(out.values, [100 * math.log(1.01), 100 * math.log(100 / 101)])


def test_log_diff_rejects_non_positive():
    with pytest.raises(DomainError, match="non-positive value 0.0"):
        pc.log_diff(ts("x", "2000-01", [1.0, 0.0, 2.0]))


def test_log_diff_keeps_gaps():
    out = pc.log_diff(ts("x", "2000-01", [1.0, np.nan, 2.0, 4.0]))
    assert np.isnan(out.values[:2]).all()
    assert out.values[2] == pytest.approx(100 * math.log(2))


def test_first_diff():
    out = pc.first_diff(ts("r", "2000-01", [3.0, 3.25, 3.0]))
    np.testing.assert_allclose(out.values, [0.25, -0.25])


def test_too_short_for_differencing():
    with pytest.raises(SizeError):
        pc.first_diff(ts("r", "2000-01", [1.0]))


def test_excess_return_formula():
    p = ts("idx", "2000-01", [100.0, 110.0])
    y = ts("bill", "2000-01", [5.0, 6.0])
    out = pc.excess_return(p, y)
    assert out.values[0] == pytest.approx(math.log(1.1) - math.log(1 + 6 / 1200), abs=1e-15)


def test_excess_return_needs_same_axis():
    with pytest.raises(AlignmentError):
        pc.excess_return(ts("idx", "2000-01", [1.0, 2.0]), ts("bill", "2000-02", [1.0, 2.0]))


def test_timestamps_must_be_consecutive():
    with pytest.raises(AlignmentError):
        pc.TimeSeries("x", np.array(["2000-01", "2000-03"], "datetime64[M]"), np.array([1.0, 2.0]))


@given(arrays(float, 40, elements=st.floats(-0.2, 0.2)))
def test_log_diff_inverts_exponential_level(g):
    levels = 50.0 * np.exp(np.concatenate([[0.0], np.cumsum(g)]))
    out = pc.log_diff(ts("x", "2001-01", levels), scale=1.0)
    np.testing.assert_allclose(out.values, g, atol=1e-12)


def _panel(values, names=None):
    values = np.asarray(values, float)
    names = names or tuple(f"c{j}" for j in range(values.shape[1]))
    ts_ = np.datetime64("2000-01", "M") + np.arange(values.shape[0]) * pc.MONTH
    return pc.Panel(tuple(names), ts_, values)


def test_standardize_zero_mean_unit_sd(rng):
    X = rng.normal(3, 2, (50, 4))
    X[5, 1] = np.nan
    z, rec = pc.standardize(_panel(X))
    np.testing.assert_allclose(np.nanmean(z.values, axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(np.nanstd(z.values, axis=0, ddof=1), 1, atol=1e-12)
    assert np.isnan(z.values[5, 1])
    assert z.standardization == rec


@given(arrays(float, (12, 3), elements=st.floats(-1e3, 1e3)))
def test_standardize_roundtrip(X):
    if np.any(np.std(X, axis=0) < 1e-3):
        return
    z, rec = pc.standardize(_panel(X))
    np.testing.assert_allclose(rec.invert(z).values, X, rtol=1e-9, atol=1e-9)


def test_standardize_zero_variance():
    with pytest.raises(DomainError, match="c1"):
        pc.standardize(_panel(np.column_stack([np.arange(5.0), np.ones(5)])))


def test_standardize_single_observation():
    with pytest.raises(SizeError):
        pc.standardize(_panel([[1.0, np.nan], [2.0, 3.0]]))


def test_align_intersection_and_drop():
    a = ts("a", "2000-01", np.arange(12.0))
    b = ts("b", "2000-03", np.arange(12.0))
    sparse = ts("s", "2000-09", np.arange(6.0))
    p = pc.align_and_assemble([a, b, sparse], max_missing_fraction=0.3)
    assert p.names == ("a", "b")
    assert p.dropped == ("s",)
    assert p.timestamps[0] == np.datetime64("2000-03") and p.timestamps[-1] == np.datetime64("2000-12")
    np.testing.assert_array_equal(p.values[:, 0], np.arange(2.0, 12.0))


def test_align_union_fills_nan():
    a = ts("a", "2000-01", [1.0, 2.0, 3.0, 4.0])
    b = ts("b", "2000-02", [5.0, 6.0, 7.0, 8.0])
    p = pc.align_and_assemble([a, b], max_missing_fraction=0.5, how="union")
    assert p.shape == (5, 2)
    assert np.isnan(p.values[0, 1]) and np.isnan(p.values[4, 0])


def test_align_every_column_dropped():
    with pytest.raises(AssemblyError):
        pc.align_and_assemble([ts("a", "2000-01", [1.0, np.nan, np.nan, np.nan, 2.0])], 0.3)


def test_align_no_overlap():
    with pytest.raises(AssemblyError):
        pc.align_and_assemble([ts("a", "2000-01", [1.0, 2.0]), ts("b", "2001-01", [1.0, 2.0])], 0.99)


def test_align_bad_threshold():
    with pytest.raises(InputError):
        pc.align_and_assemble([ts("a", "2000-01", [1.0])], 1.0)


def test_panel_roundtrip(tmp_path, rng):
    X = rng.standard_normal((7, 3))
    X[2, 2] = np.nan
    p = _panel(X).replace(dropped=("gone",), provenance={"c0": {"transform": "none"}})
    pc.write_panel(p, tmp_path / "p.csv")
    back = pc.read_panel(tmp_path / "p.csv")
    assert back.names == p.names and back.dropped == ("gone",)
    np.testing.assert_array_equal(back.timestamps, p.timestamps)
    np.testing.assert_array_equal(back.values, p.values)  # repr floats survive exactly
    assert (tmp_path / "p.csv").read_text().splitlines()[1].startswith("2000-01-31,")


def test_read_csv_rejects_text(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("date,a\n2000-01-31,1.0\n2000-02-29,abc\n")
    with pytest.raises(InputError, match="row 3"):
        pc.read_csv(f)


def test_descriptive_stats_shape():
    t = pc.descriptive_stats(_panel([[1.0, 2.0], [3.0, np.nan]], names=("x", "y")))
    assert t.columns == ("Variable", "Mean", "Std Dev", "Min", "Max")
    x = t.row_by("Variable", "x")
    assert x["Mean"] == 2.0 and x["Std Dev"] == pytest.approx(math.sqrt(2))
    assert t.row_by("Variable", "y")["Std Dev"] is None
    assert "–" in t.to_text()


def test_hand_computed_transform_values():
    np.testing.assert_allclose(pc.first_diff(ts("r", "2000-01", [0.50, 0.75, 0.25])).values, [0.25, -0.50])
    bill = ts("y", "2000-01", [12.0, 12.0])
    assert pc.excess_return(ts("p", "2000-01", [100.0, 105.0]), bill).values[0] == pytest.approx(math.log(1.05) - math.log(1.01), abs=1e-15)
    assert pc.excess_return(ts("p", "2000-01", [100.0, 100.0]), bill).values[0] == pytest.approx(-0.00995, abs=1e-5)
    zero = ts("y", "2000-01", [0.0, 0.0, 0.0])
    p = ts("p", "2000-01", [100.0, 103.0, 99.0])
    np.testing.assert_array_equal(pc.excess_return(p, zero).values, pc.log_diff(p, 1.0).values)


def test_excess_return_rejects_non_positive_price():
    with pytest.raises(DomainError):
        pc.excess_return(ts("p", "2000-01", [100.0, -1.0]), ts("y", "2000-01", [1.0, 1.0]))


def test_standardize_hand_case_and_idempotence():
    z, rec = pc.standardize(_panel([[1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(z.values[:, 0], [-1, 0, 1], atol=1e-15)
    assert rec.means == (2.0,) and rec.sds == (1.0,)
    z2, rec2 = pc.standardize(z)
    np.testing.assert_allclose(z2.values, z.values, atol=1e-12)
    assert rec2.means[0] == pytest.approx(0, abs=1e-12) and rec2.sds[0] == pytest.approx(1, abs=1e-12)


def test_column_sixty_percent_missing_dropped_at_half():
    full = ts("full", "2000-01", np.arange(10.0))
    holey = ts("holey", "2000-01", [1.0, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan, 2.0, 3.0, 4.0])
    p = pc.align_and_assemble([full, holey], max_missing_fraction=0.5)
    assert p.names == ("full",) and p.dropped == ("holey",)
    both = pc.align_and_assemble([full, full.renamed("copy")], 0.5)
    assert both.names == ("full", "copy")


@given(arrays(float, 30, elements=st.floats(0.5, 2.0)), st.sets(st.integers(0, 29), max_size=8))
def test_differencing_missing_count_at_most_doubles(levels, holes):
    levels = levels.copy()
    levels[list(holes)] = np.nan
    s = ts("x", "2000-01", levels)
    for out in (pc.log_diff(s), pc.first_diff(s)):
        assert np.isnan(out.values).sum() <= 2 * len(holes)


def test_descriptive_stats_hand_case():
    row = pc.descriptive_stats(_panel([[-1.0], [0.0], [1.0]], names=("x",))).rows[0]
    assert row == ("x", 0.0, 1.0, -1.0, 1.0)
