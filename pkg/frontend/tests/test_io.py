import pathlib

import pytest

from clafd_plot.io import read_summary, read_sweep, read_trace

DATA = pathlib.Path(__file__).parent / "data"


def test_read_summary_types():
    rows = read_summary(DATA / "summary.csv")
    assert len(rows) == 30  # 5 methods x 2 models x 3 replicates
    r = rows[0]
    assert isinstance(r["steps"], int)
    assert isinstance(r["mean_design_ms"], float)
    assert r["method"] in {"ol", "bd", "qta", "bc", "sbc"}
    assert all(1 <= row["steps"] <= 80 for row in rows)


def test_summary_certified_fraction_optional():
    rows = read_summary(DATA / "summary.csv")
    bc = [r for r in rows if r["method"] == "bc"]
    bd = [r for r in rows if r["method"] == "bd"]
    assert all(r["certified_fraction"] is not None for r in bc)
    assert all(r["certified_fraction"] is None for r in bd)


def test_read_summary_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("method,steps\nbc,5\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_summary(bad)


def test_read_trace_grouping():
    tr = read_trace(DATA / "trace_bc-m1-s11.csv")
    n = len(tr["steps"])
    assert n >= 1
    assert len(tr["inputs"][0]) == 1
    assert len(tr["beliefs"][0]) == 2
    assert all(abs(sum(p) - 1.0) < 1e-9 for p in tr["beliefs"])
    assert set(tr["certified"]) <= {"yes", "no", "na"}


def test_read_trace_rejects_other_schema(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("R,scale,pass\n1.0,1.0,1\n")
    with pytest.raises(ValueError):
        read_trace(bad)


def test_read_sweep_grid():
    rows = read_sweep(DATA / "sweep.csv")
    assert len(rows) == 25
    assert {r["pass"] for r in rows} == {True, False}


def test_empty_file_rejected(tmp_path):
    bad = tmp_path / "empty.csv"
    bad.write_text("R,scale,pass\n")
    with pytest.raises(ValueError, match="no data rows"):
        read_sweep(bad)
