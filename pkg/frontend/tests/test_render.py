import csv
import pathlib
import statistics

from clafd_plot.render import plot_sweep, plot_trace, plot_violins

DATA = pathlib.Path(__file__).parent / "data"


def test_violins_writes_image_and_prints_medians(tmp_path, capsys):
    out = tmp_path / "violins.png"
    plot_violins(DATA / "summary.csv", out)
    assert out.exists() and out.stat().st_size > 0
    printed = capsys.readouterr().out
    by_method: dict = {}
    with open(DATA / "summary.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            by_method.setdefault(row["method"], []).append(int(row["steps"]))
    for method, steps in by_method.items():
        want = float(statistics.median(steps))
        assert f"median[{method}] = {want!r}" in printed


def test_violins_single_method(tmp_path):
    rows = list(csv.DictReader(open(DATA / "summary.csv", newline="")))
    single = tmp_path / "single.csv"
    with open(single, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=rows[0].keys())
        writer.writeheader()
        for r in rows:
            if r["method"] == "bc":
                writer.writerow(r)
    out = tmp_path / "one.png"
    plot_violins(single, out)
    assert out.exists() and out.stat().st_size > 0


def test_trace_image(tmp_path):
    out = tmp_path / "trace.png"
    plot_trace(DATA / "trace_bc-m1-s11.csv", out)
    assert out.exists() and out.stat().st_size > 0


def test_sweep_image(tmp_path):
    out = tmp_path / "sweep.png"
    plot_sweep(DATA / "sweep.csv", out)
    assert out.exists() and out.stat().st_size > 0


def test_inputs_not_mutated(tmp_path):
    src = (DATA / "summary.csv").read_bytes()
    plot_violins(DATA / "summary.csv", tmp_path / "v.png")
    assert (DATA / "summary.csv").read_bytes() == src
