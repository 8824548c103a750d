"""Readers for the three result-file schemas.

The files are plain UTF-8 CSV with a header row and '.' decimal separator:

* summary.csv: method, true_model, trial, decided, correct, steps,
  mean_design_ms, certified_fraction (blank when not applicable)
* trace_<id>.csv: step, u_0.., y_0.., P_0.., certified
* sweep.csv: R, scale, pass (1/0)

Readers validate the required columns and coerce types; they never mutate the
input files.
"""

import csv

SUMMARY_REQUIRED = {"method", "true_model", "trial", "decided", "correct",
                    "steps", "mean_design_ms", "certified_fraction"}
SWEEP_REQUIRED = {"R", "scale", "pass"}


def _check_columns(fieldnames, required, path):
    missing = required - set(fieldnames or ())
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")


def read_summary(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_columns(reader.fieldnames, SUMMARY_REQUIRED, path)
        rows = []
        for raw in reader:
            rows.append({
                "method": raw["method"],
                "true_model": int(raw["true_model"]),
                "trial": raw["trial"],
                "decided": int(raw["decided"]),
                "correct": bool(int(raw["correct"])),
                "steps": int(raw["steps"]),
                "mean_design_ms": float(raw["mean_design_ms"]),
                "certified_fraction": (float(raw["certified_fraction"])
                                       if raw["certified_fraction"] else None),
            })
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def read_trace(path) -> dict:
    """Trace columns grouped by family: steps, inputs u_*, outputs y_*,
    beliefs P_*, certificate flags."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        u_cols = sorted((n for n in names if n.startswith("u_")),
                        key=lambda n: int(n[2:]))
        y_cols = sorted((n for n in names if n.startswith("y_")),
                        key=lambda n: int(n[2:]))
        p_cols = sorted((n for n in names if n.startswith("P_")),
                        key=lambda n: int(n[2:]))
        if "step" not in names or not u_cols or not p_cols or "certified" not in names:
            raise ValueError(f"{path}: not a trace file (need step, u_*, P_*, certified)")
        steps, inputs, outputs, beliefs, certs = [], [], [], [], []
        for raw in reader:
            steps.append(int(raw["step"]))
            inputs.append([float(raw[c]) for c in u_cols])
            outputs.append([float(raw[c]) for c in y_cols])
            beliefs.append([float(raw[c]) for c in p_cols])
            certs.append(raw["certified"])
    if not steps:
        raise ValueError(f"{path}: no data rows")
    return {"steps": steps, "inputs": inputs, "outputs": outputs,
            "beliefs": beliefs, "certified": certs}


def read_sweep(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_columns(reader.fieldnames, SWEEP_REQUIRED, path)
        rows = [{"R": float(r["R"]), "scale": float(r["scale"]),
                 "pass": bool(int(r["pass"]))} for r in reader]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows
