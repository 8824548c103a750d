"""Command-line front end: Monte-Carlo runs, single traced trials, and the
concavity sweep."""

import argparse
import pathlib
import sys

import numpy as np

from .harness import (METHODS, concavity_sweep, run_monte_carlo, run_trial,
                      trial_seed_sequence, write_sweep_csv, write_trace_csv)
from .scenarios import resolve_scenario

DEFAULT_SWEEP_R = (1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0)
DEFAULT_SWEEP_C = (1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 4.0)
DEFAULT_SWEEP_INPUT = (-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 0.0, 0.0)


def _add_run(sub):
    p = sub.add_parser("run", help="seeded Monte-Carlo batch, emits summary.csv")
    p.add_argument("--scenario", required=True,
                   help="published scenario name or path to a scenario JSON file")
    p.add_argument("--method", default="bc",
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--runs-per-model", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)


def _add_trial(sub):
    p = sub.add_parser("trial", help="run one trial, optionally writing its trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--method", default="bc")
    p.add_argument("--true-model", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--out", default=".")


def _add_sweep(sub):
    p = sub.add_parser("sweep-concavity",
                       help="pass/fail grid of the concavity condition, emits sweep.csv")
    p.add_argument("--scenario", default="uncontrolled-polytope")
    p.add_argument("--out", required=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clafd",
                                     description="closed-loop active fault diagnosis")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_trial(sub)
    _add_sweep(sub)
    args = parser.parse_args(argv)

    if args.command == "run":
        cfg = resolve_scenario(args.scenario)
        methods = [m.strip() for m in args.method.split(",") if m.strip()]
        out = pathlib.Path(args.out)
        records, summary = run_monte_carlo(cfg, methods, args.runs_per_model,
                                           args.seed, workers=args.workers,
                                           out_dir=out)
        for method, agg in summary.items():
            acc = "n/a" if agg["accuracy"] is None else f"{agg['accuracy']:.3f}"
            print(f"{method}: trials={agg['trials']} median_steps={agg['median_steps']:.1f} "
                  f"decide_rate={agg['decide_rate']:.3f} accuracy={acc} "
                  f"mean_design_ms={agg['mean_design_ms']:.2f}")
        print(f"wrote {out / 'summary.csv'}")
        return 0

    if args.command == "trial":
        cfg = resolve_scenario(args.scenario)
        true_index = args.true_model
        if true_index is None:
            true_index = cfg.true_model if cfg.true_model is not None else 0
        from dataclasses import replace
        cfg = replace(cfg, method=args.method)
        seed = trial_seed_sequence(args.seed, args.method, true_index, 0)
        tid = f"{args.method}-m{true_index}-s{args.seed}"
        record = run_trial(cfg, true_index, seed, trial_id=tid)
        outcome = "undecided" if record.decided is None else f"model {record.decided}"
        print(f"trial {tid}: decided={outcome} steps={record.steps} "
              f"correct={int(record.correct)}")
        if args.trace:
            out = pathlib.Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"trace_{tid}.csv"
            write_trace_csv(path, record)
            print(f"wrote {path}")
        return 0

    if args.command == "sweep-concavity":
        cfg = resolve_scenario(args.scenario)
        rows = concavity_sweep(cfg, DEFAULT_SWEEP_R, DEFAULT_SWEEP_C,
                               np.array(DEFAULT_SWEEP_INPUT))
        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "sweep.csv"
        write_sweep_csv(path, rows)
        npass = sum(1 for *_, ok in rows if ok)
        print(f"wrote {path} ({npass}/{len(rows)} grid points satisfy the condition)")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
