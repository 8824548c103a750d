"""clafd-plot: render result images from the harness CSV files."""

import argparse
import sys

from .render import plot_sweep, plot_trace, plot_violins


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clafd-plot",
                                     description="plots for clafd result files")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, note in [("violins", "steps-to-decision distribution per method"),
                       ("trace", "inputs and beliefs of one trial"),
                       ("sweep", "concavity-condition pass heatmap")]:
        p = sub.add_parser(kind, help=note)
        p.add_argument("--in", dest="infile", required=True)
        p.add_argument("--out", dest="outfile", required=True)
        if kind == "trace":
            p.add_argument("--threshold", type=float, default=0.98)
    args = parser.parse_args(argv)

    try:
        if args.kind == "violins":
            out = plot_violins(args.infile, args.outfile)
        elif args.kind == "trace":
            out = plot_trace(args.infile, args.outfile, threshold=args.threshold)
        else:
            out = plot_sweep(args.infile, args.outfile)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
