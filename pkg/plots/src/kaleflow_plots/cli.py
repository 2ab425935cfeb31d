"""Command-line figure rendering for kaleflow run directories."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureInputError, plot_curves, plot_particles


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="kaleflow-plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("particles", help="multi-panel particle snapshots over the target")
    p.add_argument("run_dir", help="flow run output directory")
    p.add_argument("--steps", required=True,
                   help="comma-separated snapshot steps, e.g. 0,100,1000")
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    p.add_argument("--xlim", nargs=2, type=float, default=None)
    p.add_argument("--ylim", nargs=2, type=float, default=None)

    c = sub.add_parser("curves", help="per-trace line plots of one trace column")
    c.add_argument("traces", nargs="+",
                   help="trace CSVs, each optionally suffixed :label")
    c.add_argument("--column", required=True, help="trace column to plot")
    c.add_argument("--out", required=True, help="output image (.png or .svg)")
    c.add_argument("--logy", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "particles":
            steps = [int(s) for s in args.steps.split(",") if s]
            xlim = tuple(args.xlim) if args.xlim else None
            ylim = tuple(args.ylim) if args.ylim else None
            out, _ = plot_particles(args.run_dir, steps, args.out, xlim=xlim, ylim=ylim)
        else:
            paths, labels = [], []
            for spec in args.traces:
                path, _, label = spec.partition(":")
                paths.append(path)
                labels.append(label or path)
            out, _ = plot_curves(paths, labels, args.column, args.out, logy=args.logy)
    except (FigureInputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
