"""Command line: plotkit --metric msd_db --out fig.png a.csv:Label [b.csv:Label2] [--bounds]

Each positional argument is a CSV path with an optional ``:Label`` suffix
(default label: the file stem).  ``--metric both`` renders the two-panel
consensus + MSD figure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import (METRICS, PlotSpec, SchemaMismatch, render,
                     render_two_panel)


def parse_input(arg: str) -> tuple:
    path, sep, label = arg.rpartition(":")
    if not sep or not path:
        return arg, Path(arg).stem
    return path, label


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render experiment trace CSVs into convergence figures")
    parser.add_argument("inputs", nargs="+", metavar="CSV[:LABEL]",
                        help="input CSV, optionally labeled")
    parser.add_argument("--metric", required=True,
                        choices=list(METRICS) + ["both"])
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--bounds", action="store_true",
                        help="overlay theory-bound curves (dotted)")
    args = parser.parse_args(argv)

    inputs = tuple(parse_input(a) for a in args.inputs)
    try:
        if args.metric == "both":
            result = render_two_panel(inputs, args.out,
                                      overlay_bounds=args.bounds)
        else:
            result = render(PlotSpec(inputs=inputs, metric=args.metric,
                                     out_path=args.out,
                                     overlay_bounds=args.bounds))
    except (SchemaMismatch, ValueError, FileNotFoundError) as e:
        print(f"plotkit: {e}", file=sys.stderr)
        return 2
    print(f"wrote {result.out_path} ({result.width_px}x{result.height_px}px, "
          f"{len(result.t)} points per curve)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
