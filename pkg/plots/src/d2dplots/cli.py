"""Command line: render experiment CSVs into the standard figures.

    plots render --kind coop --in coop.csv --out fig_coop.png
    plots render --kind heuristics --in heur.csv --out fig_heur.png

`--in` may repeat to merge several sweep CSVs into one three-panel figure.
Exit codes: 0 success, 2 unusable input (missing file/columns, empty data).
"""

from __future__ import annotations

import argparse
import json
import sys

from .figures import (FigureDataError, coop_spec, heuristics_spec,
                      render_three_panel)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plots",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render a figure from experiment CSVs")
    p.add_argument("--kind", choices=["coop", "heuristics"], required=True)
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   metavar="CSV", help="input CSV (repeat for more panels)")
    p.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    make_spec = coop_spec if args.kind == "coop" else heuristics_spec
    try:
        summary = render_three_panel(make_spec(args.inputs, args.out))
    except (FigureDataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
