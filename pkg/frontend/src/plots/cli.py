"""Command-line figure generation: ``plot <kind> <csv...> -o <image>``."""

from __future__ import annotations

import argparse
import sys

from . import figures
from .tables import (KNOWN_TABLES, PlotDataError, check_against_schema,
                     load_schema, read_table)

EXIT_OK = 0
EXIT_DATA = 1

# figure kind -> (schema table kind, how many CSV inputs make sense)
KINDS = {
    "convergence-loglog": "convergence",
    "mass-vs-time": "sweep",
    "eoc-table": "convergence",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render figures from the simulator's CSV outputs.")
    parser.add_argument("kind", choices=sorted(KINDS),
                        help="figure to produce")
    parser.add_argument("csvs", nargs="+", metavar="csv",
                        help="input CSV file(s)")
    parser.add_argument("-o", "--output", required=True, metavar="image",
                        help="output image path (format by extension)")
    parser.add_argument("--schema", metavar="schema.txt", default=None,
                        help="validate CSV headers against this schema file "
                             "instead of the built-in column contract")
    return parser


def run(args) -> int:
    table_kind = KINDS[args.kind]
    schema = load_schema(args.schema) if args.schema else KNOWN_TABLES
    tables = []
    for path in args.csvs:
        table = read_table(path)
        check_against_schema(table, table_kind, schema)
        tables.append(table)

    if args.kind == "mass-vs-time":
        labels = figures.plot_mass(tables, args.output)
        print(f"{args.output}: {len(labels)} series "
              f"({', '.join(labels)})")
        return EXIT_OK

    if len(tables) != 1:
        raise PlotDataError(
            f"'{args.kind}' takes exactly one CSV, got {len(tables)}")
    if args.kind == "convergence-loglog":
        slopes = figures.plot_convergence(tables[0], args.output)
        noted = ", ".join(f"{k}={v:.2f}" for k, v in sorted(slopes.items()))
        print(f"{args.output}: final slopes {noted}")
    else:
        rows = figures.plot_eoc_table(tables[0], args.output)
        print(f"{args.output}: {len(rows)} cycles")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except PlotDataError as exc:
        print(f"plot: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
