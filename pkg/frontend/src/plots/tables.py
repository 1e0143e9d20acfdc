"""CSV readers for the simulator's delimited outputs.

The parsers are strict about headers so that a typo in a hand-edited file or
a contract drift in the producer surfaces as a named-column error instead of
a confusing downstream plot.  Missing values are written as ``-`` by the
producer and parsed here as None.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

MISSING = "-"

# consumed contract: header tuples of the producer's delimited files
CONVERGENCE_COLUMNS = ("cycle", "cells", "h",
                       "err_c_l2", "err_c_h1", "err_u_l2", "err_u_h1",
                       "eoc_c_l2", "eoc_c_h1", "eoc_u_l2", "eoc_u_h1")
SWEEP_COLUMNS = ("param_value", "t", "M")
OBSERVABLE_COLUMNS = ("t", "mass", "c_min", "c_max", "u_max")

KNOWN_TABLES = {
    "convergence": CONVERGENCE_COLUMNS,
    "sweep": SWEEP_COLUMNS,
    "observables": OBSERVABLE_COLUMNS,
}

_SCHEMA_LINE = re.compile(r"^(\S+?)\.csv:\s*(.+)$")


class PlotDataError(Exception):
    """Input CSV is missing, malformed, or too small to plot."""


@dataclass(frozen=True)
class Table:
    """One parsed CSV: the header tuple and one list per column."""

    path: Path
    columns: tuple[str, ...]
    data: dict[str, list]

    def __len__(self) -> int:
        return len(self.data[self.columns[0]]) if self.columns else 0

    def column(self, name: str) -> list:
        if name not in self.data:
            raise PlotDataError(
                f"{self.path}: missing column '{name}' "
                f"(has: {', '.join(self.columns)})")
        return self.data[name]


def _parse_cell(text: str):
    text = text.strip()
    if text == MISSING or text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path) -> Table:
    path = Path(path)
    if not path.is_file():
        raise PlotDataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotDataError(f"{path}: empty file, no header row") from None
        columns = tuple(name.strip() for name in header)
        data: dict[str, list] = {name: [] for name in columns}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(columns):
                raise PlotDataError(
                    f"{path}:{lineno}: expected {len(columns)} fields, "
                    f"got {len(row)}")
            for name, cell in zip(columns, row):
                data[name].append(_parse_cell(cell))
    return Table(path=path, columns=columns, data=data)


def require_columns(table: Table, expected) -> None:
    """Fail with every absent column named, not just the first."""
    missing = [name for name in expected if name not in table.data]
    if missing:
        raise PlotDataError(
            f"{table.path}: missing column(s) {', '.join(missing)}; "
            f"found: {', '.join(table.columns)}")


def load_schema(path) -> dict[str, tuple[str, ...]]:
    """Parse the producer's schema.txt into {table kind: header tuple}.

    Lines look like ``convergence.csv: cycle, cells, ...``; the sweep line
    uses a ``sweep_<parameter>`` placeholder that is keyed as ``sweep``.
    """
    path = Path(path)
    if not path.is_file():
        raise PlotDataError(f"{path}: no such schema file")
    schema: dict[str, tuple[str, ...]] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        match = _SCHEMA_LINE.match(line)
        if match is None:
            continue
        stem, cols = match.groups()
        kind = "sweep" if stem.startswith("sweep") else stem
        schema[kind] = tuple(c.strip() for c in cols.split(","))
    if not schema:
        raise PlotDataError(f"{path}: no table definitions found")
    return schema


def check_against_schema(table: Table, kind: str, schema) -> None:
    """Compare a file's header with the schema entry for its kind."""
    if kind not in schema:
        raise PlotDataError(
            f"schema has no entry for '{kind}' tables "
            f"(knows: {', '.join(sorted(schema))})")
    expected = schema[kind]
    if table.columns != expected:
        raise PlotDataError(
            f"{table.path}: header {', '.join(table.columns)} does not "
            f"match the '{kind}' schema {', '.join(expected)}")


def numeric_pairs(xs, ys):
    """Rows where both entries parsed as finite numbers, in file order."""
    pairs = []
    for x, y in zip(xs, ys):
        if isinstance(x, float) and isinstance(y, float) \
                and math.isfinite(x) and math.isfinite(y):
            pairs.append((x, y))
    return pairs
