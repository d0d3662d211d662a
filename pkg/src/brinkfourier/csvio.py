"""CSV serialization shared by the command line and the experiment drivers.

Floats are written with ``repr``, which is the shortest string that parses
back to the same double, so every file round-trips exactly and identical
inputs give byte-identical output.
"""

from __future__ import annotations

import csv
import math
import os
from typing import Iterable, Sequence

import numpy as np

FORMAT_VERSION = 1


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    if isinstance(v, tuple):
        return " ".join(str(int(i)) for i in v)
    return str(v)


def write_table(path: str | os.PathLike, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a header row plus data rows; raises ``OSError`` on I/O failure."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} entries, header has {len(columns)}")
            w.writerow([format_value(v) for v in row])


def read_table(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV file")
    return rows[0], rows[1:]


def write_key_values(path: str | os.PathLike, items: Sequence[tuple[str, object]]) -> None:
    """Two-column ``key,value`` table with ``format_version`` first."""
    write_table(path, ["key", "value"],
                [("format_version", FORMAT_VERSION), *items])
