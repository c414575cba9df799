"""Plain-text table output with reproducible formatting.

All floating-point values are written with 17 significant digits so a
re-run can be compared byte for byte.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return f"{value:.17g}"
    return str(value)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(columns) + "\n")
        for row in rows:
            handle.write(",".join(fmt(v) for v in row) + "\n")


def write_matrix_csv(path: str | Path, matrix) -> None:
    """Header-free 0/1 grid, one row per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in matrix:
            handle.write(",".join(str(int(v)) for v in row) + "\n")
