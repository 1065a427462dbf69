"""CSV ingestion and atomic table output."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from quantcorr.errors import InvalidSeries, NonPositivePrice, ParseError, ValidationError

TRANSFORMS = ("none", "log_return_pct")


@dataclass(frozen=True)
class ColumnSpec:
    path: str | os.PathLike
    column: str | int = 0
    transform: str = "none"


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _data_lines(path):
    """Yield ``(line_number, cells)`` for non-blank, non-comment rows."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InvalidSeries(f"cannot open {path}: {exc.strerror}") from None
    with handle:
        for number, cells in enumerate(csv.reader(handle), start=1):
            if not cells or all(not c.strip() for c in cells) or cells[0].lstrip().startswith("#"):
                continue
            yield number, [c.strip() for c in cells]


def read_table(path) -> tuple[list[str] | None, list[tuple[int, list[str]]]]:
    """Split a CSV file into an optional header and numbered data rows.

    The first row is a header when any of its cells is non-numeric.
    """
    rows = list(_data_lines(path))
    if not rows:
        raise InvalidSeries(f"{path} contains no data")
    first = rows[0][1]
    if any(not _is_number(c) for c in first):
        return first, rows[1:]
    return None, rows


def _column_index(header, column) -> int:
    if isinstance(column, int) or (isinstance(column, str) and column.isdigit()):
        return int(column)
    if header is None:
        raise ValidationError(f"column {column!r} requested by name but the file has no header")
    if column not in header:
        raise ValidationError(f"column {column!r} not found; available: {', '.join(header)}")
    return header.index(column)


def read_columns(path, columns: Sequence[str | int]) -> list[np.ndarray]:
    """Parse several numeric columns from one file."""
    header, rows = read_table(path)
    if not rows:
        raise InvalidSeries(f"{path} has a header but no data rows")
    idx = [_column_index(header, c) for c in columns]
    out = [np.empty(len(rows)) for _ in idx]
    for r, (number, cells) in enumerate(rows):
        for j, i in enumerate(idx):
            if i >= len(cells):
                raise ParseError(f"row {number}: missing column {columns[j]!r}", row=number)
            try:
                out[j][r] = float(cells[i])
            except ValueError:
                raise ParseError(f"row {number}: cannot parse {cells[i]!r} as a number",
                                 row=number) from None
    return out


def log_return_pct(prices) -> np.ndarray:
    """``100 * (ln p_t - ln p_{t-1})``; one value shorter than the input."""
    p = np.asarray(prices, dtype=float)
    if np.any(p <= 0.0):
        bad = int(np.flatnonzero(p <= 0.0)[0])
        raise NonPositivePrice(f"log returns need positive prices; entry {bad} is {p[bad]:g}")
    return 100.0 * np.diff(np.log(p))


def read_series(spec: ColumnSpec) -> np.ndarray:
    if spec.transform not in TRANSFORMS:
        raise ValidationError(f"unknown transform {spec.transform!r}; choose from {', '.join(TRANSFORMS)}")
    (series,) = read_columns(spec.path, [spec.column])
    if spec.transform == "log_return_pct":
        series = log_return_pct(series)
    return series


def format_value(value) -> str:
    """Shortest round-trip text for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> None:
    """Write a CSV atomically: the target appears complete or not at all."""
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(buf.getvalue())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
