"""Reading and writing ESRI ASCII grid (.asc) rasters.

The format is six header lines -- ncols, nrows, xllcorner, yllcorner,
cellsize, NODATA_value, in that order, keys case-insensitive -- then
nrows lines of whitespace-separated elevations, northernmost row first.

Writing is canonical: one header key and value per line, one raster row
per line, single spaces, and shortest round-trip numerals (integral
values are written without a decimal point, everything else uses the
shortest digit string that parses back to the same float).  Parsing a
canonical document and re-writing it reproduces the bytes exactly.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .grid import DemGrid, GridError

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")
_CANONICAL_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value")
_TOKEN_RE = re.compile(r"\S+")


class AsciiGridError(ValueError):
    """Parse failure; line and column are 1-based document positions."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            message = f"{message} ({where})"
        super().__init__(message)
        self.line = line
        self.column = column


def parse_ascii_grid(text: str) -> DemGrid:
    """Parse an ASCII grid document into a DemGrid."""
    lines = text.splitlines()
    if len(lines) < 6:
        raise AsciiGridError(
            f"expected 6 header lines, document has {len(lines)}", line=len(lines) or 1
        )

    header: dict[str, float] = {}
    for idx, want in enumerate(_HEADER_KEYS):
        parts = lines[idx].split()
        if len(parts) != 2:
            raise AsciiGridError(
                f"header line must be 'key value', got {lines[idx]!r}", line=idx + 1
            )
        key, value = parts
        if key.lower() != want:
            raise AsciiGridError(
                f"expected header key {want!r}, got {key!r}", line=idx + 1
            )
        col = lines[idx].index(value, len(key)) + 1
        if want in ("ncols", "nrows"):
            try:
                header[want] = int(value)
            except ValueError:
                raise AsciiGridError(
                    f"{want} must be an integer, got {value!r}", line=idx + 1, column=col
                ) from None
            if header[want] <= 0:
                raise AsciiGridError(
                    f"{want} must be positive, got {value!r}", line=idx + 1, column=col
                )
        else:
            try:
                header[want] = float(value)
            except ValueError:
                raise AsciiGridError(
                    f"{want} must be a number, got {value!r}", line=idx + 1, column=col
                ) from None
            if not math.isfinite(header[want]):
                raise AsciiGridError(
                    f"{want} must be finite, got {value!r}", line=idx + 1, column=col
                )

    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    body_lines = lines[6:]
    tokens: list[str] = []
    for line in body_lines:
        tokens.extend(line.split())

    expected = ncols * nrows
    if len(tokens) != expected:
        if len(tokens) < expected:
            raise AsciiGridError(
                f"expected {expected} elevation values, found {len(tokens)}",
                line=len(lines),
            )
        # locate the first surplus token for the error message
        seen = 0
        for offset, line in enumerate(body_lines):
            matches = list(_TOKEN_RE.finditer(line))
            if seen + len(matches) > expected:
                m = matches[expected - seen]
                raise AsciiGridError(
                    f"expected {expected} elevation values, found {len(tokens)}",
                    line=7 + offset,
                    column=m.start() + 1,
                )
            seen += len(matches)
        raise AsciiGridError(
            f"expected {expected} elevation values, found {len(tokens)}", line=len(lines)
        )

    try:
        values = np.array(tokens, dtype=np.float64)
    except ValueError:
        # slow path only to locate the offending token
        for offset, line in enumerate(body_lines):
            for m in _TOKEN_RE.finditer(line):
                try:
                    float(m.group())
                except ValueError:
                    raise AsciiGridError(
                        f"invalid elevation value {m.group()!r}",
                        line=7 + offset,
                        column=m.start() + 1,
                    ) from None
        raise  # pragma: no cover - unreachable

    try:
        return DemGrid(
            ncols=ncols,
            nrows=nrows,
            origin_x=header["xllcorner"],
            origin_y=header["yllcorner"],
            cellsize=header["cellsize"],
            nodata=header["nodata_value"],
            elevations=values.reshape(nrows, ncols),
        )
    except GridError as exc:
        raise AsciiGridError(str(exc)) from exc


def write_ascii_grid(grid: DemGrid) -> str:
    """Serialize a DemGrid to the canonical ASCII grid text."""
    header_values = (
        grid.ncols,
        grid.nrows,
        grid.origin_x,
        grid.origin_y,
        grid.cellsize,
        grid.nodata,
    )
    out = [f"{key} {format_number(val)}" for key, val in zip(_CANONICAL_KEYS, header_values)]
    for row in grid.elevations:
        out.append(" ".join(format_number(v) for v in row))
    return "\n".join(out) + "\n"


def format_number(v: float) -> str:
    """Shortest numeral that round-trips: bare integers, repr otherwise."""
    f = float(v)
    if f == int(f) and abs(f) < 1e16:
        return str(int(f))
    return repr(f)
