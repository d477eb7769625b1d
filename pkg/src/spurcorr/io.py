"""CSV ingestion and emission for the CLI.

Matrices are comma-separated numeric tables, one row per observation, with
an optional header row. The response may be a designated column (by name or
0-based index) or a separate single-column file. Parse failures report the
1-based row/column of the first offending token.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .core import Dataset
from .errors import ParseError, RaggedRows


def _scan_for_error(path, header: bool) -> None:
    """Slow pass locating the first bad token / ragged row; always raises."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        width = None
        for rix, row in enumerate(reader, start=1):
            if rix == 1 and header:
                width = len(row)
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise RaggedRows(
                    f"row {rix} has {len(row)} fields, expected {width}"
                )
            for cix, tok in enumerate(row, start=1):
                try:
                    val = float(tok)
                except ValueError:
                    raise ParseError(
                        f"cannot parse {tok!r} at row {rix}, column {cix}",
                        row=rix, col=cix,
                    ) from None
                if not math.isfinite(val):
                    raise ParseError(
                        f"non-finite value {tok!r} at row {rix}, column {cix}",
                        row=rix, col=cix,
                    )
    raise ParseError("file is empty or unreadable", row=1, col=1)


def read_table(path, header: bool = False) -> tuple[np.ndarray, list[str] | None]:
    """Numeric matrix plus column names (None without a header row)."""
    path = Path(path)
    names: list[str] | None = None
    if header:
        with open(path, newline="") as fh:
            first = next(csv.reader(fh), None)
        if first is None:
            raise ParseError("file is empty", row=1, col=1)
        names = [c.strip() for c in first]
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except ValueError:
        _scan_for_error(path, header)
        raise  # pragma: no cover - _scan_for_error always raises
    if data.size == 0:
        raise ParseError("file contains no data rows", row=2 if header else 1, col=1)
    if not np.all(np.isfinite(data)):
        _scan_for_error(path, header)
    if names is not None and len(names) != data.shape[1]:
        raise RaggedRows(
            f"header has {len(names)} fields but rows have {data.shape[1]}"
        )
    return data, names


def read_matrix(
    path,
    header: bool = False,
    response_col: str | None = None,
    response_path=None,
) -> Dataset:
    """Load a covariate matrix, extracting the response if requested.

    ``response_col`` selects a column of the matrix by header name or
    0-based index; ``response_path`` reads a separate single-column file.
    The two options are mutually exclusive.
    """
    if response_col is not None and response_path is not None:
        raise ValueError("give either response_col or response_path, not both")
    data, names = read_table(path, header=header)
    y = None
    if response_col is not None:
        if names and response_col in names:
            cix = names.index(response_col)
        else:
            try:
                cix = int(response_col)
            except ValueError:
                raise ValueError(
                    f"response column {response_col!r} not found in header"
                ) from None
            if not 0 <= cix < data.shape[1]:
                raise ValueError(f"response column index {cix} out of range")
        y = data[:, cix]
        data = np.delete(data, cix, axis=1)
        if names:
            names = names[:cix] + names[cix + 1 :]
    elif response_path is not None:
        yarr, _ = read_table(response_path, header=False)
        if yarr.shape[1] != 1:
            raise ValueError("response file must have exactly one column")
        if yarr.shape[0] != data.shape[0]:
            raise ValueError(
                f"response has {yarr.shape[0]} rows, matrix has {data.shape[0]}"
            )
        y = yarr[:, 0]
    return Dataset(x=data, y=y, column_names=tuple(names) if names else None)


def write_matrix(path, x: np.ndarray, header: list[str] | None = None) -> None:
    """Write a float matrix with full round-trip precision."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow(header)
        for row in x:
            writer.writerow([repr(float(v)) for v in row])


def write_vector(path, v: np.ndarray, header: str | None = None) -> None:
    write_matrix(path, np.asarray(v).reshape(-1, 1),
                 header=[header] if header else None)
