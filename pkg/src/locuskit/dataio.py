"""CSV/JSON/PGM reading and atomic writing for the CLI.

CSV data files carry a header row and decimal floats; data written back
uses %.17g so a round trip reproduces every float64 exactly.  All writers
go through a temp file + rename.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile

import numpy as np

from .errors import InvalidParameter, ParseError, SchemaMismatch
from .estimators import Dataset
from .sequence import Sequence

__all__ = [
    "ingest_csv",
    "write_csv",
    "write_json",
    "read_pgm",
    "write_pgm",
    "atomic_write_text",
    "atomic_write_bytes",
]

SCHEMAS = ("features-only", "features+target", "features+label", "sequence")


def atomic_write_bytes(path, payload: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _parse_cell(raw: str, row: int, col: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(
            f"row {row}, column {col}: {raw!r} is not a decimal float",
            row=row,
            column=col,
        ) from None


def ingest_csv(path, schema: str):
    """Read a headered CSV into a Dataset or Sequence per the schema.

    features-only: every column is a feature.
    features+target: last column is a real target.
    features+label: last column is an integer class label.
    sequence: first column is a strictly increasing time index.
    """
    if schema not in SCHEMAS:
        raise SchemaMismatch(f"unknown schema {schema!r}; expected one of {SCHEMAS}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty (header row required)", row=0) from None
        width = len(header)
        min_width = 2 if schema in ("features+target", "features+label", "sequence") else 1
        if width < min_width:
            raise SchemaMismatch(
                f"schema {schema!r} needs at least {min_width} columns, header has {width}"
            )
        rows = []
        for r, line in enumerate(reader, start=1):
            if not line:
                continue
            if len(line) != width:
                raise ParseError(
                    f"row {r}: expected {width} cells, found {len(line)}", row=r
                )
            rows.append([_parse_cell(cell, r, c) for c, cell in enumerate(line)])
    if not rows:
        raise SchemaMismatch("no data rows")
    table = np.asarray(rows, dtype=float)

    if schema == "features-only":
        return Dataset(table)
    if schema == "features+target":
        return Dataset(table[:, :-1], table[:, -1])
    if schema == "features+label":
        labels = table[:, -1]
        if not np.allclose(labels, np.round(labels)):
            raise SchemaMismatch("label column contains non-integer values")
        return Dataset(table[:, :-1], labels.astype(int))
    times = table[:, 0]
    if (np.diff(times) <= 0).any():
        raise SchemaMismatch("sequence times must be strictly increasing")
    return Sequence(tokens=table[:, 1:], times=times)


def write_csv(path, header, rows) -> None:
    """Write rows of floats (or strings) under a header, %.17g formatting."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            else:
                cells.append("%.17g" % float(cell))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_pgm(path) -> np.ndarray:
    """Binary 8-bit PGM (P5) to a 2-D uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        tokens.append(data[start:i])
    if not tokens or tokens[0] != b"P5":
        raise ParseError("not a binary PGM (P5) file")
    if len(tokens) < 4:
        raise ParseError("truncated PGM header")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ParseError(f"only 8-bit PGM supported, maxval={maxval}")
    i += 1  # single whitespace after maxval
    pixels = np.frombuffer(data[i : i + width * height], dtype=np.uint8)
    if pixels.size != width * height:
        raise ParseError("truncated PGM pixel data")
    return pixels.reshape(height, width).copy()


def write_pgm(path, image) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise InvalidParameter("PGM image must be 2-D")
    clipped = np.clip(np.round(img), 0, 255).astype(np.uint8)
    header = f"P5\n{clipped.shape[1]} {clipped.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + clipped.tobytes())
