"""On-disk formats: the SGN1 binary matrix, CSV matrices and JSON sidecars.

SGN1 layout::

    b"SGN1" | rows: u64 LE | cols: u64 LE | rows*cols float64 LE, row-major
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

MAGIC = b"SGN1"
_HEADER = struct.Struct("<4sQQ")


def write_matrix(path, values) -> None:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {values.shape}")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    """Read an SGN1 file. Entries are returned as they were stored (no finiteness check)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 8 * rows * cols
    if len(raw) != expected:
        raise ParseError(
            f"{path}: header declares {rows}x{cols} ({expected} bytes) "
            f"but file has {len(raw)} bytes"
        )
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=rows * cols)
    return data.astype(np.float64).reshape(rows, cols)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_csv_matrix(path) -> tuple[np.ndarray, list[str] | None]:
    """Parse a comma-separated numeric matrix with an optional header row.

    Returns the values and the header names (``None`` when absent). Errors
    carry 1-based line and column numbers.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError(f"{path}: empty file")

    names = None
    first = [tok.strip() for tok in lines[0].split(",")]
    start = 0
    if not all(_is_number(tok) for tok in first):
        names = first
        start = 1
    rows = []
    ncols = len(names) if names is not None else None
    for lineno, line in enumerate(lines[start:], start=start + 1):
        tokens = [tok.strip() for tok in line.split(",")]
        if ncols is None:
            ncols = len(tokens)
        if len(tokens) != ncols:
            raise ParseError(
                f"{path}: line {lineno} has {len(tokens)} columns, expected {ncols}"
            )
        row = []
        for col, tok in enumerate(tokens, start=1):
            try:
                row.append(float(tok))
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}, column {col}: cannot parse {tok!r} as a number"
                ) from None
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: header present but no data rows")
    return np.array(rows, dtype=np.float64), names


def write_csv_matrix(path, values, names=None) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    with open(path, "w", encoding="utf-8") as fh:
        if names is not None:
            fh.write(",".join(names) + "\n")
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def check_finite(values: np.ndarray, what: str = "matrix") -> None:
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        loc = tuple(int(i) for i in bad[0])
        raise ValidationError(
            f"{what} has {len(bad)} non-finite entries; first at index {loc}"
        )


def array_hash(values) -> str:
    values = np.ascontiguousarray(np.asarray(values, dtype="<f8"))
    h = hashlib.sha256()
    h.update(str(values.shape).encode())
    h.update(values.tobytes())
    return h.hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
