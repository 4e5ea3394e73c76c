"""Embedding file writer and reader.

Wire format (all integers little-endian):

    bytes 0..7    magic b"SAILEMB1"
    bytes 8..11   u32 version, currently 1
    bytes 12..15  u32 dim  (columns, >= 1)
    bytes 16..19  u32 count (rows, >= 0)
    bytes 20..    count * dim float32 values, row-major

This is an independent implementation of the interchange format, kept
deliberately free of any import from the consumer side so the formats
stay the only coupling between the two packages.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError

MAGIC = b"SAILEMB1"
VERSION = 1
_HEADER = struct.Struct("<III")


def write_matrix(matrix: np.ndarray, path: str | Path) -> None:
    """Write a 2-D float matrix. Rejects non-finite values and shapes
    the format cannot represent (dim must be >= 1)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise FormatError(f"expected a 2-D matrix, got ndim={m.ndim}")
    count, dim = m.shape
    if dim < 1:
        raise FormatError("dim must be >= 1")
    with np.errstate(over="ignore"):
        payload = np.ascontiguousarray(m, dtype="<f4")
    if not np.all(np.isfinite(payload)):
        raise FormatError("matrix holds values not finite in float32")
    blob = MAGIC + _HEADER.pack(VERSION, dim, count) + payload.tobytes()
    Path(path).write_bytes(blob)


def read_matrix(path: str | Path) -> np.ndarray:
    """Read an embedding file back as float64, validating exact length."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(blob) < len(MAGIC) + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    if blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic")
    version, dim, count = _HEADER.unpack_from(blob, len(MAGIC))
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise FormatError(f"{path}: dim must be >= 1")
    expected = len(MAGIC) + _HEADER.size + 4 * dim * count
    if len(blob) != expected:
        raise FormatError(f"{path}: payload length {len(blob)} != {expected}")
    flat = np.frombuffer(blob, dtype="<f4", offset=len(MAGIC) + _HEADER.size)
    if not np.all(np.isfinite(flat)):
        raise FormatError(f"{path}: non-finite payload")
    return flat.astype(np.float64).reshape(count, dim)
