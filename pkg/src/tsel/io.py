"""Binary feature-matrix files ("TSEL v1").

Layout: 4 magic bytes ``TSEL``, then three little-endian u32 fields
(version, rows, dims), then rows*dims little-endian IEEE-754 float32
values in row-major order. Payloads containing NaN or infinity are
rejected on both read and write.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"TSEL"
VERSION = 1

_HEADER = struct.Struct("<4sIII")


class FeatureFileError(Exception):
    """A feature file violates the TSEL v1 format."""


class BadMagicError(FeatureFileError):
    """File does not start with the TSEL magic bytes."""


class UnsupportedVersionError(FeatureFileError):
    """File declares a version this reader does not understand."""


class TruncatedFileError(FeatureFileError):
    """File ends before the declared payload is complete."""


class NonFinitePayloadError(FeatureFileError):
    """Payload contains NaN or infinite values."""


def write_features(path: str | Path, matrix) -> None:
    """Write a 2-D array of finite reals as a TSEL v1 file.

    Values are stored as float32; inputs whose magnitude overflows
    float32 are rejected rather than silently saturated.
    """
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("feature matrix must be 2-D with at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError("feature matrix contains non-finite values")
    with np.errstate(over="ignore"):  # overflow is detected and rejected below
        payload = arr.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise ValueError("feature matrix has values outside float32 range")
    rows, dims = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, dims))
        fh.write(payload.tobytes(order="C"))


def load_features(path: str | Path) -> np.ndarray:
    """Read a TSEL v1 file into a float32 array of shape (rows, dims).

    Raises BadMagicError, UnsupportedVersionError, TruncatedFileError or
    NonFinitePayloadError; each condition gets its own type so callers
    can report precise failure causes.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        if raw[: min(len(raw), 4)] != MAGIC[: min(len(raw), 4)]:
            raise BadMagicError(f"{path}: not a TSEL file (bad magic bytes)")
        raise TruncatedFileError(f"{path}: header truncated at {len(raw)} bytes")
    magic, version, rows, dims = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: not a TSEL file (bad magic bytes {magic!r})")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version} (expected {VERSION})")
    if rows < 1 or dims < 1:
        raise FeatureFileError(f"{path}: rows and dims must both be >= 1, got {rows}x{dims}")
    expected = rows * dims * 4
    body = raw[_HEADER.size :]
    if len(body) < expected:
        raise TruncatedFileError(
            f"{path}: payload truncated, expected {expected} bytes for "
            f"{rows}x{dims} floats but found {len(body)}"
        )
    if len(body) > expected:
        raise FeatureFileError(f"{path}: {len(body) - expected} trailing bytes after payload")
    values = np.frombuffer(body, dtype="<f4").reshape(rows, dims)
    bad = ~np.isfinite(values)
    if bad.any():
        flat = int(np.flatnonzero(bad)[0])
        r, c = divmod(flat, dims)
        raise NonFinitePayloadError(
            f"{path}: non-finite value at row {r}, column {c} "
            f"(byte offset {_HEADER.size + 4 * flat})"
        )
    return np.array(values)  # own the buffer; source bytes are discarded
