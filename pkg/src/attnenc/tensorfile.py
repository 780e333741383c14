"""Binary tensor container used for every array on disk.

Layout, all little-endian:

    bytes 0..7   magic "ATTN0001"
    uint32       ndim
    uint64 * n   dims, slowest axis first (row-major payload)
    uint8        dtype code: 1 = float32, 2 = float64
    payload      dims product * itemsize bytes

Payloads may be stored in float32 to save space; readers always widen to
float64. A float64 round trip is bitwise exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["MAGIC", "TensorFileError", "write_tensor", "read_tensor"]

MAGIC = b"ATTN0001"

_CODES = {"float32": (1, "<f4"), "float64": (2, "<f8")}
_BY_CODE = {1: "<f4", 2: "<f8"}
_MAX_NDIM = 16


class TensorFileError(ValueError):
    """Raised for malformed tensor files, with a distinct message per defect."""


def write_tensor(path, array, dtype: str = "float64") -> None:
    """Serialize an array to ``path``; dtype picks the payload precision."""
    if dtype not in _CODES:
        raise ValueError(f"unsupported dtype {dtype!r}; use 'float32' or 'float64'")
    arr = np.atleast_1d(np.asarray(array))
    if arr.ndim > _MAX_NDIM:
        raise ValueError(f"tensor rank {arr.ndim} exceeds the format limit of {_MAX_NDIM}")
    if not np.issubdtype(arr.dtype, np.floating) and not np.issubdtype(arr.dtype, np.integer) and arr.dtype != np.bool_:
        raise ValueError(f"cannot serialize dtype {arr.dtype}")
    code, np_dtype = _CODES[dtype]
    payload = np.ascontiguousarray(arr.astype(np_dtype, copy=False)).tobytes()
    header = bytearray(MAGIC)
    header += struct.pack("<I", arr.ndim)
    for d in arr.shape:
        header += struct.pack("<Q", d)
    header.append(code)
    Path(path).write_bytes(bytes(header) + payload)


def read_tensor(path) -> np.ndarray:
    """Read a tensor file back as a float64 array (float32 payloads widen)."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise TensorFileError(f"{path}: bad magic, not a tensor file")
    off = len(MAGIC)
    if len(data) < off + 4:
        raise TensorFileError(f"{path}: truncated header (missing rank)")
    (ndim,) = struct.unpack_from("<I", data, off)
    off += 4
    if ndim < 1 or ndim > _MAX_NDIM:
        raise TensorFileError(f"{path}: unreasonable tensor rank {ndim}")
    if len(data) < off + 8 * ndim + 1:
        raise TensorFileError(f"{path}: truncated header (missing dims)")
    dims = struct.unpack_from(f"<{ndim}Q", data, off)
    off += 8 * ndim
    code = data[off]
    off += 1
    if code not in _BY_CODE:
        raise TensorFileError(f"{path}: unknown dtype code {code}")
    np_dtype = np.dtype(_BY_CODE[code])
    count = 1
    for d in dims:
        if d == 0 or d > 2**40:
            raise TensorFileError(f"{path}: invalid dimension {d}")
        count *= d
    expected = count * np_dtype.itemsize
    actual = len(data) - off
    if actual < expected:
        raise TensorFileError(f"{path}: truncated payload (expected {expected} bytes, found {actual})")
    if actual > expected:
        raise TensorFileError(f"{path}: oversized payload (expected {expected} bytes, found {actual})")
    arr = np.frombuffer(data, dtype=np_dtype, count=count, offset=off).reshape(dims)
    return arr.astype(np.float64)
