"""Binary tensor files (.vgt).

Layout, all little-endian:

    bytes 0..3   magic "VGOT"
    byte  4      version, 0x01
    byte  5      rank (1..8)
    then         rank x uint32 dims
    then         row-major float32 payload

Round-trips are bitwise for float32 arrays.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, LengthError

MAGIC = b"VGOT"
VERSION = 1
MAX_RANK = 8


def tensor_bytes(tensor: np.ndarray) -> bytes:
    """Serialize to the wire format (converting to float32 if needed)."""
    arr = np.asarray(tensor)
    if arr.ndim < 1 or arr.ndim > MAX_RANK:
        raise ConfigError(f"rank must be 1..{MAX_RANK}, got {arr.ndim}")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if any(dim >= 2**32 for dim in arr.shape):
        raise ConfigError(f"dimension too large for uint32: {arr.shape}")
    header = MAGIC + bytes([VERSION, arr.ndim])
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + dims + arr.tobytes()


def parse_tensor(data: bytes) -> np.ndarray:
    """Inverse of :func:`tensor_bytes`; validates magic, version, length."""
    if len(data) < 6:
        raise LengthError(f"file too short for a header: {len(data)} bytes")
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if data[4] != VERSION:
        raise FormatError(f"unsupported version {data[4]}, expected {VERSION}")
    rank = data[5]
    if not 1 <= rank <= MAX_RANK:
        raise FormatError(f"rank {rank} outside 1..{MAX_RANK}")
    dims_end = 6 + 4 * rank
    if len(data) < dims_end:
        raise LengthError("file truncated inside the dimension table")
    shape = struct.unpack(f"<{rank}I", data[6:dims_end])
    count = int(np.prod(shape, dtype=np.int64))
    expected = dims_end + 4 * count
    if len(data) < expected:
        raise LengthError(f"payload truncated: need {expected} bytes, have {len(data)}")
    if len(data) > expected:
        raise LengthError(f"trailing bytes after payload: {len(data) - expected}")
    flat = np.frombuffer(data, dtype="<f4", count=count, offset=dims_end)
    return flat.reshape(shape).copy()


def write_tensor_file(path, tensor: np.ndarray) -> None:
    Path(path).write_bytes(tensor_bytes(tensor))


def read_tensor_file(path) -> np.ndarray:
    return parse_tensor(Path(path).read_bytes())
