"""TTEN raw tensor files.

Layout: magic ``TTEN``, version byte 1, dtype byte (1 = f32, 2 = f64),
rank byte, then rank little-endian u32 extents, then the row-major
little-endian payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"TTEN"
VERSION = 1

_DTYPE_BYTE = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}
_BYTE_DTYPE = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


def write_stream(fh, array: np.ndarray) -> None:
    arr = np.asarray(array)
    if arr.dtype not in _DTYPE_BYTE:
        raise ValueError(f"TTEN holds f32/f64 only, got {arr.dtype}")
    if arr.ndim > 255:
        raise ValueError(f"rank {arr.ndim} does not fit a rank byte")
    fh.write(MAGIC)
    fh.write(bytes([VERSION, _DTYPE_BYTE[arr.dtype], arr.ndim]))
    for extent in arr.shape:
        fh.write(struct.pack("<I", extent))
    fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def read_stream(fh) -> np.ndarray:
    head = fh.read(7)
    if len(head) < 7:
        raise ValueError("TTEN: truncated header")
    if head[:4] != MAGIC:
        raise ValueError(f"TTEN: bad magic {head[:4]!r}")
    version, dtype_byte, rank = head[4], head[5], head[6]
    if version != VERSION:
        raise ValueError(f"TTEN: unsupported version {version}")
    if dtype_byte not in _BYTE_DTYPE:
        raise ValueError(f"TTEN: unknown dtype byte {dtype_byte}")
    raw = fh.read(4 * rank)
    if len(raw) < 4 * rank:
        raise ValueError("TTEN: truncated extents")
    shape = struct.unpack(f"<{rank}I", raw) if rank else ()
    dtype = _BYTE_DTYPE[dtype_byte]
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    payload = fh.read(count * dtype.itemsize)
    if len(payload) < count * dtype.itemsize:
        raise ValueError(f"TTEN: truncated payload, expected {count} elements")
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape)
    return arr.astype(dtype.newbyteorder("="))


def write(path, array: np.ndarray) -> None:
    with open(Path(path), "wb") as fh:
        write_stream(fh, array)


def read(path) -> np.ndarray:
    with open(Path(path), "rb") as fh:
        return read_stream(fh)
