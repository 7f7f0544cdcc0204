"""Bit-exact binary array persistence.

Layout: a 64-byte header (magic "SCLN", format version, element kind,
rank, dims) followed by the little-endian row-major payload; complex
values are stored as (re, im) pairs.  Files are self-describing: no
external schema is needed to read one back.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["ArrayFileError", "write_array", "read_array"]

MAGIC = b"SCLN"
VERSION = 1
_KIND_F64 = 0
_KIND_C128 = 1
_MAX_RANK = 7
_HEADER = struct.Struct("<4sHBB7Q")  # 4+2+1+1+56 = 64 bytes
assert _HEADER.size == 64


class ArrayFileError(RuntimeError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def write_array(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        arr = arr.astype(np.complex128, copy=False)
        kind = _KIND_C128
    else:
        arr = arr.astype(np.float64, copy=False)
        kind = _KIND_F64
    if arr.ndim > _MAX_RANK:
        raise ArrayFileError("E_ARRAY_RANK", f"rank {arr.ndim} exceeds {_MAX_RANK}")
    dims = tuple(arr.shape) + (0,) * (_MAX_RANK - arr.ndim)
    header = _HEADER.pack(MAGIC, VERSION, kind, arr.ndim, *dims)
    payload = np.ascontiguousarray(arr).astype(
        "<c16" if kind == _KIND_C128 else "<f8", copy=False
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_array(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ArrayFileError("E_MISSING_FILE", str(path))
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ArrayFileError("E_ARRAY_HEADER", "file shorter than the header")
    magic, version, kind, rank, *dims = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ArrayFileError("E_ARRAY_MAGIC", f"bad magic {magic!r}")
    if version != VERSION:
        raise ArrayFileError("E_ARRAY_VERSION", f"unsupported version {version}")
    if kind not in (_KIND_F64, _KIND_C128):
        raise ArrayFileError("E_ARRAY_KIND", f"unknown element kind {kind}")
    if rank > _MAX_RANK:
        raise ArrayFileError("E_ARRAY_RANK", f"rank {rank} exceeds {_MAX_RANK}")
    shape = tuple(int(d) for d in dims[:rank])
    count = int(np.prod(shape)) if shape else 1
    itemsize = 16 if kind == _KIND_C128 else 8
    expected = _HEADER.size + count * itemsize
    if len(raw) != expected:
        raise ArrayFileError(
            "E_ARRAY_PAYLOAD",
            f"expected {expected} bytes, found {len(raw)}",
        )
    dtype = "<c16" if kind == _KIND_C128 else "<f8"
    arr = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size, count=count)
    return arr.reshape(shape).copy()
