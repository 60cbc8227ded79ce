"""XLFT binary container for named arrays.

Layout (all little-endian): magic ``XLFT``, version u32 = 1, entry count
u32, then per entry: name length u32, UTF-8 name, dtype u8 (0 = float64
tensor, 1 = uint8 mask), ndim u32, one u64 per dim, raw row-major data.

The same container carries model parameters, pruning masks stored under
``<param>.mask``, distance matrices under ``distance.<source>``, and image
feature stores keyed by image id.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"XLFT"
VERSION = 1

_DTYPE_F64 = 0
_DTYPE_U8 = 1


def save_container(path, entries: dict[str, np.ndarray]) -> None:
    """Write named arrays; float arrays as f64, uint8 arrays as masks."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(entries))
    for name, arr in entries.items():
        arr = np.asarray(arr)
        if arr.dtype == np.uint8:
            code, payload = _DTYPE_U8, arr
        else:
            code, payload = _DTYPE_F64, arr.astype(np.float64, copy=False)
        encoded = name.encode("utf-8")
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<BI", code, payload.ndim)
        for dim in payload.shape:
            blob += struct.pack("<Q", dim)
        blob += np.ascontiguousarray(payload).tobytes()
    path.write_bytes(bytes(blob))


def load_container(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"container not found: {path}")
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported container version {version}")
    offset = 12
    entries: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            code, ndim = struct.unpack_from("<BI", raw, offset)
            offset += 5
            dims = struct.unpack_from(f"<{ndim}Q", raw, offset) if ndim else ()
            offset += 8 * ndim
            if code == _DTYPE_F64:
                dtype, itemsize = np.float64, 8
            elif code == _DTYPE_U8:
                dtype, itemsize = np.uint8, 1
            else:
                raise CheckpointError(f"{path}: unknown dtype code {code} for entry {name!r}")
            size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
            data = np.frombuffer(raw, dtype=dtype, count=size, offset=offset).reshape(dims)
            offset += size * itemsize
            entries[name] = data.copy()
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated container ({exc})")
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return entries
