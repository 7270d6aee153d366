"""Binary checkpoint of named float64 tensors.

Layout (little-endian)::

    magic   b"NGCK"
    u32     format version
    u32     tensor count
    per tensor:
        u32 name length, utf-8 name
        u32 ndim, u64 * ndim shape
        f64 * prod(shape) row-major data

No timestamps or other run-dependent bytes, so equal tensors give equal files.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import SchemaError

MAGIC = b"NGCK"
VERSION = 1


def dumps(tensors: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(getattr(arr, "data", arr), dtype="<f8", order="C")  # keeps 0-d shape
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise SchemaError("not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise SchemaError(f"unsupported checkpoint version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, off)
            off += 4
            name = blob[off:off + n].decode("utf-8")
            off += n
            (nd,) = struct.unpack_from("<I", blob, off)
            off += 4
            shape = struct.unpack_from(f"<{nd}Q", blob, off)
            off += 8 * nd
            size = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(blob, dtype="<f8", count=size, offset=off)
            off += 8 * size
            out[name] = data.reshape(shape).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise SchemaError(f"truncated checkpoint: {exc}") from None
    if off != len(blob):
        raise SchemaError("trailing bytes after checkpoint payload")
    return out


def save(path, tensors: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(tensors))


def load(path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
