"""FT3D: a minimal binary container for one third-order float64 tensor.

Layout (little-endian)::

    b"FT3D" | u32 version (=1) | u64 I1 | u64 I2 | u64 I3 | I1*I2*I3 float64

Data are row-major with the mode-3 index fastest. Masks use the same format
with values exactly 0.0 / 1.0.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FT3D"
VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")


class FT3DError(ValueError):
    pass


def write_ft3d(path, t: np.ndarray) -> None:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise FT3DError(f"FT3D stores third-order tensors, got ndim={t.ndim}")
    with open(Path(path), "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, *t.shape))
        f.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def read_ft3d(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FT3DError(f"{path}: file too short for an FT3D header")
    magic, version, i1, i2, i3 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FT3DError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FT3DError(f"{path}: unsupported FT3D version {version}")
    n = i1 * i2 * i3
    body = raw[_HEADER.size:]
    if len(body) != 8 * n:
        raise FT3DError(f"{path}: expected {8 * n} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(i1, i2, i3)
