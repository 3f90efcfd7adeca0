"""CLGF binary field snapshots.

Layout: a 64-byte little-endian header followed by float64 samples, component
slowest and x fastest (a C-ordered ``(ncomp, nz, ny, nx)`` array).

=======  =====  ==========================================
offset   type   meaning
=======  =====  ==========================================
0        4s     magic ``b"CLGF"``
4        u32    format version (1)
8        u8     geometry (0 periodic3d, 1 channel)
9        3*u32  dims ``nx, ny, nz``
21       3*f64  lengths ``Lx, Ly, Lz``
45       u8     number of components (1 or 3)
46       18x    zero padding
=======  =====  ==========================================
"""

from __future__ import annotations

import os
import struct
from typing import Union

import numpy as np

from .fields import Geometry, LabelGrid, ScalarField, VectorField

__all__ = ["MAGIC", "VERSION", "HEADER_SIZE", "write_snapshot", "read_snapshot", "encode", "decode"]

MAGIC = b"CLGF"
VERSION = 1
HEADER_SIZE = 64
_HEADER = struct.Struct("<4sIB3I3dB18x")
assert _HEADER.size == HEADER_SIZE

_GEOM_CODE = {Geometry.PERIODIC3D: 0, Geometry.CHANNEL: 1}
_CODE_GEOM = {v: k for k, v in _GEOM_CODE.items()}


def encode(field: Union[ScalarField, VectorField]) -> bytes:
    grid = field.grid
    data = field.data if isinstance(field, VectorField) else field.data[None]
    header = _HEADER.pack(MAGIC, VERSION, _GEOM_CODE[grid.geometry], *grid.dims, *grid.lengths, data.shape[0])
    body = np.ascontiguousarray(np.transpose(data, (0, 3, 2, 1)), dtype="<f8").tobytes()
    return header + body


def decode(buf: bytes) -> Union[ScalarField, VectorField]:
    if len(buf) < HEADER_SIZE:
        raise ValueError("truncated CLGF header")
    magic, version, geom, nx, ny, nz, lx, ly, lz, ncomp = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported CLGF version {version}")
    if geom not in _CODE_GEOM or ncomp not in (1, 3):
        raise ValueError("corrupt CLGF header")
    count = ncomp * nx * ny * nz
    if len(buf) != HEADER_SIZE + 8 * count:
        raise ValueError("CLGF payload size does not match header")
    arr = np.frombuffer(buf, dtype="<f8", offset=HEADER_SIZE, count=count).reshape(ncomp, nz, ny, nx)
    data = np.transpose(arr, (0, 3, 2, 1)).astype(float)
    grid = LabelGrid(_CODE_GEOM[geom], (nx, ny, nz), (lx, ly, lz))
    return ScalarField(grid, data[0]) if ncomp == 1 else VectorField(grid, data)


def write_snapshot(path: Union[str, os.PathLike], field: Union[ScalarField, VectorField]) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(field))


def read_snapshot(path: Union[str, os.PathLike]) -> Union[ScalarField, VectorField]:
    with open(path, "rb") as fh:
        return decode(fh.read())
