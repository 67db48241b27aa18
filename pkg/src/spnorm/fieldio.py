"""SPSF field files.

Layout (little-endian throughout):

    magic   4 bytes  b"SPSF"
    version u32      currently 1
    kind    u8       0 = radial, 1 = box
    dims    u64 x 1 (radial: interior node count) or u64 x 3 (box)
    spacing f64      grid spacing h
    scale   f64      scale_factor metadata
    values  f64 x N  node values, row-major for boxes
"""

from __future__ import annotations

import struct

import numpy as np

from .mesh import BoxGrid, Field, RadialGrid

MAGIC = b"SPSF"
VERSION = 1


class FieldFormatError(ValueError):
    """Raised on malformed SPSF input."""


def save_field(path, f: Field) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        if f.is_radial:
            fh.write(struct.pack("<B", 0))
            fh.write(struct.pack("<Q", f.values.size))
            fh.write(struct.pack("<d", f.grid.h))
        else:
            fh.write(struct.pack("<B", 1))
            fh.write(struct.pack("<QQQ", *f.values.shape))
            fh.write(struct.pack("<d", f.grid.spacing))
        fh.write(struct.pack("<d", f.scale_factor))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise FieldFormatError("not an SPSF file (bad magic)")
    try:
        return _parse(raw)
    except struct.error as exc:
        raise FieldFormatError(f"truncated SPSF header: {exc}") from exc


def _parse(raw: bytes) -> Field:
    off = 4
    (version,) = struct.unpack_from("<I", raw, off)
    off += 4
    if version != VERSION:
        raise FieldFormatError(f"unsupported SPSF version {version}")
    (kind,) = struct.unpack_from("<B", raw, off)
    off += 1
    if kind == 0:
        (npts,) = struct.unpack_from("<Q", raw, off)
        off += 8
        spacing, scale = struct.unpack_from("<dd", raw, off)
        off += 16
        if len(raw) < off + 8 * npts:
            raise FieldFormatError("truncated SPSF payload")
        values = np.frombuffer(raw, dtype="<f8", count=npts, offset=off)
        grid = RadialGrid(spacing * (npts + 1), npts + 1)
        return Field(grid, values.astype(np.float64), scale)
    if kind == 1:
        dims = struct.unpack_from("<QQQ", raw, off)
        off += 24
        spacing, scale = struct.unpack_from("<dd", raw, off)
        off += 16
        count = dims[0] * dims[1] * dims[2]
        if len(raw) < off + 8 * count:
            raise FieldFormatError("truncated SPSF payload")
        values = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
        if not (dims[0] == dims[1] == dims[2]):
            raise FieldFormatError(f"box dims must be cubic, got {dims}")
        grid = BoxGrid(spacing * dims[0] / 2.0, dims[0])
        return Field(grid, values.reshape(dims).astype(np.float64), scale)
    raise FieldFormatError(f"unknown grid kind {kind}")
