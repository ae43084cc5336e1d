"""VVL1: a fixed-header little-endian voxel file format.

Layout::

    0   4s   magic "VVL1"
    4   u8   dtype code (1 float32 intensity, 2 uint16 labels, 3 uint8 mask)
    5   3xu32 dims (nx, ny, nz)
    17  3xf32 spacing in mm
    29  11   zero padding
    40       payload, x fastest
    ...      (labels only) u32 record count, then per record:
             u16 label, u32 byte length, UTF-8 name

Spacing is stored as float32, so it only round-trips exactly when it is
representable in float32.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from brainrg.errors import BrainRGError
from brainrg.volume import AtlasLabelMap, BinaryMask, Volume

MAGIC = b"VVL1"
HEADER = struct.Struct("<4sB3I3f11x")
HEADER_SIZE = HEADER.size
assert HEADER_SIZE == 40

DTYPE_FLOAT32 = 1
DTYPE_LABELS = 2
DTYPE_MASK = 3

_PAYLOAD_DTYPES = {DTYPE_FLOAT32: np.dtype("<f4"), DTYPE_LABELS: np.dtype("<u2"), DTYPE_MASK: np.dtype("u1")}

GridObject = Union[Volume, AtlasLabelMap, BinaryMask]


class VioError(BrainRGError, IOError):
    pass


class BadMagic(VioError):
    pass


class BadDtype(VioError):
    pass


class BadHeader(VioError):
    pass


class TruncatedPayload(VioError):
    pass


class NonFiniteData(VioError):
    pass


class CorruptPayload(VioError):
    """Payload is well-sized but holds values the kind does not allow."""


def encode(obj: GridObject) -> bytes:
    if isinstance(obj, Volume):
        code, arr = DTYPE_FLOAT32, obj.data
    elif isinstance(obj, AtlasLabelMap):
        code, arr = DTYPE_LABELS, obj.labels
    elif isinstance(obj, BinaryMask):
        code, arr = DTYPE_MASK, obj.bits
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    header = HEADER.pack(MAGIC, code, *arr.shape, *obj.spacing)
    payload = np.asarray(arr, dtype=_PAYLOAD_DTYPES[code]).tobytes(order="F")
    parts = [header, payload]
    if code == DTYPE_LABELS:
        names = sorted(obj.label_names.items())
        parts.append(struct.pack("<I", len(names)))
        for label, name in names:
            raw = name.encode("utf-8")
            parts.append(struct.pack("<HI", label, len(raw)))
            parts.append(raw)
    return b"".join(parts)


def decode(buf: bytes) -> GridObject:
    if buf[:4] != MAGIC:
        raise BadMagic(f"bad magic {bytes(buf[:4])!r}")
    if len(buf) < HEADER_SIZE:
        raise TruncatedPayload(f"header needs {HEADER_SIZE} bytes, file has {len(buf)}")
    _, code, nx, ny, nz, sx, sy, sz = HEADER.unpack_from(buf)
    if code not in _PAYLOAD_DTYPES:
        raise BadDtype(f"unknown dtype code {code}")
    if buf[29:HEADER_SIZE].strip(b"\x00"):
        raise BadHeader("reserved header bytes must be zero")
    dims = (nx, ny, nz)
    spacing = (sx, sy, sz)
    if min(dims) < 1:
        raise BadHeader(f"dims must be >= 1, got {dims}")
    if not all(np.isfinite(s) and s > 0 for s in spacing):
        raise BadHeader(f"spacing must be positive, got {spacing}")
    dtype = _PAYLOAD_DTYPES[code]
    nbytes = nx * ny * nz * dtype.itemsize
    end = HEADER_SIZE + nbytes
    if len(buf) < end:
        raise TruncatedPayload(f"payload needs {nbytes} bytes, file has {len(buf) - HEADER_SIZE}")
    flat = np.frombuffer(buf, dtype=dtype, count=nx * ny * nz, offset=HEADER_SIZE)
    arr = flat.reshape(dims, order="F")

    if code == DTYPE_FLOAT32:
        _no_trailing(buf, end)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteData("float payload contains NaN or Inf")
        return Volume(arr, spacing)
    if code == DTYPE_MASK:
        _no_trailing(buf, end)
        if arr.max() > 1:
            raise CorruptPayload("mask bytes must be 0 or 1")
        return BinaryMask(arr.astype(bool), spacing)

    names, pos = {}, end
    (count,) = _unpack("<I", buf, pos)
    pos += 4
    for _ in range(count):
        label, length = _unpack("<HI", buf, pos)
        pos += 6
        if len(buf) < pos + length:
            raise TruncatedPayload("label-name table is truncated")
        try:
            names[label] = buf[pos : pos + length].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptPayload(f"label name is not UTF-8: {exc}") from exc
        pos += length
    _no_trailing(buf, pos)
    try:
        return AtlasLabelMap(arr, names, spacing)
    except ValueError as exc:
        raise CorruptPayload(str(exc)) from exc


def _unpack(fmt: str, buf: bytes, pos: int):
    size = struct.calcsize(fmt)
    if len(buf) < pos + size:
        raise TruncatedPayload("label-name table is truncated")
    return struct.unpack_from(fmt, buf, pos)


def _no_trailing(buf: bytes, end: int) -> None:
    if len(buf) != end:
        raise CorruptPayload(f"{len(buf) - end} unexpected trailing bytes")


def write(path, obj: GridObject) -> None:
    Path(path).write_bytes(encode(obj))


def read(path) -> GridObject:
    return decode(Path(path).read_bytes())


def read_kind(path, kind: type):
    obj = read(path)
    if not isinstance(obj, kind):
        raise BadDtype(f"{path}: expected {kind.__name__}, found {type(obj).__name__}")
    return obj
