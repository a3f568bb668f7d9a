"""Binary volume / sinogram files and CSV helpers.

Volume file (little-endian)::

    b"SAWV" | u16 version | u32 nx, ny, nz | f64 dx, dy, dz | f32 payload (x fastest)

Sinogram file (little-endian)::

    b"SAWS" | u16 version | u32 views, rows, cols | f32 payload (col, row, view)

Payloads are float32, so values are quantised on write; a float32 array
round-trips bit for bit.  Masks are stored as volume files.
"""
from __future__ import annotations

import csv
import os
import struct
from pathlib import Path

import numpy as np

from .projector import Sinogram, Volume

__all__ = [
    "BadMagicError",
    "FormatError",
    "TruncatedFileError",
    "VersionMismatchError",
    "read_sinogram",
    "read_volume",
    "write_csv",
    "write_sinogram",
    "write_volume",
]

VERSION = 1
_VOL_HEADER = struct.Struct("<4sH3I3d")
_SINO_HEADER = struct.Struct("<4sH3I")
_F32 = np.dtype("<f4")


class FormatError(ValueError):
    """Malformed volume or sinogram file."""


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


def _read_header(fh, layout: struct.Struct, magic: bytes, path) -> tuple:
    raw = fh.read(layout.size)
    if len(raw) >= 4 and raw[:4] != magic:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {magic!r}")
    if len(raw) < layout.size:
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} of {layout.size} bytes)")
    fields = layout.unpack(raw)
    if fields[1] != VERSION:
        raise VersionMismatchError(f"{path}: format version {fields[1]}, expected {VERSION}")
    return fields[2:]


def _read_payload(fh, count: int, path) -> np.ndarray:
    # size check against the file before allocating
    here = fh.tell()
    fh.seek(0, os.SEEK_END)
    available = fh.tell() - here
    fh.seek(here)
    need = count * _F32.itemsize
    if available < need:
        raise TruncatedFileError(f"{path}: payload has {available // 4} values, header needs {count}")
    if available > need:
        raise FormatError(f"{path}: {available - need} trailing bytes after payload")
    return np.frombuffer(fh.read(need), dtype=_F32)


def write_volume(volume: Volume, path) -> None:
    nz, ny, nx = volume.values.shape
    header = _VOL_HEADER.pack(b"SAWV", VERSION, nx, ny, nz, *volume.voxel_size)
    payload = np.ascontiguousarray(volume.values, dtype=_F32)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_volume(path) -> Volume:
    with open(path, "rb") as fh:
        nx, ny, nz, dx, dy, dz = _read_header(fh, _VOL_HEADER, b"SAWV", path)
        if min(nx, ny, nz) < 1:
            raise FormatError(f"{path}: empty volume dims {(nx, ny, nz)}")
        values = _read_payload(fh, nx * ny * nz, path)
    return Volume(values.astype(np.float32).reshape(nz, ny, nx), (dx, dy, dz))


def write_sinogram(sinogram: Sinogram, path) -> None:
    nv, nr, nc = sinogram.values.shape
    header = _SINO_HEADER.pack(b"SAWS", VERSION, nv, nr, nc)
    payload = np.ascontiguousarray(sinogram.values, dtype=_F32)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_sinogram(path) -> Sinogram:
    with open(path, "rb") as fh:
        nv, nr, nc = _read_header(fh, _SINO_HEADER, b"SAWS", path)
        if nv < 1:
            raise FormatError(f"{path}: sinogram header has zero views")
        if min(nr, nc) < 1:
            raise FormatError(f"{path}: empty detector {(nr, nc)}")
        values = _read_payload(fh, nv * nr * nc, path)
    return Sinogram(values.astype(np.float32).reshape(nv, nr, nc))


def write_csv(path, header, rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
