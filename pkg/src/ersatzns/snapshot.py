"""Binary snapshot files for Fourier fields.

Layout (all little-endian)::

    4 bytes   magic b"TFLD"
    u16       version (1)
    u32 x 3   n, N, m
    f64 x 2   ell, t
    f64 ...   coefficients as interleaved (re, im), component-major; within a
              component the wavevectors run in row-major lattice order, each
              index from -N/2 to N/2 - 1.

Writing then reading a field reproduces the coefficients bit for bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import SnapshotError
from .spectral_core import FourierField, TorusGrid

MAGIC = b"TFLD"
VERSION = 1
_HEADER = struct.Struct("<4sHIIIdd")


def encode(field: FourierField, t: float) -> bytes:
    g = field.grid
    header = _HEADER.pack(MAGIC, VERSION, g.n, g.N, field.m, float(g.ell), float(t))
    lattice = np.fft.fftshift(field.coeffs, axes=g.axes)
    body = np.ascontiguousarray(lattice).astype("<c16").view("<f8").tobytes()
    return header + body


def decode(data: bytes) -> tuple[FourierField, float]:
    if len(data) < _HEADER.size:
        raise SnapshotError("snapshot truncated: header incomplete")
    magic, version, n, N, m, ell, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    grid = TorusGrid(n, ell, N)
    count = m * N**n
    body = data[_HEADER.size :]
    if len(body) != 16 * count:
        raise SnapshotError(f"snapshot body has {len(body)} bytes, expected {16 * count}")
    flat = np.frombuffer(body, dtype="<f8").view("<c16").astype(np.complex128)
    lattice = flat.reshape((m,) + grid.shape)
    return FourierField(grid, np.fft.ifftshift(lattice, axes=grid.axes)), t


def write_snapshot(path: str | Path, field: FourierField, t: float) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode(field, t))
    tmp.replace(path)


def read_snapshot(path: str | Path) -> tuple[FourierField, float]:
    return decode(Path(path).read_bytes())
