"""Binary field dumps and CSV slices.

Binary layout (little endian)::

    offset  size  content
    0       4     magic b"GSFD"
    4       4     u32 format version (1)
    8       4     u32 dimension n
    12      4     u32 points per axis N
    16      8     f64 box length L
    24      4     u32 kind: 0 = spatial samples, 1 = centered spectral coefficients
    28      4     u32 reserved (0)
    32      ...   N^n complex entries as interleaved f64 (re, im), row-major
"""

import csv
import struct

import numpy as np

from .grid import Field, Grid, SpectralField

MAGIC = b"GSFD"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdII")


def dump_field(path, f):
    kind = 1 if isinstance(f, SpectralField) else 0
    data = f.coeffs if kind else f.values
    g = f.grid
    header = _HEADER.pack(MAGIC, VERSION, g.dim, g.points, g.length, kind, 0)
    body = np.ascontiguousarray(data, dtype="<c16").view("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_field(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, N, L, kind, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    g = Grid(n, N, L)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * g.size:
        raise ValueError(f"{path}: expected {2 * g.size} floats, found {body.size}")
    data = body.view("<c16").reshape(g.shape)
    return SpectralField(g, data) if kind == 1 else Field(g, data)


def center_slice(a, grid):
    """1D slice along the first axis through the origin of the other axes."""
    idx = (slice(None),) + grid.origin_index[1:]
    return np.asarray(a)[idx]


def write_slice_csv(path, f):
    """Columns x, re, im, abs along the first axis through the origin."""
    vals = center_slice(f.values, f.grid)
    write_columns(
        path,
        ["x", "re", "im", "abs"],
        [f.grid.x_axis, vals.real, vals.imag, np.abs(vals)],
    )


def write_columns(path, names, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*columns):
            w.writerow([repr(float(v)) if not isinstance(v, str) else v for v in row])
