"""Binary grid dumps (``KSH1`` format).

Layout, all little-endian::

    offset  size  field
    0       4     magic b"KSH1"
    4       4     version (u32, currently 1)
    8       4     n1 (u32)
    12      4     n2 (u32)
    16      8     ly1 (f64)
    24      8     ly2 (f64)
    32      8     t (f64)
    40      8*n1*n2  payload (f64), row-major, y2 varying fastest

The payload of ``field[i, j]`` (``i`` along y1, ``j`` along y2) sits at
element ``i * n2 + j``.
"""
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

MAGIC = b"KSH1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIddd")


@dataclass(frozen=True)
class DumpMeta:
    ly1: float
    ly2: float
    t: float = 0.0


def write_grid_dump(field, meta, path):
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ValueError("grid dumps hold 2-D fields")
    if not np.all(np.isfinite(field)):
        raise ValueError("refusing to dump a non-finite field")
    n1, n2 = field.shape
    header = _HEADER.pack(MAGIC, VERSION, n1, n2, meta.ly1, meta.ly2, meta.t)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field, dtype="<f8").tobytes())


def read_grid_dump(path):
    """Return ``(field, meta)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n1, n2, ly1, ly2, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * n1 * n2
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    field = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n1, n2)
    return field.astype(np.float64), DumpMeta(ly1, ly2, t)
