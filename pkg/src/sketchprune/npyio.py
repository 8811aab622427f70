"""Minimal NPY v1.0 reader/writer.

Only the subset used by the archive format is supported: little-endian
float32 ('<f4'), C-order data, version 1.0 headers padded with spaces so
the total header (magic through trailing newline) is a multiple of 64
bytes. Writing is byte-deterministic: the same array always produces the
same file contents.
"""

from __future__ import annotations

import ast
import struct

import numpy as np

from .errors import MalformedNpyError, MissingFileError, NonFiniteError

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
HEADER_ALIGN = 64


def write_npy(path, array: np.ndarray) -> None:
    """Write a float32 array as a deterministic NPY v1.0 file."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"refusing to save non-finite values to {path}")
    shape = arr.shape
    shape_repr = "(%s)" % (", ".join(str(int(s)) for s in shape) + ("," if len(shape) == 1 else ""))
    if len(shape) == 0:
        shape_repr = "()"
    header = "{'descr': '<f4', 'fortran_order': False, 'shape': %s, }" % shape_repr
    # magic(6) + version(2) + hlen(2) + header + '\n' must be 64-aligned
    base = len(MAGIC) + len(VERSION) + 2
    pad = -(base + len(header) + 1) % HEADER_ALIGN
    header_bytes = (header + " " * pad + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(VERSION)
        fh.write(struct.pack("<H", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(arr.tobytes(order="C"))


def read_npy(path) -> np.ndarray:
    """Read a float32 NPY v1.0 file written by :func:`write_npy` (or numpy)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError as exc:
        raise MissingFileError(f"missing tensor file: {path}") from exc

    if len(raw) < 10 or raw[:6] != MAGIC:
        raise MalformedNpyError(f"{path}: bad magic bytes")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise MalformedNpyError(f"{path}: unsupported NPY version {major}.{minor}")
    (hlen,) = struct.unpack("<H", raw[8:10])
    header_end = 10 + hlen
    if len(raw) < header_end:
        raise MalformedNpyError(f"{path}: truncated header")
    header = raw[10:header_end]
    if not header.endswith(b"\n"):
        raise MalformedNpyError(f"{path}: header missing trailing newline")
    try:
        meta = ast.literal_eval(header.decode("ascii").strip())
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise MalformedNpyError(f"{path}: unparseable header dict") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise MalformedNpyError(f"{path}: header keys {sorted(meta) if isinstance(meta, dict) else meta}")
    if meta["descr"] != "<f4":
        raise MalformedNpyError(f"{path}: unsupported dtype {meta['descr']!r} (need '<f4')")
    if meta["fortran_order"]:
        raise MalformedNpyError(f"{path}: fortran_order not supported")
    shape = tuple(int(s) for s in meta["shape"])
    count = int(np.prod(shape)) if shape else 1
    body = raw[header_end:]
    if len(body) != count * 4:
        raise MalformedNpyError(
            f"{path}: payload holds {len(body) // 4} float32 values, header declares {count}"
        )
    return np.frombuffer(body, dtype="<f4").reshape(shape).copy()
