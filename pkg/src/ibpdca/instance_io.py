"""On-disk instance container and CSV ingestion.

Container layout::

    <one line of JSON header>\\n
    A   (m*n float64, little endian, column-major)
    b   (m float64)
    x_orig (n float64, only when the header says has_x_orig)
    CRC32 of every preceding byte (uint32, little endian)
"""

from __future__ import annotations

import csv
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .datagen import ProblemInstance

__all__ = ["save_instance", "load_instance", "load_csv_matrix",
           "InstanceFormatError", "MAGIC", "VERSION"]

MAGIC = "BDC1"
VERSION = 1
_F64 = np.dtype("<f8")


class InstanceFormatError(ValueError):
    pass


def _encode(inst):
    header = {
        "magic": MAGIC, "version": VERSION,
        "m": inst.m, "n": inst.n, "s": int(inst.s), "seed": int(inst.seed),
        "layout": "column-major", "dtype": "f64-le",
        "has_x_orig": inst.x_orig is not None,
    }
    parts = [json.dumps(header, sort_keys=True).encode() + b"\n",
             inst.A.astype(_F64).tobytes(order="F"),
             inst.b.astype(_F64).tobytes()]
    if inst.x_orig is not None:
        parts.append(inst.x_orig.astype(_F64).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_instance(inst, path):
    Path(path).write_bytes(_encode(inst))


def load_instance(path):
    """Read an instance file.

    Raises InstanceFormatError for a bad header, a version other than 1,
    a checksum mismatch or a truncated payload.
    """
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise InstanceFormatError("missing header line")
    try:
        header = json.loads(raw[:nl])
    except ValueError as exc:
        raise InstanceFormatError(f"unreadable header: {exc}") from exc
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise InstanceFormatError("not an instance file (bad magic)")
    if header.get("version") != VERSION:
        raise InstanceFormatError(
            f"unsupported format version {header.get('version')!r}")
    if header.get("layout") != "column-major" or header.get("dtype") != "f64-le":
        raise InstanceFormatError("unsupported layout or dtype")
    if len(raw) < nl + 1 + 4:
        raise InstanceFormatError("checksum failure: file truncated")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise InstanceFormatError("checksum failure")
    m, n = int(header["m"]), int(header["n"])
    has_x = bool(header.get("has_x_orig"))
    payload = body[nl + 1:]
    expected = 8 * (m * n + m + (n if has_x else 0))
    if len(payload) != expected:
        raise InstanceFormatError(
            f"payload has {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype=_F64).astype(np.float64)
    A = data[:m * n].reshape((m, n), order="F").copy()
    b = data[m * n:m * n + m].copy()
    x_orig = data[m * n + m:].copy() if has_x else None
    return ProblemInstance(A=A, b=b, x_orig=x_orig, s=int(header.get("s", 0)),
                           seed=int(header.get("seed", 0)))


def _read_numeric_csv(path):
    rows = []
    width = None
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise InstanceFormatError(
                    f"{path}: row {r} has {len(row)} fields, expected {width}")
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise InstanceFormatError(
                        f"{path}: row {r}, column {c}: not a number: {cell!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise InstanceFormatError(f"{path}: no data")
    return np.array(rows, dtype=np.float64)


def load_csv_matrix(path_A, path_b):
    """Load ``A`` (one row per line) and ``b`` (one value per line or one row)."""
    A = _read_numeric_csv(path_A)
    b = _read_numeric_csv(path_b).ravel()
    if b.size != A.shape[0]:
        raise InstanceFormatError(
            f"b has {b.size} entries but A has {A.shape[0]} rows")
    return ProblemInstance(A=A, b=b)
