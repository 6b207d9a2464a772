"""Binary serialization of square kernel matrices.

Layout (little endian throughout):

    bytes 0..7    magic ``b"GNTKMAT1"``
    bytes 8..15   u64 n (matrix side)
    then          n*n float64, row major

No alignment padding, no checksum — the format is meant for scratch
exchange between CLI steps, not archival.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError, ValidationError

MAGIC = b"GNTKMAT1"


def write_kernel_matrix(path: str | Path, k: np.ndarray) -> None:
    k = np.ascontiguousarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValidationError("kernel matrix must be square")
    if not np.all(np.isfinite(k)):
        raise ValidationError("kernel matrix contains non-finite entries")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", k.shape[0]))
        fh.write(k.astype("<f8").tobytes(order="C"))


def read_kernel_matrix(path: str | Path) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise IoError(f"kernel file not found: {p}")
    blob = p.read_bytes()
    if len(blob) < 16:
        raise FormatError(f"{p}: too short to hold a header")
    if blob[:8] != MAGIC:
        raise FormatError(f"{p}: bad magic {blob[:8]!r}")
    (n,) = struct.unpack("<Q", blob[8:16])
    expected = 16 + 8 * n * n
    if len(blob) != expected:
        raise FormatError(
            f"{p}: payload holds {len(blob) - 16} bytes, expected {8 * n * n} for n={n}"
        )
    return np.frombuffer(blob[16:], dtype="<f8").reshape(n, n).copy()
