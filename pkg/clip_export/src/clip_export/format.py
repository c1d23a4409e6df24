"""Writer for the CROFEMB1 embedding-file format.

Layout (little endian): 8-byte magic ``CROFEMB1``, u32 row count, u32
dimension count, one flags byte (bit 0 = rows are L2-normalized), then
``rows * dims`` float32 values in row-major order.

This module deliberately re-implements the format from its byte layout:
the export bridge talks to the classification engine only through files,
never through its Python API.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

_MAGIC = b"CROFEMB1"
_HEADER = struct.Struct("<8sIIB")
_FLAG_NORMALIZED = 0x01


class ExportError(RuntimeError):
    """Raised when an embedding batch cannot be written as CROFEMB1."""


def write_crofemb(data: np.ndarray, out: Path | str, *, normalize: bool = True) -> Path:
    """Write ``data`` (rows x dims) to ``out`` as a CROFEMB1 file.

    Rows are L2-normalized before writing when ``normalize`` is true (the
    normalized flag bit is then set).  The write is atomic: the payload goes
    to a temporary file in the destination directory which is renamed into
    place, so readers never observe a partial file.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ExportError(f"expected a rows x dims matrix with dims >= 2, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ExportError("embedding batch contains non-finite values")

    flags = 0
    if normalize:
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if (norms < 1e-12).any():
            raise ExportError("cannot normalize a zero-norm embedding row")
        arr = arr / norms
        flags |= _FLAG_NORMALIZED

    payload = np.ascontiguousarray(arr, dtype="<f4")
    rows, dims = payload.shape

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=out.parent, suffix=".emb.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, rows, dims, flags))
            fh.write(payload.tobytes())
        os.replace(tmp_name, out)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise
    return out
