"""On-disk prediction matrices: "OTPR1" header line plus float32 payload.

Layout: one ASCII header line ``OTPR1 <n_frames> <n_pitches>\\n`` followed
by row-major little-endian 32-bit floats, frames outer, pitches inner.
Write-then-read is bit-identical.
"""

from __future__ import annotations

import os
from typing import Union

import numpy as np

__all__ = ["MAGIC", "write_matrix", "read_matrix"]

MAGIC = b"OTPR1"

PathLike = Union[str, os.PathLike]


def write_matrix(path: PathLike, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {values.shape}")
    n_frames, n_pitches = values.shape
    header = f"OTPR1 {n_frames} {n_pitches}\n".encode("ascii")
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_matrix(path: PathLike) -> np.ndarray:
    """Read a matrix file; returns float64 values (exact copies of the f4 payload)."""
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    parts = header.split()
    if len(parts) != 3 or parts[0] != MAGIC:
        raise ValueError(f"{path}: bad matrix header {header!r}")
    try:
        n_frames, n_pitches = int(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"{path}: non-numeric dimensions in header {header!r}") from None
    if n_frames < 1 or n_pitches < 1:
        raise ValueError(f"{path}: dimensions must be positive, got {n_frames}x{n_pitches}")
    expected = 4 * n_frames * n_pitches
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"for a {n_frames}x{n_pitches} matrix"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n_frames, n_pitches)
    return data.astype(np.float64)
