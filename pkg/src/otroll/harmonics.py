"""Harmonics-aware attention bias matrix over log-frequency bins.

Bins i and j of a constant-Q axis are harmonically related when their
frequency ratio sits within a cent tolerance of some integer multiple k (or
1/k) up to a maximum harmonic.  Related pairs get bias 0; unrelated pairs
get a large negative sentinel that kills the attention weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["HarmonicMask", "harmonic_mask", "NEG_INF_SENTINEL"]

# "minus infinity" as the most negative finite float32
NEG_INF_SENTINEL = float(np.finfo(np.float32).min)


@dataclass(frozen=True)
class HarmonicMask:
    bias: np.ndarray
    bins_per_octave: int
    max_harmonic: int
    tol_cents: float

    def __post_init__(self):
        self.bias.setflags(write=False)

    @property
    def n_bins(self) -> int:
        return self.bias.shape[0]

    def zero_offsets(self) -> np.ndarray:
        """Sorted |i - j| offsets whose entries are 0 (harmonically related)."""
        return np.flatnonzero(self.bias[0] == 0.0)


def harmonic_mask(
    n_bins: int,
    bins_per_octave: int = 48,
    max_harmonic: int = 8,
    tol_cents: float = 25.0,
) -> HarmonicMask:
    """Precompute the attention bias matrix for harmonically related bins.

    The bin offset of harmonic k is bins_per_octave * log2(k); an offset
    |i - j| is related when its distance to some harmonic offset, converted
    to cents, is within tol_cents.  Subharmonics (ratio 1/k) are covered by
    symmetry of |i - j|.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if bins_per_octave < 1:
        raise ValueError(f"bins_per_octave must be >= 1, got {bins_per_octave}")
    if max_harmonic < 1:
        raise ValueError(f"max_harmonic must be >= 1, got {max_harmonic}")
    if tol_cents < 0:
        raise ValueError(f"tol_cents must be >= 0, got {tol_cents}")
    cents_per_bin = 1200.0 / bins_per_octave
    offsets = np.arange(n_bins, dtype=np.float64)
    harmonic_bins = bins_per_octave * np.log2(np.arange(1, max_harmonic + 1, dtype=np.float64))
    cent_err = np.min(np.abs(offsets[:, None] - harmonic_bins[None, :]), axis=1) * cents_per_bin
    row = np.where(cent_err <= tol_cents, 0.0, NEG_INF_SENTINEL).astype(np.float32)
    idx = np.abs(np.arange(n_bins)[:, None] - np.arange(n_bins)[None, :])
    bias = row[idx]
    return HarmonicMask(
        bias=bias,
        bins_per_octave=bins_per_octave,
        max_harmonic=max_harmonic,
        tol_cents=tol_cents,
    )
