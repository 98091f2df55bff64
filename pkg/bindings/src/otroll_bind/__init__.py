"""Array-in/array-out bindings over the otroll transport loss.

Three callables cover what a training loop needs: the loss with its
analytic backward pass, the note-level evaluator, and the harmonic
attention mask.  Everything crosses the boundary as plain contiguous
row-major arrays and floats, so the loss can sit behind a custom-gradient
node in any framework without an autodiff dependency.

Targets are fixed per clip while predictions change every step, so
``BoundLoss`` caches the source assignment keyed by the target-atom set;
a cache hit returns bit-identical results to a cold call.
"""

from __future__ import annotations

import threading
from typing import Dict, Tuple

import numpy as np

from otroll import (
    CostParams,
    Grid,
    MatchParams,
    NoteEvent,
    NoteList,
    TargetDistribution,
    assign_sources,
    harmonic_mask,
    match_notes,
    ot_loss,
)

__all__ = ["BoundLoss", "loss_forward_backward", "evaluate", "harmonic_mask_matrix"]

__version__ = "0.1.0"


def _check_atoms(target_atoms: np.ndarray, n_frames: int, n_pitches: int):
    atoms = np.asarray(target_atoms, dtype=np.float64)
    if atoms.size == 0:
        atoms = atoms.reshape(0, 3)
    if atoms.ndim != 2 or atoms.shape[1] != 3:
        raise ValueError(
            f"target_atoms must have shape (n, 3) = (frame, pitch, mass), got {atoms.shape}"
        )
    frames = atoms[:, 0]
    pitches = atoms[:, 1]
    masses = atoms[:, 2]
    if not np.all(frames == np.round(frames)) or not np.all(pitches == np.round(pitches)):
        raise ValueError("atom frame and pitch columns must hold integers")
    frames = frames.astype(np.int64)
    pitches = pitches.astype(np.int64)
    if frames.size:
        if frames.min() < 0 or frames.max() >= n_frames:
            raise ValueError(
                f"atom frame outside dimension 0: valid range [0, {n_frames - 1}], "
                f"got [{frames.min()}, {frames.max()}]"
            )
        if pitches.min() < 0 or pitches.max() >= n_pitches:
            raise ValueError(
                f"atom pitch outside dimension 1: valid range [0, {n_pitches - 1}], "
                f"got [{pitches.min()}, {pitches.max()}]"
            )
    return frames, pitches, masses


class BoundLoss:
    """Reusable loss for one grid size and cost setting.

    Calling the instance with (M, target_atoms) returns (total, grad);
    the source assignment for each distinct atom set is computed once and
    shared across calls (and threads; the cache is lock-protected).
    """

    def __init__(
        self,
        n_frames: int,
        n_pitches: int,
        tau0: float = 5.0,
        tau1: float = 1000.0,
        lam: float = 1.0,
    ):
        if n_pitches > 128:
            raise ValueError(f"n_pitches must be <= 128, got {n_pitches}")
        self.grid = Grid(n_frames=n_frames, n_pitches=n_pitches, lowest_pitch=0)
        self.params = CostParams(tau0=tau0, tau1=tau1, lam=lam)
        self._cache: Dict[bytes, tuple] = {}
        self._lock = threading.Lock()

    def _assignment(self, frames, pitches, masses):
        key = frames.tobytes() + pitches.tobytes() + masses.tobytes()
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        targets = TargetDistribution(frames, pitches, masses, self.grid.shape)
        assignment = assign_sources(targets, self.grid, self.params)
        with self._lock:
            self._cache.setdefault(key, (targets, assignment))
        return targets, assignment

    def __call__(self, M: np.ndarray, target_atoms: np.ndarray) -> Tuple[float, np.ndarray]:
        M = np.ascontiguousarray(M, dtype=np.float64)
        if M.ndim != 2:
            raise ValueError(f"M must be 2-D, got {M.ndim} dimensions")
        if M.shape != self.grid.shape:
            raise ValueError(
                f"M shape {M.shape} does not match grid "
                f"(dimension 0 wants {self.grid.n_frames}, dimension 1 wants {self.grid.n_pitches})"
            )
        if M.size and M.min() < 0.0:
            bad = np.unravel_index(int(np.argmin(M)), M.shape)
            raise ValueError(f"M must be non-negative; M[{bad[0]}, {bad[1]}] = {M[bad]}")
        frames, pitches, masses = _check_atoms(target_atoms, *self.grid.shape)
        targets, assignment = self._assignment(frames, pitches, masses)
        breakdown = ot_loss(M, targets, self.grid, self.params, assignment)
        return breakdown.total, breakdown.gradient

    @property
    def cache_size(self) -> int:
        with self._lock:
            return len(self._cache)


def loss_forward_backward(
    M: np.ndarray,
    target_atoms: np.ndarray,
    tau0: float = 5.0,
    tau1: float = 1000.0,
    lam: float = 1.0,
) -> Tuple[float, np.ndarray]:
    """One-shot loss + gradient; see BoundLoss for the cached variant."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"M must be 2-D, got {M.ndim} dimensions")
    bound = BoundLoss(M.shape[0], M.shape[1], tau0=tau0, tau1=tau1, lam=lam)
    return bound(M, target_atoms)


def _to_note_list(rows: np.ndarray, name: str) -> NoteList:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.size == 0:
        return NoteList()
    if rows.ndim != 2 or rows.shape[1] != 3:
        raise ValueError(
            f"{name} must have shape (n, 3) = (onset_s, offset_s, pitch), got {rows.shape}"
        )
    notes = []
    for i, (onset, offset, pitch) in enumerate(rows):
        if pitch != round(pitch) or not 0 <= pitch <= 127:
            raise ValueError(f"{name}[{i}] pitch {pitch} is not a MIDI note 0..127")
        if offset <= onset or onset < 0:
            raise ValueError(
                f"{name}[{i}] has invalid times: onset {onset}, offset {offset}"
            )
        notes.append(NoteEvent(float(onset), float(offset), int(pitch)))
    return NoteList(tuple(notes))


def evaluate(
    ref_notes: np.ndarray,
    est_notes: np.ndarray,
    onset_tol_s: float = 0.05,
    offset_min_tol_s: float = 0.05,
    offset_ratio: float = 0.2,
    use_offsets: bool = False,
) -> Tuple[float, float, float, int]:
    """Note-level (precision, recall, f1, n_match) between two (n, 3) arrays."""
    params = MatchParams(
        onset_tol_s=onset_tol_s,
        offset_min_tol_s=offset_min_tol_s,
        offset_ratio=offset_ratio,
        use_offsets=use_offsets,
    )
    report = match_notes(
        _to_note_list(ref_notes, "ref_notes"),
        _to_note_list(est_notes, "est_notes"),
        params,
    )
    return report.precision, report.recall, report.f1, report.n_match


def harmonic_mask_matrix(
    n_bins: int,
    bins_per_octave: int = 48,
    max_harmonic: int = 8,
    tol_cents: float = 25.0,
) -> np.ndarray:
    """The (n_bins, n_bins) float32 attention bias matrix."""
    return harmonic_mask(
        n_bins=n_bins,
        bins_per_octave=bins_per_octave,
        max_harmonic=max_harmonic,
        tol_cents=tol_cents,
    ).bias
