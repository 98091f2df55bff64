"""Time-pitch lattice, note events, and Dirac target quantization.

All distributions in this package live on a discrete grid of ``n_frames``
time frames by ``n_pitches`` semitone pitches.  Ground-truth notes are
quantized onto that grid as sparse point masses (one atom per occupied
cell); model predictions are dense ``(n_frames, n_pitches)`` float arrays
with entries in [0, 1], handled as plain numpy arrays throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

__all__ = [
    "Grid",
    "NoteEvent",
    "NoteList",
    "TargetDistribution",
    "quantize_events",
    "synth_notes",
    "target_indicator",
]


@dataclass(frozen=True)
class Grid:
    """Discrete time-pitch lattice.

    Cell (t, f) covers frame index t in [0, n_frames) and pitch index f in
    [0, n_pitches); pitch index f maps to MIDI note ``lowest_pitch + f``.
    The default frame period of 25 ms corresponds to a hop of 1200 samples
    at 48 kHz; the default 88-pitch range covers the piano keys A0..C8
    (MIDI 21..108).
    """

    n_frames: int
    frame_period_s: float = 0.025
    n_pitches: int = 88
    lowest_pitch: int = 21

    def __post_init__(self):
        if self.frame_period_s <= 0:
            raise ValueError(f"frame_period_s must be positive, got {self.frame_period_s}")
        if self.n_frames < 1:
            raise ValueError(f"n_frames must be >= 1, got {self.n_frames}")
        if self.n_pitches < 1:
            raise ValueError(f"n_pitches must be >= 1, got {self.n_pitches}")
        if not 0 <= self.lowest_pitch <= 127:
            raise ValueError(f"lowest_pitch must be a MIDI note 0..127, got {self.lowest_pitch}")
        if self.lowest_pitch + self.n_pitches - 1 > 127:
            raise ValueError(
                f"pitch range [{self.lowest_pitch}, {self.lowest_pitch + self.n_pitches - 1}] "
                f"exceeds MIDI note 127"
            )

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_frames, self.n_pitches)

    @property
    def highest_pitch(self) -> int:
        return self.lowest_pitch + self.n_pitches - 1

    def time_to_frame(self, time_s: float) -> Tuple[int, bool]:
        """Map a time to its nearest frame, half-frame ties rounding up.

        Returns (frame, clamped) where clamped is True when the time fell
        past the grid end and was clamped to the last frame.
        """
        frame = math.floor(time_s / self.frame_period_s + 0.5)
        if frame < 0:
            return 0, True
        if frame > self.n_frames - 1:
            return self.n_frames - 1, True
        return frame, False

    def frame_to_time(self, frame: int) -> float:
        return frame * self.frame_period_s

    def pitch_index(self, midi_pitch: int) -> int:
        if not self.lowest_pitch <= midi_pitch <= self.highest_pitch:
            raise ValueError(
                f"pitch {midi_pitch} outside grid range "
                f"[{self.lowest_pitch}, {self.highest_pitch}]"
            )
        return midi_pitch - self.lowest_pitch


@dataclass(frozen=True)
class NoteEvent:
    """A single note: onset/offset in seconds plus MIDI pitch."""

    onset_s: float
    offset_s: float
    pitch: int
    velocity: Optional[int] = None

    def __post_init__(self):
        if self.onset_s < 0:
            raise ValueError(f"onset_s must be >= 0, got {self.onset_s}")
        if self.offset_s <= self.onset_s:
            raise ValueError(
                f"offset_s ({self.offset_s}) must be strictly after onset_s ({self.onset_s})"
            )
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch must be a MIDI note 0..127, got {self.pitch}")
        if self.velocity is not None and not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity must be 1..127, got {self.velocity}")

    @property
    def duration_s(self) -> float:
        return self.offset_s - self.onset_s


@dataclass(frozen=True)
class NoteList:
    """Immutable sequence of notes kept sorted by (onset, pitch), ties stable."""

    notes: Tuple[NoteEvent, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.notes, key=lambda n: (n.onset_s, n.pitch)))
        object.__setattr__(self, "notes", ordered)

    def __len__(self) -> int:
        return len(self.notes)

    def __iter__(self) -> Iterator[NoteEvent]:
        return iter(self.notes)

    def __getitem__(self, idx):
        return self.notes[idx]

    def to_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (onsets, offsets, pitches) as numpy arrays."""
        onsets = np.array([n.onset_s for n in self.notes], dtype=np.float64)
        offsets = np.array([n.offset_s for n in self.notes], dtype=np.float64)
        pitches = np.array([n.pitch for n in self.notes], dtype=np.int64)
        return onsets, offsets, pitches


@dataclass(frozen=True)
class TargetDistribution:
    """Sparse point masses on the grid: at most one atom per cell, mass > 0.

    Atoms are stored sorted by (frame, pitch).  ``n_clamped`` counts events
    whose time fell past the grid end and was clamped to the last frame.
    """

    frames: np.ndarray
    pitches: np.ndarray
    masses: np.ndarray
    grid_shape: Tuple[int, int]
    n_clamped: int = 0

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.int64)
        pitches = np.ascontiguousarray(self.pitches, dtype=np.int64)
        masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        if not (frames.shape == pitches.shape == masses.shape) or frames.ndim != 1:
            raise ValueError("frames, pitches, masses must be 1-D arrays of equal length")
        n_frames, n_pitches = self.grid_shape
        if frames.size:
            if frames.min() < 0 or frames.max() >= n_frames:
                raise ValueError("atom frame index outside grid")
            if pitches.min() < 0 or pitches.max() >= n_pitches:
                raise ValueError("atom pitch index outside grid")
            if np.any(masses <= 0):
                raise ValueError("atom masses must be strictly positive")
            order = np.lexsort((pitches, frames))
            frames, pitches, masses = frames[order], pitches[order], masses[order]
            cells = frames * n_pitches + pitches
            if np.any(np.diff(cells) == 0):
                raise ValueError("duplicate atoms on the same grid cell")
        for arr in (frames, pitches, masses):
            arr.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "pitches", pitches)
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return int(self.frames.size)

    def atoms(self) -> Iterator[Tuple[int, int, float]]:
        for f, p, m in zip(self.frames, self.pitches, self.masses):
            yield int(f), int(p), float(m)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


def quantize_events(
    notes: NoteList,
    grid: Grid,
    which: str,
    w: float = 1.0,
) -> TargetDistribution:
    """Quantize note onsets or offsets into a Dirac target distribution.

    Each note contributes mass ``w`` at (nearest frame, pitch index); notes
    landing on the same cell are merged into a single atom of mass ``w``
    (clamped, not summed, since sigmoid-bounded predictions cannot exceed 1).
    Times past the grid end are clamped to the last frame and counted in the
    result's ``n_clamped``.
    """
    if which not in ("onset", "offset"):
        raise ValueError(f"which must be 'onset' or 'offset', got {which!r}")
    if w <= 0:
        raise ValueError(f"w must be positive, got {w}")
    cells = set()
    n_clamped = 0
    for note in notes:
        if not grid.lowest_pitch <= note.pitch <= grid.highest_pitch:
            raise ValueError(
                f"note (onset {note.onset_s} s, pitch {note.pitch}) outside grid "
                f"pitch range [{grid.lowest_pitch}, {grid.highest_pitch}]"
            )
        pitch_idx = note.pitch - grid.lowest_pitch
        time_s = note.onset_s if which == "onset" else note.offset_s
        frame, clamped = grid.time_to_frame(time_s)
        n_clamped += clamped
        cells.add((frame, pitch_idx))
    ordered = sorted(cells)
    frames = np.array([c[0] for c in ordered], dtype=np.int64)
    pitches = np.array([c[1] for c in ordered], dtype=np.int64)
    masses = np.full(len(ordered), w, dtype=np.float64)
    return TargetDistribution(frames, pitches, masses, grid.shape, n_clamped=n_clamped)


def target_indicator(targets: TargetDistribution, grid: Grid) -> np.ndarray:
    """Dense (n_frames, n_pitches) matrix holding each atom's mass at its cell."""
    if targets.grid_shape != grid.shape:
        raise ValueError(f"target grid {targets.grid_shape} != grid {grid.shape}")
    out = np.zeros(grid.shape, dtype=np.float64)
    out[targets.frames, targets.pitches] = targets.masses
    return out


def synth_notes(seed: int, n_notes: int, grid: Grid, min_gap_frames: int = 4) -> NoteList:
    """Generate a deterministic random note list that fits the grid.

    Same-pitch onsets are separated by at least ``min_gap_frames`` frames and
    every offset falls strictly before the next same-pitch onset.  Onsets sit
    exactly on grid frames; offsets do too except when ``min_gap_frames`` is 1,
    where a half-frame offset is the only way to end before the next onset.
    """
    if n_notes < 0:
        raise ValueError(f"n_notes must be >= 0, got {n_notes}")
    if min_gap_frames < 1:
        raise ValueError(f"min_gap_frames must be >= 1, got {min_gap_frames}")
    T, F = grid.shape
    # onsets need at least one frame of room for the offset
    per_pitch = 0 if T < 2 else (T - 2) // min_gap_frames + 1
    capacity = F * per_pitch
    if n_notes > capacity:
        raise ValueError(
            f"grid {T}x{F} with min_gap {min_gap_frames} fits at most "
            f"{capacity} notes, requested {n_notes}"
        )
    rng = np.random.default_rng(seed)
    free = {p: np.ones(max(T - 1, 0), dtype=bool) for p in range(F)}  # candidate onset frames
    onsets: dict[int, list] = {p: [] for p in range(F)}
    placed = 0
    while placed < n_notes:
        open_pitches = [p for p in range(F) if free[p].any()]
        if not open_pitches:
            raise ValueError(
                f"could not place {n_notes} notes with min_gap {min_gap_frames} "
                f"on a {T}x{F} grid (placed {placed})"
            )
        p = int(open_pitches[rng.integers(len(open_pitches))])
        candidates = np.flatnonzero(free[p])
        onset = int(candidates[rng.integers(candidates.size)])
        onsets[p].append(onset)
        lo = max(0, onset - min_gap_frames + 1)
        hi = min(T - 1, onset + min_gap_frames)
        free[p][lo:hi] = False
        placed += 1

    events = []
    for p, frames in onsets.items():
        frames.sort()
        for i, onset in enumerate(frames):
            next_onset = frames[i + 1] if i + 1 < len(frames) else None
            hi = T - 1 if next_onset is None else next_onset - 1
            hi = min(hi, onset + 12)
            if hi >= onset + 1:
                off_frame = int(rng.integers(onset + 1, hi + 1))
                offset_s = grid.frame_to_time(off_frame)
            else:
                # min_gap 1 leaves no whole frame before the next onset
                offset_s = grid.frame_to_time(onset) + 0.5 * grid.frame_period_s
            events.append(
                NoteEvent(
                    onset_s=grid.frame_to_time(onset),
                    offset_s=offset_s,
                    pitch=grid.lowest_pitch + p,
                    velocity=int(rng.integers(40, 100)),
                )
            )
    return NoteList(tuple(events))
