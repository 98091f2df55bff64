"""Turn predicted onset/offset mass into discrete note events."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .grid import Grid, NoteEvent, NoteList

__all__ = ["DecodeParams", "pick_peaks", "decode_notes"]


@dataclass(frozen=True)
class DecodeParams:
    threshold: float = 0.5
    min_duration_frames: int = 1
    default_duration_frames: int = 80  # 2 s at the 25 ms default period

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.min_duration_frames < 1 or self.default_duration_frames < 1:
            raise ValueError("durations must be >= 1 frame")


def pick_peaks(M: np.ndarray, threshold: float) -> List[Tuple[int, int, float]]:
    """Cells at or above threshold that are strict local maxima along time.

    A plateau of equal values counts once, at its earliest frame.  Results
    are sorted by (pitch, frame).
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    M = np.asarray(M, dtype=np.float64)
    T, F = M.shape
    peaks = []
    for f in range(F):
        row = M[:, f]
        t = 0
        while t < T:
            v = row[t]
            if v < threshold:
                t += 1
                continue
            end = t
            while end + 1 < T and row[end + 1] == v:
                end += 1
            rises = t == 0 or row[t - 1] < v
            falls = end == T - 1 or row[end + 1] < v
            if rises and falls:
                peaks.append((t, f, float(v)))
            t = end + 1
    peaks.sort(key=lambda p: (p[1], p[0]))
    return peaks


def decode_notes(
    M_on: np.ndarray,
    M_off: np.ndarray,
    grid: Grid,
    params: DecodeParams = DecodeParams(),
) -> NoteList:
    """Pair onset peaks with the next offset peak on the same pitch.

    The offset frame is the earliest offset peak strictly after the onset,
    clipped to the next same-pitch onset and to the default duration; when
    no offset peak follows, the default duration applies.  Durations are
    floored at min_duration_frames but never past the next onset, so decoded
    notes cannot overlap within a pitch.
    """
    M_on = np.asarray(M_on, dtype=np.float64)
    M_off = np.asarray(M_off, dtype=np.float64)
    if M_on.shape != grid.shape or M_off.shape != grid.shape:
        raise ValueError(
            f"prediction shapes {M_on.shape}/{M_off.shape} != grid {grid.shape}"
        )
    onset_peaks = pick_peaks(M_on, params.threshold)
    offset_peaks = pick_peaks(M_off, params.threshold)
    offsets_by_pitch: dict[int, list[int]] = {}
    for t, f, _ in offset_peaks:
        offsets_by_pitch.setdefault(f, []).append(t)
    onsets_by_pitch: dict[int, list[int]] = {}
    for t, f, _ in onset_peaks:
        onsets_by_pitch.setdefault(f, []).append(t)

    events = []
    for f, onsets in onsets_by_pitch.items():
        offs = offsets_by_pitch.get(f, [])
        for i, q in enumerate(onsets):
            next_onset = onsets[i + 1] if i + 1 < len(onsets) else None
            end = q + params.default_duration_frames
            for x in offs:
                if x > q:
                    end = min(x, end)
                    break
            end = max(end, q + params.min_duration_frames)
            if next_onset is not None:
                end = min(end, next_onset)
            events.append(
                NoteEvent(
                    onset_s=grid.frame_to_time(q),
                    offset_s=grid.frame_to_time(end),
                    pitch=grid.lowest_pitch + f,
                )
            )
    return NoteList(tuple(events))
