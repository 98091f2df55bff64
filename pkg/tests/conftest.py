"""Shared helpers for the test suite."""

import numpy as np
import pytest

from otroll import Grid, NoteEvent, NoteList, TargetDistribution


@pytest.fixture
def small_grid():
    return Grid(n_frames=16, n_pitches=12)


def make_targets(frames, pitches, grid, masses=None):
    frames = np.asarray(frames, dtype=np.int64)
    pitches = np.asarray(pitches, dtype=np.int64)
    if masses is None:
        masses = np.ones(frames.size)
    return TargetDistribution(frames, pitches, np.asarray(masses, dtype=np.float64), grid.shape)


def make_notes(rows):
    """Rows of (onset_s, offset_s, pitch)."""
    return NoteList(tuple(NoteEvent(o, e, p) for o, e, p in rows))


def random_note_list(rng, grid, n_notes, jitter=False):
    """Valid random notes on the grid; optionally off-grid continuous times."""
    from otroll import synth_notes

    seed = int(rng.integers(0, 2**31))
    notes = synth_notes(seed, n_notes, grid, min_gap_frames=3)
    if not jitter:
        return notes
    out = []
    for n in notes:
        shift = float(rng.uniform(0, 0.4 * grid.frame_period_s))
        out.append(NoteEvent(n.onset_s + shift, n.offset_s + shift, n.pitch, n.velocity))
    return NoteList(tuple(out))


def per_note_concentration(M, targets):
    """For each target atom: fraction of its pitch-row neighborhood mass that
    sits in the single largest frame.  The neighborhood is the set of frames
    nearer (in time) to this atom than to any other same-pitch atom."""
    M = np.asarray(M, dtype=np.float64)
    T = M.shape[0]
    by_pitch = {}
    for f, p, _ in targets.atoms():
        by_pitch.setdefault(p, []).append(f)
    fractions = []
    tt = np.arange(T)
    for p, frames in by_pitch.items():
        frames = np.asarray(sorted(frames))
        nearest = np.argmin(np.abs(tt[:, None] - frames[None, :]), axis=1)
        for k in range(frames.size):
            window = M[nearest == k, p]
            total = window.sum()
            fractions.append(window.max() / total if total > 0 else 0.0)
    return fractions
