"""Frame-level binary cross-entropy baseline and its piano-roll targets."""

from __future__ import annotations

from math import fsum
from typing import Tuple

import numpy as np

from .grid import Grid, NoteList

__all__ = ["CLAMP_EPS", "pianoroll_target", "bce_loss"]

CLAMP_EPS = 1e-7


def pianoroll_target(
    notes: NoteList, grid: Grid, which: str, event_len_frames: int = 2
) -> np.ndarray:
    """Binary (n_frames, n_pitches) roll marking each event for a fixed length.

    Each note activates frames [q, q + event_len_frames) at its pitch, where
    q is the quantized onset or offset frame; runs are clamped at the grid
    end and overlaps union.
    """
    if which not in ("onset", "offset"):
        raise ValueError(f"which must be 'onset' or 'offset', got {which!r}")
    if event_len_frames < 1:
        raise ValueError(f"event_len_frames must be >= 1, got {event_len_frames}")
    roll = np.zeros(grid.shape, dtype=np.float64)
    for note in notes:
        pitch_idx = grid.pitch_index(note.pitch)
        time_s = note.onset_s if which == "onset" else note.offset_s
        q, _ = grid.time_to_frame(time_s)
        roll[q : min(q + event_len_frames, grid.n_frames), pitch_idx] = 1.0
    return roll


def bce_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Summed binary cross-entropy and its gradient with respect to pred.

    Predictions are clamped to [eps, 1 - eps] before the logs; the gradient
    is (p - y) / (p (1 - p)) on unclamped entries and 0 where the clamp is
    active (saturation).
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"pred shape {pred.shape} != target shape {target.shape}")
    clamped = np.clip(pred, CLAMP_EPS, 1.0 - CLAMP_EPS)
    terms = -(target * np.log(clamped) + (1.0 - target) * np.log1p(-clamped))
    total = fsum(terms.ravel())
    active = (pred > CLAMP_EPS) & (pred < 1.0 - CLAMP_EPS)
    grad = np.zeros_like(pred)
    grad[active] = (pred[active] - target[active]) / (pred[active] * (1.0 - pred[active]))
    return total, grad
