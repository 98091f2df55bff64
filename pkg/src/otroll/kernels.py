"""Hot inner loops behind the transport loss, with numba and numpy paths.

Two kernels dominate runtime: the per-cell argmin over target atoms that
builds a source assignment, and the per-atom argmax over assigned cells
that routes the mass-penalty subgradient.  Both exist twice: a numba
``@njit`` version and a pure-numpy version that produce bit-identical
outputs.  The numpy path is selected when numba is unavailable or when
the environment variable ``OTROLL_NO_NUMBA`` is set to a non-empty value
other than "0".

Tie-break contract shared by both paths:

* assignment: minimize capped cost; ties break by raw temporal distance,
  then by atom order (atoms arrive sorted by (frame, pitch), so scanning
  in index order with strict improvement realizes frame-then-pitch order).
* receiver: maximize predicted mass among a target atom's assigned cells;
  ties break by lower transport cost, then by lower flat cell index.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "HAS_NUMBA",
    "NUMBA_DISABLED",
    "assign_cells",
    "assign_cells_numpy",
    "find_receivers",
    "find_receivers_numpy",
]

NUMBA_DISABLED = os.environ.get("OTROLL_NO_NUMBA", "0") not in ("", "0")

HAS_NUMBA = False
if not NUMBA_DISABLED:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        pass


def assign_cells_numpy(atom_frames, atom_pitches, n_frames, n_pitches, tau0, tau1):
    """Assign every grid cell to its cheapest target atom.

    Returns (assigned, cost): assigned[t, f] is the atom index (or -1 when
    there are no atoms) and cost[t, f] the realized capped transport cost.
    """
    T, F = int(n_frames), int(n_pitches)
    n = int(atom_frames.shape[0])
    assigned = np.full((T, F), -1, dtype=np.int64)
    cost = np.full((T, F), float(tau1), dtype=np.float64)
    if n == 0:
        return assigned, cost
    tt = np.arange(T, dtype=np.float64)[:, None]
    best_cost = np.full((T, F), np.inf)
    best_raw = np.full((T, F), np.inf)
    for j in range(n):
        raw_j = np.abs(tt - float(atom_frames[j]))  # (T, 1)
        cost_col = np.minimum(raw_j, float(tau0))
        same = np.arange(F) == atom_pitches[j]
        cost_j = np.where(same[None, :], cost_col, float(tau1))
        raw_j = np.broadcast_to(raw_j, (T, F))
        better = (cost_j < best_cost) | ((cost_j == best_cost) & (raw_j < best_raw))
        assigned = np.where(better, j, assigned)
        best_cost = np.where(better, cost_j, best_cost)
        best_raw = np.where(better, raw_j, best_raw)
    return assigned, best_cost


def find_receivers_numpy(assigned_flat, cost_flat, m_flat, n_atoms):
    """Flat cell index of each atom's penalty receiver (argmax of mass).

    Every atom owns at least its own cell, so each group is non-empty.
    """
    if n_atoms == 0:
        return np.empty(0, dtype=np.int64)
    # stable lexsort: primary assigned atom, then mass desc, cost asc, index asc
    order = np.lexsort((cost_flat, -m_flat, assigned_flat))
    groups = assigned_flat[order]
    first = np.searchsorted(groups, np.arange(n_atoms, dtype=np.int64), side="left")
    return order[first].astype(np.int64)


if HAS_NUMBA:

    @njit(cache=True)
    def _assign_cells_numba(atom_frames, atom_pitches, n_frames, n_pitches, tau0, tau1):
        T = n_frames
        F = n_pitches
        n = atom_frames.shape[0]
        assigned = np.full((T, F), -1, dtype=np.int64)
        cost = np.full((T, F), tau1, dtype=np.float64)
        if n == 0:
            return assigned, cost
        for t in range(T):
            for f in range(F):
                best_cost = np.inf
                best_raw = np.inf
                best_j = -1
                for j in range(n):
                    raw = abs(t - atom_frames[j])
                    if f == atom_pitches[j]:
                        c = raw if raw < tau0 else tau0
                    else:
                        c = tau1
                    rawf = float(raw)
                    if c < best_cost or (c == best_cost and rawf < best_raw):
                        best_cost = c
                        best_raw = rawf
                        best_j = j
                assigned[t, f] = best_j
                cost[t, f] = best_cost
        return assigned, cost

    @njit(cache=True)
    def _find_receivers_numba(assigned_flat, cost_flat, m_flat, n_atoms):
        receivers = np.full(n_atoms, -1, dtype=np.int64)
        best_val = np.full(n_atoms, -np.inf)
        best_cost = np.full(n_atoms, np.inf)
        for i in range(assigned_flat.shape[0]):
            j = assigned_flat[i]
            if j < 0:
                continue
            v = m_flat[i]
            c = cost_flat[i]
            if v > best_val[j] or (v == best_val[j] and c < best_cost[j]):
                best_val[j] = v
                best_cost[j] = c
                receivers[j] = i
        return receivers

    def assign_cells(atom_frames, atom_pitches, n_frames, n_pitches, tau0, tau1):
        return _assign_cells_numba(
            atom_frames, atom_pitches, n_frames, n_pitches, float(tau0), float(tau1)
        )

    def find_receivers(assigned_flat, cost_flat, m_flat, n_atoms):
        if n_atoms == 0:
            return np.empty(0, dtype=np.int64)
        return _find_receivers_numba(assigned_flat, cost_flat, m_flat, n_atoms)

else:
    assign_cells = assign_cells_numpy
    find_receivers = find_receivers_numpy
