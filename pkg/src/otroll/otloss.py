"""Constrained optimal-transport loss with analytic gradients.

The loss treats the prediction matrix M as transportable mass and the
quantized note events as target point masses.  Each grid cell ships its
whole mass to a single cheapest target atom (capped temporal cost within a
pitch, prohibitive cost across pitches), which collapses the transport plan
to a per-cell assignment that depends only on geometry, never on M.  An
unbalanced-OT mass penalty pushes the largest mass assigned to each atom
toward that atom's target mass.

Reductions over cells are computed with ``math.fsum`` so that the transport
value is the correctly rounded sum of the per-cell products; this makes the
result independent of summation order and lets an independently coded
brute-force evaluation match it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum
from typing import Optional, Tuple

import numpy as np

from .grid import Grid, TargetDistribution
from .kernels import assign_cells, find_receivers

__all__ = [
    "CostParams",
    "SourceAssignment",
    "LossBreakdown",
    "transport_cost",
    "assign_sources",
    "ot_distance",
    "mass_penalty",
    "ot_loss",
    "total_loss",
]


@dataclass(frozen=True)
class CostParams:
    """Cost-function constants.

    tau0 caps the same-pitch temporal cost (in frames) so distant mismatches
    cannot blow up gradients; tau1 is the prohibitive cross-pitch cost and
    must dominate tau0; lam weights the mass penalty against the transport
    term.
    """

    tau0: float = 5.0
    tau1: float = 1000.0
    lam: float = 1.0

    def __post_init__(self):
        if self.tau0 < 0:
            raise ValueError(f"tau0 must be >= 0, got {self.tau0}")
        if self.tau1 <= self.tau0:
            raise ValueError(f"tau1 ({self.tau1}) must exceed tau0 ({self.tau0})")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class SourceAssignment:
    """Per-cell cheapest target atom and its realized transport cost.

    ``assigned[t, f]`` is the atom index every unit of mass at (t, f) would
    ship to, or -1 when the target set is empty (cost then falls back to
    tau1 everywhere).  The assignment is a pure function of the target
    geometry and the cost parameters, so it is computed once per clip and
    reused across optimization steps.
    """

    assigned: np.ndarray
    cost: np.ndarray
    n_atoms: int
    grid_shape: Tuple[int, int]

    def __post_init__(self):
        self.assigned.setflags(write=False)
        self.cost.setflags(write=False)

    def sources_of(self, atom_idx: int) -> np.ndarray:
        """Flat cell indices assigned to the given atom, ascending."""
        if not 0 <= atom_idx < self.n_atoms:
            raise IndexError(f"atom index {atom_idx} out of range 0..{self.n_atoms - 1}")
        return np.flatnonzero(self.assigned.ravel() == atom_idx)


@dataclass(frozen=True)
class LossBreakdown:
    """Transport term, mass-penalty term, their weighted total, and dL/dM."""

    transport: float
    mass_penalty: float
    total: float
    gradient: np.ndarray


def transport_cost(
    cell_a: Tuple[int, int], cell_b: Tuple[int, int], params: CostParams
) -> float:
    """Cost of moving one unit of mass between two grid cells.

    Same pitch: temporal distance in frames, capped at tau0.  Different
    pitch: tau1.  Symmetric in its arguments.
    """
    ta, fa = cell_a
    tb, fb = cell_b
    if fa != fb:
        return float(params.tau1)
    return float(min(abs(ta - tb), params.tau0))


def assign_sources(
    targets: TargetDistribution, grid: Grid, params: CostParams
) -> SourceAssignment:
    """Map every grid cell to the target atom minimizing the transport cost.

    Cost ties break by raw temporal distance, then by earlier target frame,
    then lower target pitch, then lower atom index.  Raw distance comes
    first so that a cell always stays with its nearest same-pitch atom even
    when several costs saturate at the tau0 cap; in particular each atom's
    own cell is always assigned to that atom.
    """
    if targets.grid_shape != grid.shape:
        raise ValueError(f"target grid {targets.grid_shape} != grid {grid.shape}")
    assigned, cost = assign_cells(
        targets.frames, targets.pitches, grid.n_frames, grid.n_pitches,
        params.tau0, params.tau1,
    )
    return SourceAssignment(assigned, cost, len(targets), grid.shape)


def _check_shape(M: np.ndarray, grid_shape: Tuple[int, int]) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.shape != tuple(grid_shape):
        raise ValueError(f"prediction shape {M.shape} != grid shape {tuple(grid_shape)}")
    return M


def ot_distance(M: np.ndarray, assignment: SourceAssignment) -> float:
    """Transport term: sum over cells of mass times assigned cost."""
    M = _check_shape(M, assignment.grid_shape)
    return fsum((M * assignment.cost).ravel())


def mass_penalty(
    M: np.ndarray, assignment: SourceAssignment, targets: TargetDistribution
) -> float:
    """Squared shortfall between each atom's mass and its largest assigned mass."""
    M = _check_shape(M, assignment.grid_shape)
    if assignment.n_atoms != len(targets):
        raise ValueError(
            f"assignment has {assignment.n_atoms} atoms, targets have {len(targets)}"
        )
    if len(targets) == 0:
        return 0.0
    receivers = find_receivers(
        assignment.assigned.ravel(), assignment.cost.ravel(), M.ravel(), len(targets)
    )
    gamma_max = M.ravel()[receivers]
    return fsum((targets.masses - gamma_max) ** 2)


def ot_loss(
    M: np.ndarray,
    targets: TargetDistribution,
    grid: Grid,
    params: CostParams,
    assignment: Optional[SourceAssignment] = None,
) -> LossBreakdown:
    """Full loss for one prediction head: transport + lam * mass penalty.

    The gradient is exact: every cell carries its transport cost, and each
    atom's penalty receiver (the argmax of M over the atom's assigned cells,
    ties toward lower cost then lower flat index) additionally carries the
    penalty derivative -2 * lam * (target mass - received mass).

    Entries of M may leave [0, 1] (finite-difference probes do); only
    finiteness is enforced.
    """
    M = _check_shape(M, grid.shape)
    if not np.isfinite(M).all():
        raise ValueError("prediction matrix contains non-finite entries")
    if assignment is None:
        assignment = assign_sources(targets, grid, params)
    else:
        if assignment.grid_shape != grid.shape:
            raise ValueError(
                f"assignment grid {assignment.grid_shape} != grid {grid.shape}"
            )
        if assignment.n_atoms != len(targets):
            raise ValueError(
                f"assignment has {assignment.n_atoms} atoms, targets have {len(targets)}"
            )

    m_flat = M.ravel()
    transport = fsum((m_flat * assignment.cost.ravel()))
    gradient = assignment.cost.copy()
    if len(targets) > 0:
        receivers = find_receivers(
            assignment.assigned.ravel(), assignment.cost.ravel(), m_flat, len(targets)
        )
        gamma_max = m_flat[receivers]
        penalty = fsum((targets.masses - gamma_max) ** 2)
        grad_flat = gradient.ravel()
        grad_flat[receivers] += params.lam * (-2.0) * (targets.masses - gamma_max)
    else:
        penalty = 0.0
    total = transport + params.lam * penalty
    return LossBreakdown(
        transport=transport, mass_penalty=penalty, total=total, gradient=gradient
    )


def total_loss(
    M_on: np.ndarray,
    M_off: np.ndarray,
    tgt_on: TargetDistribution,
    tgt_off: TargetDistribution,
    grid: Grid,
    params: CostParams,
    assignment_on: Optional[SourceAssignment] = None,
    assignment_off: Optional[SourceAssignment] = None,
) -> Tuple[LossBreakdown, LossBreakdown, float]:
    """Loss over both heads: L(M_on, onsets) + L(M_off, offsets)."""
    on = ot_loss(M_on, tgt_on, grid, params, assignment_on)
    off = ot_loss(M_off, tgt_off, grid, params, assignment_off)
    return on, off, on.total + off.total
