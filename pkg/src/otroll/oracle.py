"""Independent verification machinery for the transport loss.

Nothing here shares logic with the kernels it checks: the finite-difference
gradient only calls the loss as a black box, the brute-force distance
rescans every cell against every atom with plain loops, and the Hungarian
solver grounds the constrained loss against exact balanced transport for
unit point masses.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum

import numpy as np

from .grid import Grid, TargetDistribution
from .otloss import CostParams, assign_sources, ot_loss

__all__ = [
    "AssignmentProblem",
    "fd_gradient",
    "ot_distance_bruteforce",
    "hungarian_assignment",
    "random_instance",
    "argmax_tie_exclusion",
    "gradient_check",
]


@dataclass(frozen=True)
class AssignmentProblem:
    """Square cost matrix for minimum-cost perfect matching."""

    cost_matrix: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cost_matrix, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise ValueError(f"cost matrix must be square and non-empty, got {c.shape}")
        if not np.isfinite(c).all():
            raise ValueError("cost matrix must be finite")
        object.__setattr__(self, "cost_matrix", c)


def fd_gradient(
    M: np.ndarray,
    targets: TargetDistribution,
    grid: Grid,
    params: CostParams,
    eps: float = 1e-4,
) -> np.ndarray:
    """Central finite differences of the full loss, cell by cell.

    Probes may push entries outside [0, 1]; the loss accepts that.  The
    source assignment does not depend on M, so it is computed once and
    reused for every probe.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    M = np.asarray(M, dtype=np.float64)
    assignment = assign_sources(targets, grid, params)
    grad = np.zeros_like(M)
    work = M.copy()
    it = np.nditer(M, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = work[idx]
        work[idx] = orig + eps
        up = ot_loss(work, targets, grid, params, assignment).total
        work[idx] = orig - eps
        down = ot_loss(work, targets, grid, params, assignment).total
        work[idx] = orig
        grad[idx] = (up - down) / (2.0 * eps)
    return grad


def ot_distance_bruteforce(
    M: np.ndarray,
    targets: TargetDistribution,
    grid: Grid,
    params: CostParams,
) -> float:
    """Transport term recomputed by direct per-cell scanning over all atoms.

    Deliberately uses no kernels, no precomputed assignment, and no shared
    cost code; agreement with ``ot_distance`` must be exact because both
    sides reduce identical per-cell products with correctly rounded sums.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.shape != grid.shape:
        raise ValueError(f"prediction shape {M.shape} != grid shape {grid.shape}")
    atoms = list(targets.atoms())
    tau0 = float(params.tau0)
    tau1 = float(params.tau1)
    products = []
    for t in range(grid.n_frames):
        for f in range(grid.n_pitches):
            best = tau1
            for af, ap, _ in atoms:
                if ap == f:
                    d = float(abs(t - af))
                    c = d if d < tau0 else tau0
                else:
                    c = tau1
                if c < best:
                    best = c
            products.append(float(M[t, f]) * best)
    return fsum(products)


def random_instance(
    seed: int, grid: Grid, max_atoms: int = 10, w: float = 1.0
) -> tuple[np.ndarray, TargetDistribution]:
    """Deterministic random (M, targets) pair: distinct atom cells, mass w."""
    rng = np.random.default_rng(seed)
    n_cells = grid.n_frames * grid.n_pitches
    n_atoms = int(rng.integers(0, min(max_atoms, n_cells) + 1))
    cells = rng.choice(n_cells, size=n_atoms, replace=False)
    targets = TargetDistribution(
        frames=cells // grid.n_pitches,
        pitches=cells % grid.n_pitches,
        masses=np.full(n_atoms, w),
        grid_shape=grid.shape,
    )
    M = rng.uniform(0.0, 1.0, grid.shape)
    return M, targets


def argmax_tie_exclusion(
    M: np.ndarray,
    targets: TargetDistribution,
    grid: Grid,
    params: CostParams,
    eps: float,
) -> np.ndarray:
    """Boolean mask of cells whose penalty-receiver status could flip under
    a +-eps probe: within each atom's assigned group, when the runner-up mass
    comes within 2*eps of the maximum, all near-maximal cells are excluded
    from finite-difference comparison."""
    M = np.asarray(M, dtype=np.float64)
    assignment = assign_sources(targets, grid, params)
    excluded = np.zeros(M.size, dtype=bool)
    assigned = assignment.assigned.ravel()
    m_flat = M.ravel()
    for j in range(len(targets)):
        cells = np.flatnonzero(assigned == j)
        values = m_flat[cells]
        near = values >= values.max() - 2.0 * eps
        if near.sum() >= 2:
            excluded[cells[near]] = True
    return excluded.reshape(M.shape)


def gradient_check(
    seed: int,
    grid: Grid,
    params: CostParams,
    eps: float = 1e-4,
    max_atoms: int = 10,
) -> tuple[float, int]:
    """Max relative error between analytic and finite-difference gradients
    on one random instance, excluding argmax-tie cells.  Relative error is
    |analytic - fd| / max(1, |fd|)."""
    M, targets = random_instance(seed, grid, max_atoms)
    analytic = ot_loss(M, targets, grid, params).gradient
    numeric = fd_gradient(M, targets, grid, params, eps)
    keep = ~argmax_tie_exclusion(M, targets, grid, params, eps)
    rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
    if not keep.any():
        return 0.0, int((~keep).sum())
    return float(rel[keep].max()), int((~keep).sum())


def hungarian_assignment(problem: AssignmentProblem) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect matching via the O(n^3) potentials method.

    Returns (perm, total) where perm[i] is the column matched to row i and
    total is the matching cost, optimal over all n! permutations.
    """
    a = problem.cost_matrix
    n = a.shape[0]
    INF = np.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row currently matched to column j (1-based)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    perm = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    total = fsum(a[i, perm[i]] for i in range(n))
    return perm, total
