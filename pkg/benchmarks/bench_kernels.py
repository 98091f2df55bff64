#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the source-assignment kernel and the full loss forward+gradient on a
training-scale grid with both implementations and prints a timing table.
The numbers justify keeping the @njit path for the hot loops; correctness
parity is covered by tests/test_kernels.py (outputs are bit-identical).

Usage: python benchmarks/bench_kernels.py [--frames 400] [--pitches 88]
       [--atoms 300] [--repeats 20]
"""

import argparse
import time

import numpy as np

from otroll import CostParams, Grid, TargetDistribution, assign_sources, ot_loss
from otroll import kernels


def time_fn(fn, repeats):
    fn()  # warm up (numba compiles here)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=400)
    ap.add_argument("--pitches", type=int, default=88)
    ap.add_argument("--atoms", type=int, default=300)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    grid = Grid(n_frames=args.frames, n_pitches=args.pitches)
    cells = rng.choice(args.frames * args.pitches, size=args.atoms, replace=False)
    targets = TargetDistribution(
        frames=cells // args.pitches,
        pitches=cells % args.pitches,
        masses=np.ones(args.atoms),
        grid_shape=grid.shape,
    )
    params = CostParams()
    M = rng.uniform(0, 1, grid.shape)

    rows = []
    impls = [("numpy", kernels.assign_cells_numpy)]
    if kernels.HAS_NUMBA:
        impls.insert(0, ("numba", kernels.assign_cells))
    for name, assign in impls:
        t_assign = time_fn(
            lambda: assign(
                targets.frames, targets.pitches, grid.n_frames, grid.n_pitches,
                params.tau0, params.tau1,
            ),
            args.repeats,
        )
        rows.append((f"assign_cells [{name}]", t_assign))

    assignment = assign_sources(targets, grid, params)
    recv_impls = [("numpy", kernels.find_receivers_numpy)]
    if kernels.HAS_NUMBA:
        recv_impls.insert(0, ("numba", kernels.find_receivers))
    for name, recv in recv_impls:
        t_recv = time_fn(
            lambda: recv(
                assignment.assigned.ravel(), assignment.cost.ravel(),
                M.ravel(), len(targets),
            ),
            args.repeats,
        )
        rows.append((f"find_receivers [{name}]", t_recv))

    t_loss = time_fn(
        lambda: ot_loss(M, targets, grid, params, assignment), args.repeats
    )
    rows.append(("ot_loss fwd+grad (cached assignment)", t_loss))

    print(
        f"grid {args.frames}x{args.pitches}, {args.atoms} atoms, "
        f"{args.repeats} repeats, numba={'on' if kernels.HAS_NUMBA else 'off'}"
    )
    for name, t in rows:
        print(f"  {name:<40} {t * 1e3:9.3f} ms")


if __name__ == "__main__":
    main()
