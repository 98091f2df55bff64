"""Bitwise parity between the binding surface and the primary package."""

import numpy as np
import pytest

import otroll
from otroll.oracle import random_instance
from otroll_bind import BoundLoss, evaluate, harmonic_mask_matrix, loss_forward_backward


def atoms_array(targets):
    return np.column_stack(
        [targets.frames, targets.pitches, targets.masses]
    ).astype(np.float64)


def test_loss_parity_1000_fixtures():
    grid = otroll.Grid(n_frames=12, n_pitches=8)
    bound = BoundLoss(grid.n_frames, grid.n_pitches)
    for seed in range(1000):
        M, targets = random_instance(seed, grid, max_atoms=10)
        expected = otroll.ot_loss(M, targets, grid, otroll.CostParams())
        total, grad = bound(M, atoms_array(targets))
        assert total == expected.total, f"seed {seed}"
        np.testing.assert_array_equal(grad, expected.gradient)


def test_loss_parity_through_matrix_files(tmp_path):
    # serialize predictions through the on-disk format and compare both
    # sides on the deserialized values
    grid = otroll.Grid(n_frames=10, n_pitches=6)
    bound = BoundLoss(grid.n_frames, grid.n_pitches)
    for seed in range(25):
        M, targets = random_instance(seed, grid, max_atoms=8)
        path = tmp_path / f"m{seed}.otpr"
        otroll.write_matrix(path, M)
        M_back = otroll.read_matrix(path)
        expected = otroll.ot_loss(M_back, targets, grid, otroll.CostParams())
        total, grad = bound(M_back, atoms_array(targets))
        assert total == expected.total
        np.testing.assert_array_equal(grad, expected.gradient)


def test_indicator_input_gives_zero_loss():
    bound = BoundLoss(8, 4)
    atoms = np.array([[2.0, 1.0, 1.0], [5.0, 3.0, 1.0]])
    M = np.zeros((8, 4))
    M[2, 1] = 1.0
    M[5, 3] = 1.0
    total, grad = bound(M, atoms)
    assert total == 0.0
    assert grad[2, 1] == 0.0 and grad[5, 3] == 0.0


def test_one_frame_shift_fixture():
    # shift law parity: total = N * w for a one-frame shift
    bound = BoundLoss(20, 2)
    frames = np.array([3, 9, 15])
    atoms = np.column_stack([frames, np.zeros(3), np.ones(3)]).astype(float)
    M = np.zeros((20, 2))
    M[frames + 1, 0] = 1.0
    total, _ = bound(M, atoms)
    assert total == 3.0


def test_evaluate_parity_200_cases():
    rng = np.random.default_rng(31)
    for _ in range(200):
        def rows(n):
            out, t = [], 0.0
            for _ in range(n):
                t += float(rng.uniform(0, 0.08))
                out.append([t, t + float(rng.uniform(0.2, 1.0)), float(rng.choice([60, 61]))])
            return np.array(out).reshape(-1, 3)

        ref = rows(int(rng.integers(0, 8)))
        est = rows(int(rng.integers(0, 8)))
        for use_offsets in (False, True):
            p, r, f1, n = evaluate(ref, est, use_offsets=use_offsets)
            ref_nl = otroll.NoteList(tuple(
                otroll.NoteEvent(a, b, int(c)) for a, b, c in ref
            ))
            est_nl = otroll.NoteList(tuple(
                otroll.NoteEvent(a, b, int(c)) for a, b, c in est
            ))
            expected = otroll.match_notes(
                ref_nl, est_nl, otroll.MatchParams(use_offsets=use_offsets)
            )
            assert n == expected.n_match
            assert (p, r, f1) == (expected.precision, expected.recall, expected.f1)


def test_evaluate_tolerance_fixtures():
    ref = np.array([[1.0, 2.0, 60.0]])
    near = np.array([[1.040, 2.0, 60.0]])
    far = np.array([[1.060, 2.0, 60.0]])
    assert evaluate(ref, near)[3] == 1
    assert evaluate(ref, far)[3] == 0
    assert evaluate(ref, ref)[:3] == (1.0, 1.0, 1.0)


def test_harmonic_mask_parity():
    ours = harmonic_mask_matrix(96, 48, 8, 25.0)
    primary = otroll.harmonic_mask(96, 48, 8, 25.0).bias
    np.testing.assert_array_equal(ours, primary)
    assert ours.dtype == np.float32


def test_one_shot_wrapper_matches_bound():
    grid = otroll.Grid(n_frames=9, n_pitches=5)
    M, targets = random_instance(1, grid, max_atoms=6)
    bound = BoundLoss(9, 5)
    a_total, a_grad = bound(M, atoms_array(targets))
    b_total, b_grad = loss_forward_backward(M, atoms_array(targets))
    assert a_total == b_total
    np.testing.assert_array_equal(a_grad, b_grad)
