import numpy as np
import pytest

from otroll import (
    CostParams,
    Grid,
    MatchParams,
    OptimizeConfig,
    decode_notes,
    initial_mass,
    match_notes,
    quantize_events,
    run_bce_descent,
    run_demo,
    run_ot_descent,
    synth_notes,
    target_indicator,
)
from otroll.bce import pianoroll_target


def test_indicator_init_converges_immediately():
    g = Grid(n_frames=20, n_pitches=6)
    notes = synth_notes(7, 4, g)
    tgt_on = quantize_events(notes, g, "onset")
    tgt_off = quantize_events(notes, g, "offset")
    res = run_ot_descent(
        target_indicator(tgt_on, g),
        target_indicator(tgt_off, g),
        tgt_on, tgt_off, g, CostParams(),
    )
    assert res.iterations == 0
    assert res.trace == [0.0]
    assert res.converged


def test_demo_seed42_converges_to_perfect_transcription():
    demo = run_demo(OptimizeConfig())
    res = demo.result
    assert res.converged
    assert res.iterations <= 5000
    assert res.trace[-1] < 1e-3
    decoded = decode_notes(res.M_on, res.M_off, demo.grid)
    assert match_notes(demo.notes, decoded, MatchParams(use_offsets=False)).f1 == 1.0
    assert match_notes(demo.notes, decoded, MatchParams(use_offsets=True)).f1 == 1.0


def test_trace_monotone_non_increasing():
    for init in ("zeros", "uniform", "smeared"):
        demo = run_demo(OptimizeConfig(init=init, max_iters=400))
        trace = demo.result.trace
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        assert trace[-1] <= trace[0]


def test_smeared_ot_descent_sharpens_to_single_frames():
    from conftest import per_note_concentration

    demo = run_demo(OptimizeConfig(init="smeared", smear_sigma=2.0))
    res = demo.result
    assert res.converged
    for head, tgt in ((res.M_on, demo.tgt_on), (res.M_off, demo.tgt_off)):
        for frac in per_note_concentration(head, tgt):
            assert frac >= 0.9


def test_bce_descent_reaches_two_frame_targets():
    cfg = OptimizeConfig(loss="bce", init="smeared", loss_tolerance=1e-3)
    demo = run_demo(cfg)
    res = demo.result
    assert res.converged
    g = demo.grid
    roll_on = pianoroll_target(demo.notes, g, "onset", 2)
    np.testing.assert_allclose(res.M_on, roll_on, atol=1e-3)
    # each note's onset activation spans the full 2-frame target
    for f, p, _ in demo.tgt_on.atoms():
        frames_active = np.flatnonzero(res.M_on[:, p] > 0.5)
        assert f in frames_active
        assert f + 1 in frames_active


def test_uniform_init_converges():
    demo = run_demo(OptimizeConfig(init="uniform"))
    assert demo.result.converged


def test_initial_mass_shapes():
    g = Grid(n_frames=10, n_pitches=4)
    notes = synth_notes(3, 2, g)
    tgt = quantize_events(notes, g, "onset")
    for init in ("zeros", "uniform", "smeared"):
        M = initial_mass(init, g, tgt)
        assert M.shape == g.shape
        assert M.min() >= 0.0 and M.max() <= 1.0
    assert initial_mass("zeros", g, tgt).sum() == 0.0
    assert (initial_mass("uniform", g, tgt) == 0.5).all()
    smeared = initial_mass("smeared", g, tgt, sigma=2.0)
    for f, p, _ in tgt.atoms():
        assert smeared[f, p] == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizeConfig(step_size=0.0)
    with pytest.raises(ValueError):
        OptimizeConfig(init="noise")
    with pytest.raises(ValueError):
        OptimizeConfig(loss="mse")


def test_bce_descent_runs_standalone():
    g = Grid(n_frames=12, n_pitches=4)
    notes = synth_notes(5, 3, g)
    roll_on = pianoroll_target(notes, g, "onset", 2)
    roll_off = pianoroll_target(notes, g, "offset", 2)
    res = run_bce_descent(
        np.full(g.shape, 0.5), np.full(g.shape, 0.5), roll_on, roll_off,
        step=0.05, max_iters=3000, tol=1e-3,
    )
    assert res.converged
    assert np.all((res.M_on > 0.5) == (roll_on == 1.0))
