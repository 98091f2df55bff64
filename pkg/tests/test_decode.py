import numpy as np
import pytest

from otroll import (
    DecodeParams,
    Grid,
    decode_notes,
    pick_peaks,
    quantize_events,
    synth_notes,
    target_indicator,
)

from conftest import make_notes


def test_pick_peaks_single_spike():
    M = np.zeros((10, 88))
    M[4, 39] = 1.0
    assert pick_peaks(M, 0.5) == [(4, 39, 1.0)]


def test_pick_peaks_local_maximum_only():
    M = np.zeros((5, 1))
    M[:, 0] = [0.0, 0.6, 0.9, 0.6, 0.0]
    assert pick_peaks(M, 0.5) == [(2, 0, 0.9)]


def test_pick_peaks_plateau_earliest_frame():
    M = np.zeros((4, 1))
    M[:, 0] = [0.0, 0.8, 0.8, 0.0]
    assert pick_peaks(M, 0.5) == [(1, 0, 0.8)]


def test_pick_peaks_below_threshold_ignored():
    M = np.zeros((5, 2))
    M[2, 0] = 0.4
    assert pick_peaks(M, 0.5) == []


def test_pick_peaks_boundaries():
    M = np.zeros((3, 1))
    M[0, 0] = 0.9
    M[2, 0] = 0.8
    assert pick_peaks(M, 0.5) == [(0, 0, 0.9), (2, 0, 0.8)]
    assert pick_peaks(np.array([[0.7]]), 0.5) == [(0, 0, 0.7)]


def test_pick_peaks_sorted_by_pitch_then_frame():
    M = np.zeros((6, 3))
    M[4, 0] = 1.0
    M[1, 2] = 0.9
    M[2, 1] = 0.8
    frames_pitches = [(t, f) for t, f, _ in pick_peaks(M, 0.5)]
    assert frames_pitches == [(4, 0), (2, 1), (1, 2)]


def test_pick_peaks_threshold_validation():
    with pytest.raises(ValueError):
        pick_peaks(np.zeros((2, 2)), 0.0)


def test_decode_basic_note():
    g = Grid(n_frames=20)
    M_on = np.zeros(g.shape)
    M_off = np.zeros(g.shape)
    M_on[4, 39] = 1.0
    M_off[10, 39] = 1.0
    notes = decode_notes(M_on, M_off, g)
    assert len(notes) == 1
    n = notes[0]
    assert (n.onset_s, n.offset_s, n.pitch) == (0.1, 0.25, 60)


def test_decode_missing_offset_uses_default_duration():
    g = Grid(n_frames=200)
    M_on = np.zeros(g.shape)
    M_on[4, 0] = 1.0
    notes = decode_notes(M_on, np.zeros(g.shape), g, DecodeParams(default_duration_frames=80))
    assert notes[0].offset_s == pytest.approx(g.frame_to_time(84))


def test_decode_all_zero():
    g = Grid(n_frames=10)
    assert len(decode_notes(np.zeros(g.shape), np.zeros(g.shape), g)) == 0


def test_decode_offset_clipped_by_next_onset():
    g = Grid(n_frames=30, n_pitches=2)
    M_on = np.zeros(g.shape)
    M_off = np.zeros(g.shape)
    M_on[2, 0] = 1.0
    M_on[8, 0] = 1.0
    M_off[12, 0] = 1.0  # first onset's candidate offset lies past the next onset
    notes = decode_notes(M_on, M_off, g)
    assert notes[0].offset_s <= notes[1].onset_s
    assert notes[0].offset_s == g.frame_to_time(8)


def test_decode_shape_mismatch():
    g = Grid(n_frames=10)
    with pytest.raises(ValueError):
        decode_notes(np.zeros((10, 88)), np.zeros((9, 88)), g)


def test_decode_round_trip_from_quantized_indicators():
    # same-pitch onsets >= 3 frames apart, durations >= 1 frame: decoding the
    # quantized indicators reproduces the notes within half a frame period.
    # Adjacent quantized offsets would merge into one plateau peak, so those
    # rare instances are skipped (measure-zero for well-separated notes).
    g = Grid(n_frames=100, n_pitches=10)
    checked = 0
    for seed in range(12):
        notes = synth_notes(seed, 12, g, min_gap_frames=3)
        tgt_on = quantize_events(notes, g, "onset")
        tgt_off = quantize_events(notes, g, "offset")
        if len(tgt_on) != len(notes) or len(tgt_off) != len(notes):
            continue
        off_by_pitch = {}
        adjacent = False
        for f, p, _ in tgt_off.atoms():
            off_by_pitch.setdefault(p, []).append(f)
        for frames in off_by_pitch.values():
            frames.sort()
            if any(b - a == 1 for a, b in zip(frames, frames[1:])):
                adjacent = True
        if adjacent:
            continue
        decoded = decode_notes(
            target_indicator(tgt_on, g), target_indicator(tgt_off, g), g
        )
        assert len(decoded) == len(notes)
        half = g.frame_period_s / 2 + 1e-12
        for ref, est in zip(notes, decoded):
            assert ref.pitch == est.pitch
            assert abs(ref.onset_s - est.onset_s) <= half
            assert abs(ref.offset_s - est.offset_s) <= half
        checked += 1
    assert checked >= 8


def test_decoded_notes_never_overlap_within_pitch():
    rng = np.random.default_rng(17)
    g = Grid(n_frames=40, n_pitches=4)
    for _ in range(25):
        M_on = (rng.uniform(size=g.shape) > 0.8) * rng.uniform(0.6, 1.0, g.shape)
        M_off = (rng.uniform(size=g.shape) > 0.8) * rng.uniform(0.6, 1.0, g.shape)
        notes = decode_notes(M_on, M_off, g)
        by_pitch = {}
        for n in notes:
            by_pitch.setdefault(n.pitch, []).append(n)
        for group in by_pitch.values():
            group.sort(key=lambda n: n.onset_s)
            for a, b in zip(group, group[1:]):
                assert a.offset_s <= b.onset_s + 1e-12


def test_decode_params_validation():
    with pytest.raises(ValueError):
        DecodeParams(threshold=1.5)
    with pytest.raises(ValueError):
        DecodeParams(min_duration_frames=0)
