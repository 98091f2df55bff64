import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from otroll import Grid, parse_smf, quantize_events, read_matrix, target_indicator, write_matrix
from otroll.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_synth_then_ingest_round_trip(tmp_path, capsys):
    mid = tmp_path / "synth.mid"
    code, _, _ = run(capsys, "synth", "--seed", "42", "--notes", "3", "--out", str(mid))
    assert code == 0
    code, out, _ = run(capsys, "ingest", "--input", str(mid))
    assert code == 0
    rows = list(csv.reader(out.strip().splitlines()))
    assert rows[0] == ["onset_s", "offset_s", "pitch", "velocity"]
    assert len(rows) == 4  # header + 3 notes


def test_synth_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.mid", tmp_path / "b.mid"
    run(capsys, "synth", "--seed", "7", "--notes", "5", "--out", str(a))
    run(capsys, "synth", "--seed", "7", "--notes", "5", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_ingest_empty_file(tmp_path, capsys):
    from otroll import NoteList, write_smf

    mid = tmp_path / "empty.mid"
    mid.write_bytes(write_smf(NoteList()))
    code, out, _ = run(capsys, "ingest", "--input", str(mid))
    assert code == 0
    assert out.strip().splitlines() == ["onset_s,offset_s,pitch,velocity"]


def test_eval_identical_files(tmp_path, capsys):
    mid = tmp_path / "x.mid"
    run(capsys, "synth", "--seed", "3", "--notes", "4", "--out", str(mid))
    code, out, err = run(capsys, "eval", "--ref", str(mid), "--est", str(mid))
    assert code == 0
    report = json.loads(out)
    assert report["onset_only"]["f1"] == 1.0
    assert report["onset_offset"]["f1"] == 1.0


def test_loss_on_exact_indicators_is_zero(tmp_path, capsys):
    mid = tmp_path / "ref.mid"
    run(capsys, "synth", "--seed", "42", "--notes", "3", "--out", str(mid))
    notes, _, _ = parse_smf(mid.read_bytes())
    grid = Grid(n_frames=40, n_pitches=12)
    on = target_indicator(quantize_events(notes, grid, "onset"), grid)
    off = target_indicator(quantize_events(notes, grid, "offset"), grid)
    p_on, p_off = tmp_path / "on.otpr", tmp_path / "off.otpr"
    write_matrix(p_on, on)
    write_matrix(p_off, off)
    code, out, _ = run(
        capsys, "loss", "--pred-on", str(p_on), "--pred-off", str(p_off), "--ref", str(mid)
    )
    assert code == 0
    report = json.loads(out)
    assert report["ot"]["total"] == 0.0
    assert report["bce"]["total"] > 0.0  # indicators are not 2-frame rolls


def test_loss_shifted_prediction_shift_law(tmp_path, capsys):
    mid = tmp_path / "ref.mid"
    run(capsys, "synth", "--seed", "42", "--notes", "3", "--out", str(mid))
    notes, _, _ = parse_smf(mid.read_bytes())
    grid = Grid(n_frames=40, n_pitches=12)
    tgt_on = quantize_events(notes, grid, "onset")
    tgt_off = quantize_events(notes, grid, "offset")
    on = np.zeros(grid.shape)
    off = np.zeros(grid.shape)
    on[tgt_on.frames + 1, tgt_on.pitches] = 1.0
    off[tgt_off.frames + 1, tgt_off.pitches] = 1.0
    p_on, p_off = tmp_path / "on.otpr", tmp_path / "off.otpr"
    write_matrix(p_on, on)
    write_matrix(p_off, off)
    code, out, _ = run(
        capsys, "loss", "--pred-on", str(p_on), "--pred-off", str(p_off), "--ref", str(mid)
    )
    report = json.loads(out)
    # one-frame shift: N per head when no shifted cell collides with a target
    assert report["ot"]["total"] == pytest.approx(2 * 3, abs=1e-9)
    assert report["bce"]["total"] > report["ot"]["total"]


def test_loss_dimension_mismatch_fails(tmp_path, capsys):
    mid = tmp_path / "ref.mid"
    run(capsys, "synth", "--seed", "1", "--notes", "2", "--out", str(mid))
    p_on, p_off = tmp_path / "on.otpr", tmp_path / "off.otpr"
    write_matrix(p_on, np.zeros((10, 12)))
    write_matrix(p_off, np.zeros((11, 12)))
    code, _, err = run(
        capsys, "loss", "--pred-on", str(p_on), "--pred-off", str(p_off), "--ref", str(mid)
    )
    assert code == 2
    assert "error" in err


def test_grad_check_passes(tmp_path, capsys):
    code, out, _ = run(
        capsys, "grad-check", "--seeds", "5", "--frames", "12", "--pitches", "8"
    )
    assert code == 0
    report = json.loads(out)
    assert report["pass"] is True
    assert report["max_rel_err"] < 1e-4
    assert len(report["per_seed"]) == 5


def test_grad_check_zero_seeds_passes(capsys):
    code, out, _ = run(capsys, "grad-check", "--seeds", "0")
    assert code == 0
    report = json.loads(out)
    assert report["pass"] is True
    assert report["per_seed"] == []
    assert report["max_rel_err"] == 0.0


def test_grad_check_one_by_one_grid(capsys):
    # single cell: loss is linear + quadratic in one variable, fd is exact
    code, out, _ = run(
        capsys, "grad-check", "--seeds", "4", "--frames", "1", "--pitches", "1"
    )
    assert code == 0
    assert json.loads(out)["max_rel_err"] < 1e-9


def test_mask_csv_symmetric(tmp_path, capsys):
    out_path = tmp_path / "mask.csv"
    code, _, _ = run(
        capsys, "mask", "--bins", "64", "--bpo", "48", "--format", "csv",
        "--out", str(out_path),
    )
    assert code == 0
    mat = np.loadtxt(out_path, delimiter=",")
    assert mat.shape == (64, 64)
    np.testing.assert_array_equal(mat, mat.T)
    assert mat[0, 48] == 0.0


def test_mask_otpr_format(tmp_path, capsys):
    out_path = tmp_path / "mask.otpr"
    run(capsys, "mask", "--bins", "32", "--format", "otpr", "--out", str(out_path))
    mat = read_matrix(out_path)
    assert mat.shape == (32, 32)


def test_optimize_writes_artifacts_and_converges(tmp_path, capsys):
    outdir = tmp_path / "demo"
    code, out, _ = run(
        capsys, "optimize", "--seed", "42", "--notes", "3", "--outdir", str(outdir)
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["converged"] is True
    assert summary["final_loss"] < 1e-3
    assert summary["onset_only"]["f1"] == 1.0
    assert summary["onset_offset"]["f1"] == 1.0
    for name in ("m_on.otpr", "m_off.otpr", "trace.csv", "decoded.mid", "eval.json"):
        assert (outdir / name).exists()
    m_on = read_matrix(outdir / "m_on.otpr")
    assert m_on.shape == (40, 12)
    with open(outdir / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "total_loss"]
    totals = [float(r[1]) for r in rows[1:]]
    assert totals[-1] <= totals[0]
    # decoded MIDI parses back to the same number of notes
    decoded, _, _ = parse_smf((outdir / "decoded.mid").read_bytes())
    assert len(decoded) == 3


def test_optimize_nonconvergence_exits_nonzero(tmp_path, capsys):
    outdir = tmp_path / "short"
    code, out, _ = run(
        capsys, "optimize", "--seed", "42", "--notes", "3",
        "--outdir", str(outdir), "--max-iters", "2",
    )
    assert code == 1
    assert (outdir / "trace.csv").exists()


def test_console_script_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "otroll.cli", "--help"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert "grad-check" in out.stdout


def test_threads_env_respected(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("OTROLL_THREADS", "1")
    code, out, _ = run(capsys, "grad-check", "--seeds", "3", "--frames", "8", "--pitches", "6")
    assert code == 0
    assert json.loads(out)["pass"] is True
