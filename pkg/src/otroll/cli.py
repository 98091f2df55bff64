"""Command-line front end: experiments, file I/O, and reports.

Subcommands wire the library into reproducible runs: ``grad-check``
(analytic vs finite-difference gradients), ``optimize`` (projected descent
demo with decoded MIDI and evaluation), ``loss`` (score prediction files
against a reference MIDI, with a BCE comparison), ``eval`` (note-level
P/R/F1 between two MIDI files), ``mask``, ``synth``, and ``ingest``.
Every command is deterministic given its flags.  OTROLL_THREADS caps
worker parallelism where work is distributed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bce import bce_loss, pianoroll_target
from .decode import DecodeParams, decode_notes
from .evaluate import MatchParams, match_notes
from .grid import Grid, quantize_events, synth_notes
from .harmonics import harmonic_mask
from .matrixfile import read_matrix, write_matrix
from .optimize import OptimizeConfig, run_demo
from .oracle import gradient_check
from .otloss import CostParams, total_loss
from .smf import parse_pedal_events, parse_smf, write_smf, extend_offsets_with_pedal

__all__ = ["main"]

GRAD_CHECK_THRESHOLD = 1e-4


def _worker_count() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get("OTROLL_THREADS")
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            pass
    return n


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _cost_params(args) -> CostParams:
    return CostParams(tau0=args.tau0, tau1=args.tau1, lam=args.lam)


def _add_cost_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau0", type=float, default=5.0, help="temporal cost cap in frames")
    p.add_argument("--tau1", type=float, default=1000.0, help="cross-pitch penalty")
    p.add_argument("--lam", type=float, default=1.0, help="mass-penalty weight")


def _add_grid_flags(p: argparse.ArgumentParser, frames: int = 40, pitches: int = 12) -> None:
    p.add_argument("--frames", type=int, default=frames, help="grid frame count")
    p.add_argument("--pitches", type=int, default=pitches, help="grid pitch count")
    p.add_argument("--frame-period", type=float, default=0.025, help="seconds per frame")
    p.add_argument("--lowest-pitch", type=int, default=21, help="MIDI note of pitch index 0")


def _grid(args, n_frames=None, n_pitches=None) -> Grid:
    return Grid(
        n_frames=n_frames if n_frames is not None else args.frames,
        frame_period_s=args.frame_period,
        n_pitches=n_pitches if n_pitches is not None else args.pitches,
        lowest_pitch=args.lowest_pitch,
    )


def cmd_grad_check(args) -> int:
    grid = _grid(args)
    params = _cost_params(args)
    seeds = list(range(args.seeds))

    def one(seed: int) -> dict:
        max_err, n_excluded = gradient_check(
            seed, grid, params, eps=args.eps, max_atoms=args.max_atoms
        )
        return {"seed": seed, "max_rel_err": max_err, "excluded_cells": n_excluded}

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        rows = list(pool.map(one, seeds))
    worst = max((r["max_rel_err"] for r in rows), default=0.0)
    ok = worst < GRAD_CHECK_THRESHOLD
    _emit(
        {
            "seeds": args.seeds,
            "grid": [grid.n_frames, grid.n_pitches],
            "eps": args.eps,
            "threshold": GRAD_CHECK_THRESHOLD,
            "max_rel_err": worst,
            "pass": ok,
            "per_seed": rows,
        },
        args.out,
    )
    return 0 if ok else 1


def cmd_optimize(args) -> int:
    config = OptimizeConfig(
        seed=args.seed,
        n_notes=args.notes,
        n_frames=args.frames,
        n_pitches=args.pitches,
        min_gap_frames=args.min_gap,
        params=_cost_params(args),
        step_size=args.step,
        max_iters=args.max_iters,
        loss_tolerance=args.tol,
        init=args.init,
        smear_sigma=args.sigma,
        loss=args.loss,
    )
    demo = run_demo(config)
    result = demo.result
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    write_matrix(outdir / "m_on.otpr", result.M_on)
    write_matrix(outdir / "m_off.otpr", result.M_off)
    with open(outdir / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "total_loss"])
        for i, value in enumerate(result.trace):
            writer.writerow([i, f"{value:.12g}"])

    decoded = decode_notes(result.M_on, result.M_off, demo.grid, DecodeParams())
    (outdir / "decoded.mid").write_bytes(write_smf(decoded))

    report_onset = match_notes(demo.notes, decoded, MatchParams(use_offsets=False))
    report_both = match_notes(demo.notes, decoded, MatchParams(use_offsets=True))
    summary = {
        "loss": config.loss,
        "init": config.init,
        "converged": result.converged,
        "iterations": result.iterations,
        "final_loss": result.trace[-1],
        "initial_loss": result.trace[0],
        "onset_only": report_onset.as_dict(),
        "onset_offset": report_both.as_dict(),
    }
    with open(outdir / "eval.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    _emit(summary, args.out)
    return 0 if result.converged else 1


def cmd_loss(args) -> int:
    pred_on = read_matrix(args.pred_on)
    pred_off = read_matrix(args.pred_off)
    if pred_on.shape != pred_off.shape:
        raise ValueError(
            f"prediction shapes differ: {pred_on.shape} vs {pred_off.shape}"
        )
    notes, _, warnings = parse_smf(Path(args.ref).read_bytes())
    grid = _grid(args, n_frames=pred_on.shape[0], n_pitches=pred_on.shape[1])
    params = _cost_params(args)
    tgt_on = quantize_events(notes, grid, "onset", w=args.w)
    tgt_off = quantize_events(notes, grid, "offset", w=args.w)
    on, off, total = total_loss(pred_on, pred_off, tgt_on, tgt_off, grid, params)

    roll_on = pianoroll_target(notes, grid, "onset", args.bce_event_len)
    roll_off = pianoroll_target(notes, grid, "offset", args.bce_event_len)
    bce_on, _ = bce_loss(pred_on, roll_on)
    bce_off, _ = bce_loss(pred_off, roll_off)

    _emit(
        {
            "ot": {
                "onset": {"transport": on.transport, "mass_penalty": on.mass_penalty, "total": on.total},
                "offset": {"transport": off.transport, "mass_penalty": off.mass_penalty, "total": off.total},
                "total": total,
            },
            "bce": {"onset": bce_on, "offset": bce_off, "total": bce_on + bce_off},
            "n_notes": len(notes),
            "warnings": warnings,
        },
        args.out,
    )
    return 0


def cmd_eval(args) -> int:
    ref, _, ref_warnings = parse_smf(Path(args.ref).read_bytes())
    est, _, est_warnings = parse_smf(Path(args.est).read_bytes())
    base = MatchParams(
        onset_tol_s=args.onset_tol,
        offset_min_tol_s=args.offset_min_tol,
        offset_ratio=args.offset_ratio,
    )
    onset_only = match_notes(ref, est, MatchParams(
        onset_tol_s=base.onset_tol_s,
        offset_min_tol_s=base.offset_min_tol_s,
        offset_ratio=base.offset_ratio,
        use_offsets=False,
    ))
    both = match_notes(ref, est, MatchParams(
        onset_tol_s=base.onset_tol_s,
        offset_min_tol_s=base.offset_min_tol_s,
        offset_ratio=base.offset_ratio,
        use_offsets=True,
    ))
    for name, rep in (("onset only", onset_only), ("onset+offset", both)):
        print(
            f"{name:>14}:  P {rep.precision:6.4f}  R {rep.recall:6.4f}  "
            f"F1 {rep.f1:6.4f}  ({rep.n_match}/{rep.n_ref} ref, {rep.n_est} est)",
            file=sys.stderr,
        )
    _emit(
        {
            "onset_only": onset_only.as_dict(),
            "onset_offset": both.as_dict(),
            "warnings": ref_warnings + est_warnings,
        },
        args.out,
    )
    return 0


def cmd_mask(args) -> int:
    mask = harmonic_mask(
        n_bins=args.bins,
        bins_per_octave=args.bpo,
        max_harmonic=args.max_harmonic,
        tol_cents=args.tol_cents,
    )
    if args.format == "csv":
        np.savetxt(args.out, mask.bias, delimiter=",", fmt="%.9g")
    else:
        write_matrix(args.out, mask.bias)
    return 0


def cmd_synth(args) -> int:
    grid = _grid(args)
    notes = synth_notes(args.seed, args.notes, grid, args.min_gap)
    Path(args.out).write_bytes(
        write_smf(notes, ticks_per_quarter=args.ppq, tempo_us=args.tempo_us)
    )
    return 0


def cmd_ingest(args) -> int:
    data = Path(args.input).read_bytes()
    notes, tempo, warnings = parse_smf(data)
    if args.pedal_extend:
        notes = extend_offsets_with_pedal(notes, parse_pedal_events(data))
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(["onset_s", "offset_s", "pitch", "velocity"])
        for note in notes:
            writer.writerow(
                [f"{note.onset_s:.9g}", f"{note.offset_s:.9g}", note.pitch,
                 note.velocity if note.velocity is not None else ""]
            )
    finally:
        if args.out:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otroll",
        description="Optimal-transport onset/offset loss toolkit for piano transcription.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grad-check", help="compare analytic and finite-difference gradients")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--max-atoms", type=int, default=10)
    _add_grid_flags(p, frames=16, pitches=12)
    _add_cost_flags(p)
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("optimize", help="projected gradient descent demo on synthetic notes")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--notes", type=int, default=3)
    p.add_argument("--min-gap", type=int, default=4)
    _add_grid_flags(p)
    _add_cost_flags(p)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--init", choices=["zeros", "uniform", "smeared"], default="zeros")
    p.add_argument("--sigma", type=float, default=2.0, help="smeared-init stddev in frames")
    p.add_argument("--loss", choices=["ot", "bce"], default="ot")
    p.add_argument("--outdir", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("loss", help="score prediction matrices against a reference MIDI")
    p.add_argument("--pred-on", required=True)
    p.add_argument("--pred-off", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--w", type=float, default=1.0, help="target mass per note event")
    p.add_argument("--bce-event-len", type=int, default=2)
    _add_grid_flags(p)
    _add_cost_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="note-level P/R/F1 between two MIDI files")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--onset-tol", type=float, default=0.05)
    p.add_argument("--offset-min-tol", type=float, default=0.05)
    p.add_argument("--offset-ratio", type=float, default=0.2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mask", help="emit the harmonic attention bias matrix")
    p.add_argument("--bins", type=int, default=352)
    p.add_argument("--bpo", type=int, default=48)
    p.add_argument("--max-harmonic", type=int, default=8)
    p.add_argument("--tol-cents", type=float, default=25.0)
    p.add_argument("--format", choices=["csv", "otpr"], default="csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("synth", help="write a deterministic synthetic MIDI file")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--notes", type=int, default=3)
    p.add_argument("--min-gap", type=int, default=4)
    _add_grid_flags(p)
    p.add_argument("--ppq", type=int, default=480)
    p.add_argument("--tempo-us", type=int, default=500000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse a MIDI file to note CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--pedal-extend", action="store_true",
                   help="extend offsets while the sustain pedal (CC64) is held")
    p.set_defaults(func=cmd_ingest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
