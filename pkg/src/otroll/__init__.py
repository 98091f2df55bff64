"""Optimal-transport onset/offset loss toolkit for piano transcription.

Predicted activations are treated as mass transported to ground-truth note
events over a time-pitch grid: capped temporal cost within a pitch,
prohibitive cost across pitches, and an unbalanced-OT mass penalty, all
with analytic gradients.  The package also ships the BCE baseline, exact
verification oracles, a peak-picking note decoder, a tolerance-based
transcription evaluator, Standard MIDI File ingestion, and the harmonic
attention mask, wired together by the ``otroll`` CLI.
"""

from .bce import bce_loss, pianoroll_target
from .decode import DecodeParams, decode_notes, pick_peaks
from .evaluate import EvalReport, MatchParams, match_notes
from .grid import (
    Grid,
    NoteEvent,
    NoteList,
    TargetDistribution,
    quantize_events,
    synth_notes,
    target_indicator,
)
from .harmonics import HarmonicMask, harmonic_mask
from .matrixfile import read_matrix, write_matrix
from .optimize import OptimizeConfig, initial_mass, run_bce_descent, run_demo, run_ot_descent
from .oracle import (
    AssignmentProblem,
    fd_gradient,
    hungarian_assignment,
    ot_distance_bruteforce,
)
from .otloss import (
    CostParams,
    LossBreakdown,
    SourceAssignment,
    assign_sources,
    mass_penalty,
    ot_distance,
    ot_loss,
    total_loss,
    transport_cost,
)
from .smf import (
    MidiFormatError,
    TempoMap,
    extend_offsets_with_pedal,
    parse_pedal_events,
    parse_smf,
    write_smf,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentProblem",
    "CostParams",
    "DecodeParams",
    "EvalReport",
    "Grid",
    "HarmonicMask",
    "LossBreakdown",
    "MatchParams",
    "MidiFormatError",
    "NoteEvent",
    "NoteList",
    "OptimizeConfig",
    "SourceAssignment",
    "TargetDistribution",
    "TempoMap",
    "assign_sources",
    "bce_loss",
    "decode_notes",
    "extend_offsets_with_pedal",
    "fd_gradient",
    "harmonic_mask",
    "hungarian_assignment",
    "initial_mass",
    "mass_penalty",
    "match_notes",
    "ot_distance",
    "ot_distance_bruteforce",
    "ot_loss",
    "parse_pedal_events",
    "parse_smf",
    "pianoroll_target",
    "pick_peaks",
    "quantize_events",
    "read_matrix",
    "run_bce_descent",
    "run_demo",
    "run_ot_descent",
    "synth_notes",
    "target_indicator",
    "total_loss",
    "transport_cost",
    "write_matrix",
    "write_smf",
    "__version__",
]
