"""Desk-scale optimization demos: projected gradient descent directly on M.

Instead of training a network, these routines descend on the prediction
matrices themselves (M <- clip(M - step * grad, 0, 1)), which exercises
exactly the learning signal the loss provides to any differentiable
predictor.  The step is halved whenever a step would increase the loss, so
the recorded trace is monotone non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from .bce import bce_loss, pianoroll_target
from .grid import Grid, NoteList, TargetDistribution, quantize_events, synth_notes
from .otloss import CostParams, assign_sources, ot_loss

__all__ = ["OptimizeConfig", "DescentResult", "initial_mass", "run_ot_descent", "run_bce_descent", "run_demo"]

_MIN_STEP = 1e-14


@dataclass(frozen=True)
class OptimizeConfig:
    seed: int = 42
    n_notes: int = 3
    n_frames: int = 40
    n_pitches: int = 12
    min_gap_frames: int = 4
    params: CostParams = field(default_factory=CostParams)
    step_size: float = 0.05
    max_iters: int = 5000
    loss_tolerance: float = 1e-3
    init: str = "zeros"  # zeros | uniform | smeared
    smear_sigma: float = 2.0
    loss: str = "ot"  # ot | bce
    bce_event_len: int = 2

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.init not in ("zeros", "uniform", "smeared"):
            raise ValueError(f"init must be zeros|uniform|smeared, got {self.init!r}")
        if self.loss not in ("ot", "bce"):
            raise ValueError(f"loss must be ot|bce, got {self.loss!r}")

    def grid(self) -> Grid:
        return Grid(n_frames=self.n_frames, n_pitches=self.n_pitches)


@dataclass
class DescentResult:
    M_on: np.ndarray
    M_off: np.ndarray
    trace: List[float]
    converged: bool
    iterations: int
    final_step: float


def initial_mass(
    init: str, grid: Grid, targets: TargetDistribution, sigma: float = 2.0
) -> np.ndarray:
    """Starting prediction matrix: zeros, flat 0.5, or Gaussians at targets."""
    if init == "zeros":
        return np.zeros(grid.shape)
    if init == "uniform":
        return np.full(grid.shape, 0.5)
    if init == "smeared":
        M = np.zeros(grid.shape)
        tt = np.arange(grid.n_frames, dtype=np.float64)
        for frame, pitch, _ in targets.atoms():
            M[:, pitch] += np.exp(-((tt - frame) ** 2) / (2.0 * sigma * sigma))
        return np.clip(M, 0.0, 1.0)
    raise ValueError(f"unknown init {init!r}")


EvalFn = Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray, np.ndarray]]


def _descend(
    M_on: np.ndarray,
    M_off: np.ndarray,
    evaluate: EvalFn,
    step: float,
    max_iters: int,
    tol: float,
) -> DescentResult:
    total, g_on, g_off = evaluate(M_on, M_off)
    trace = [total]
    iterations = 0
    while iterations < max_iters and total >= tol:
        while True:
            new_on = np.clip(M_on - step * g_on, 0.0, 1.0)
            new_off = np.clip(M_off - step * g_off, 0.0, 1.0)
            new_total, new_g_on, new_g_off = evaluate(new_on, new_off)
            if new_total <= total or step <= _MIN_STEP:
                break
            step *= 0.5
        if new_total >= total and step <= _MIN_STEP:
            break  # stalled: no step size makes progress
        M_on, M_off = new_on, new_off
        total, g_on, g_off = new_total, new_g_on, new_g_off
        trace.append(total)
        iterations += 1
    return DescentResult(
        M_on=M_on,
        M_off=M_off,
        trace=trace,
        converged=total < tol,
        iterations=iterations,
        final_step=step,
    )


def run_ot_descent(
    M_on0: np.ndarray,
    M_off0: np.ndarray,
    tgt_on: TargetDistribution,
    tgt_off: TargetDistribution,
    grid: Grid,
    params: CostParams,
    step: float = 0.05,
    max_iters: int = 5000,
    tol: float = 1e-3,
) -> DescentResult:
    asg_on = assign_sources(tgt_on, grid, params)
    asg_off = assign_sources(tgt_off, grid, params)

    def evaluate(m_on, m_off):
        on = ot_loss(m_on, tgt_on, grid, params, asg_on)
        off = ot_loss(m_off, tgt_off, grid, params, asg_off)
        return on.total + off.total, on.gradient, off.gradient

    return _descend(M_on0, M_off0, evaluate, step, max_iters, tol)


def run_bce_descent(
    M_on0: np.ndarray,
    M_off0: np.ndarray,
    roll_on: np.ndarray,
    roll_off: np.ndarray,
    step: float = 0.05,
    max_iters: int = 5000,
    tol: float = 1e-3,
) -> DescentResult:
    def evaluate(m_on, m_off):
        t_on, g_on = bce_loss(m_on, roll_on)
        t_off, g_off = bce_loss(m_off, roll_off)
        return t_on + t_off, g_on, g_off

    return _descend(M_on0, M_off0, evaluate, step, max_iters, tol)


@dataclass
class DemoOutput:
    config: OptimizeConfig
    grid: Grid
    notes: NoteList
    tgt_on: TargetDistribution
    tgt_off: TargetDistribution
    result: DescentResult


def run_demo(config: OptimizeConfig) -> DemoOutput:
    """Synthesize ground truth, build targets, and run the configured descent."""
    grid = config.grid()
    notes = synth_notes(config.seed, config.n_notes, grid, config.min_gap_frames)
    tgt_on = quantize_events(notes, grid, "onset")
    tgt_off = quantize_events(notes, grid, "offset")
    M_on0 = initial_mass(config.init, grid, tgt_on, config.smear_sigma)
    M_off0 = initial_mass(config.init, grid, tgt_off, config.smear_sigma)
    if config.loss == "ot":
        result = run_ot_descent(
            M_on0, M_off0, tgt_on, tgt_off, grid, config.params,
            config.step_size, config.max_iters, config.loss_tolerance,
        )
    else:
        roll_on = pianoroll_target(notes, grid, "onset", config.bce_event_len)
        roll_off = pianoroll_target(notes, grid, "offset", config.bce_event_len)
        result = run_bce_descent(
            M_on0, M_off0, roll_on, roll_off,
            config.step_size, config.max_iters, config.loss_tolerance,
        )
    return DemoOutput(
        config=config, grid=grid, notes=notes,
        tgt_on=tgt_on, tgt_off=tgt_off, result=result,
    )
