"""Objectives and robustness metrics for trained pulse sequences.

Training is framed as supervised learning: each sampled error vector is an
input whose label is perfect fidelity, the per-sample loss is 1 - F, and the
cost is the mean loss over the sample set.  Robustness of a finished sequence
is judged on a deterministic error scan: the average fidelity over an
interval (composite trapezoid quadrature), the generalization error
G = 1 - F_avg, and the robust width W(xi), the widest contiguous scan
interval around zero error whose infidelity stays at or below xi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ErrorModel, PulseSequence, sequence_propagator_batch

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class StatePrep:
    """Prepare `target` from `initial`; fidelity is |<target|U|initial>|^2."""

    initial: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        for name in ("initial", "target"):
            vec = np.asarray(getattr(self, name), dtype=complex).ravel().copy()
            if vec.size < 2:
                raise ValueError(f"StatePrep.{name} needs dimension >= 2")
            if abs(np.linalg.norm(vec) - 1.0) > _NORM_TOL:
                raise ValueError(f"StatePrep.{name} must be normalized")
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)
        if self.initial.size != self.target.size:
            raise ValueError("initial and target dimensions differ")

    @property
    def system_dim(self) -> int:
        return self.initial.size


@dataclass(frozen=True)
class GateSynth:
    """Realize the unitary `target`; fidelity is |tr(target^dag U)| / dim.

    The modulus convention makes the fidelity insensitive to the global
    phase of U.
    """

    target: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.target, dtype=complex).copy()
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("GateSynth.target must be a square matrix")
        if np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0]))) > _NORM_TOL:
            raise ValueError("GateSynth.target must be unitary")
        M.setflags(write=False)
        object.__setattr__(self, "target", M)

    @property
    def system_dim(self) -> int:
        return self.target.shape[0]


def state_fidelity(U, task: StatePrep):
    """|<target|U|initial>|^2 for one propagator or a stack of them."""
    U = np.asarray(U, dtype=complex)
    amp = np.einsum("i,...ij,j->...", np.conj(task.target), U, task.initial)
    F = np.abs(amp) ** 2
    return float(F) if F.ndim == 0 else F


def gate_fidelity(U, task: GateSynth):
    """|tr(target^dag U)| / dim for one propagator or a stack of them."""
    U = np.asarray(U, dtype=complex)
    tr = np.einsum("ij,...ij->...", np.conj(task.target), U)
    F = np.abs(tr) / task.system_dim
    return float(F) if F.ndim == 0 else F


def fidelity(U, task):
    """Dispatch to the state or gate fidelity for `task`."""
    if isinstance(task, StatePrep):
        return state_fidelity(U, task)
    if isinstance(task, GateSynth):
        return gate_fidelity(U, task)
    raise TypeError(f"unsupported task type {type(task).__name__}")


def cost(seq: PulseSequence, samples, task) -> float:
    """Mean supervised loss (label - fidelity) over a sample set."""
    if samples.size == 0:
        raise ValueError("cost needs at least one error sample")
    if task.system_dim != seq.system_dim:
        raise ValueError("task dimension does not match the sequence")
    U = sequence_propagator_batch(seq, samples.model, samples.values)
    F = fidelity(U, task)
    return float(np.mean(samples.labels - F))


# ---------------------------------------------------------------------------
# Deterministic error scans
# ---------------------------------------------------------------------------

def _scan_values(model: ErrorModel, grid: np.ndarray) -> np.ndarray:
    """Grid of scalar errors -> sample vectors moving all axes together.

    Mixed-kind models (e.g. area + detuning) have no canonical 1-D scan and
    are rejected; scan those on an explicit 2-D grid instead.
    """
    kinds = {ax.kind for ax in model.axes}
    if len(kinds) > 1:
        raise ValueError(
            "1-D scans need a single-kind error model; use fidelity_grid for "
            "mixed area/detuning errors")
    return np.repeat(grid[:, None], model.dimension, axis=1)


def fidelity_profile(seq: PulseSequence, task, lo: float, hi: float,
                     grid_size: int = 2001, model: ErrorModel | None = None):
    """Fidelity on a uniform error grid.

    Returns (grid, fidelities), both of shape (grid_size,).  `model` defaults
    to a single pulse-area error axis; multi-interval models are scanned with
    the same value in every interval (a time-independent error).
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if not hi > lo:
        raise ValueError("scan interval needs hi > lo")
    if model is None:
        model = ErrorModel.pulse_area()
    grid = np.linspace(lo, hi, grid_size)
    U = sequence_propagator_batch(seq, model, _scan_values(model, grid))
    return grid, fidelity(U, task)


def _trapezoid_mean(F: np.ndarray) -> float:
    # composite trapezoid on a uniform grid, normalized by the interval
    return float((0.5 * (F[0] + F[-1]) + F[1:-1].sum()) / (F.size - 1))


def average_fidelity(seq: PulseSequence, task, lo: float, hi: float,
                     grid_size: int = 2001,
                     model: ErrorModel | None = None) -> float:
    """Average fidelity over [lo, hi], composite trapezoid quadrature."""
    _, F = fidelity_profile(seq, task, lo, hi, grid_size, model)
    return _trapezoid_mean(F)


def generalization_error(seq: PulseSequence, task, lo: float, hi: float,
                         grid_size: int = 2001,
                         model: ErrorModel | None = None) -> float:
    """G = 1 - average fidelity over [lo, hi] (identity at the code level)."""
    return 1.0 - average_fidelity(seq, task, lo, hi, grid_size, model)


def _width_from_profile(grid: np.ndarray, F: np.ndarray, threshold: float) -> float:
    ok = (1.0 - F) <= threshold
    anchor = int(np.argmin(np.abs(grid)))
    if not ok[anchor]:
        return 0.0
    left = anchor
    while left > 0 and ok[left - 1]:
        left -= 1
    right = anchor
    while right < ok.size - 1 and ok[right + 1]:
        right += 1
    # midpoint-corrected run length: the true boundary lies within one grid
    # step beyond each end, so adding one step keeps the estimate within a
    # single step of the exact width
    step = grid[1] - grid[0]
    return float(min(grid[right] - grid[left] + step, grid[-1] - grid[0]))


def robust_width(seq: PulseSequence, task, threshold: float, lo: float,
                 hi: float, grid_size: int = 2001,
                 model: ErrorModel | None = None) -> float:
    """Width W of the contiguous region around zero error with 1 - F <= xi.

    Measured on the scan grid; 0 if the infidelity at zero error already
    exceeds the threshold.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    grid, F = fidelity_profile(seq, task, lo, hi, grid_size, model)
    return _width_from_profile(grid, F, threshold)


def total_average_fidelity(values) -> float:
    """Mean of per-group average fidelities."""
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("need at least one group average")
    if np.any(values < 0.0) or np.any(values > 1.0 + 1e-12):
        raise ValueError("average fidelities must lie in [0, 1]")
    return float(np.mean(values))


@dataclass(frozen=True)
class RobustnessReport:
    """One deterministic robustness scan of a sequence.

    Carries the scan definition (interval, grid size, quadrature rule, width
    threshold) together with the derived metrics so results are
    self-describing.
    """

    interval: tuple
    grid_size: int
    width_threshold: float
    average_fidelity: float
    generalization_error: float
    robust_width: float
    grid: np.ndarray
    fidelities: np.ndarray
    quadrature: str = "trapezoid"

    def to_dict(self, include_profile: bool = False) -> dict:
        out = {
            "interval": [float(self.interval[0]), float(self.interval[1])],
            "grid_size": int(self.grid_size),
            "quadrature": self.quadrature,
            "width_threshold": float(self.width_threshold),
            "average_fidelity": float(self.average_fidelity),
            "generalization_error": float(self.generalization_error),
            "robust_width": float(self.robust_width),
        }
        if include_profile:
            out["grid"] = [float(x) for x in self.grid]
            out["fidelities"] = [float(x) for x in self.fidelities]
        return out


def robustness_report(seq: PulseSequence, task, lo: float, hi: float,
                      grid_size: int = 2001, width_threshold: float = 1e-4,
                      model: ErrorModel | None = None) -> RobustnessReport:
    """Scan once, derive all robustness metrics from the same profile."""
    grid, F = fidelity_profile(seq, task, lo, hi, grid_size, model)
    favg = _trapezoid_mean(F)
    return RobustnessReport(
        interval=(float(lo), float(hi)),
        grid_size=int(grid_size),
        width_threshold=float(width_threshold),
        average_fidelity=favg,
        generalization_error=1.0 - favg,
        robust_width=_width_from_profile(grid, F, width_threshold),
        grid=grid,
        fidelities=np.asarray(F),
    )


# ---------------------------------------------------------------------------
# Two-dimensional scans (pulse-area x detuning errors)
# ---------------------------------------------------------------------------

def fidelity_grid(seq: PulseSequence, task, area_grid, detuning_grid):
    """Fidelity on the outer grid of pulse-area x detuning errors.

    Returns an array of shape (len(area_grid), len(detuning_grid)).
    """
    area_grid = np.asarray(area_grid, dtype=float)
    detuning_grid = np.asarray(detuning_grid, dtype=float)
    EA, ED = np.meshgrid(area_grid, detuning_grid, indexing="ij")
    values = np.column_stack([EA.ravel(), ED.ravel()])
    U = sequence_propagator_batch(seq, ErrorModel.area_and_detuning(), values)
    return np.asarray(fidelity(U, task)).reshape(EA.shape)


def grid_average_fidelity(F: np.ndarray) -> float:
    """Mean fidelity over a uniform 2-D grid, product-trapezoid weights."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] < 2 or F.shape[1] < 2:
        raise ValueError("need a 2-D fidelity grid with >= 2 points per axis")
    wa = np.ones(F.shape[0])
    wa[0] = wa[-1] = 0.5
    wd = np.ones(F.shape[1])
    wd[0] = wd[-1] = 0.5
    return float(wa @ F @ wd / (wa.sum() * wd.sum()))
