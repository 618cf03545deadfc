"""Builders for the standard control problems.

Each builder packages a target (state or gate), an untrained template
sequence, an error model, and an optional sampling distribution into one
ControlProblem, ready for the training loops.  Pulse strength is given as
the conventional area of a resonant pulse (the Bloch rotation angle
rabi * duration * 2), so area pi with one pulse is a bare pi pulse and
inversion needs a total nominal area of at least pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    ErrorModel,
    Pulse,
    Pulse3,
    PulseSequence,
    canonical_phase,
    sequence_propagator,
)
from .metrics import GateSynth, StatePrep, gate_fidelity
from .sampling import SampleFactory, draw

KET0 = np.array([1.0, 0.0])
KET1 = np.array([0.0, 1.0])
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def target_superposition(phi: float, varphi: float = 0.0) -> np.ndarray:
    """cos(phi)|0> + e^{i varphi} sin(phi)|1>."""
    return np.array([np.cos(phi), np.exp(1j * varphi) * np.sin(phi)])


def target_gate(phi: float, varphi: float, big_phi: float) -> np.ndarray:
    """The three-angle single-qubit gate family.

    Rows/columns follow the |0>, |1> basis; the diagonal carries
    e^{+-i big_phi} cos(phi) and the off-diagonal -+ e^{-+i (varphi +
    big_phi)} sin(phi).  Unitary for all real angles.
    """
    c, s = np.cos(phi), np.sin(phi)
    return np.array([
        [np.exp(1j * big_phi) * c, -np.exp(-1j * (varphi + big_phi)) * s],
        [np.exp(1j * (varphi + big_phi)) * s, np.exp(-1j * big_phi) * c],
    ])


def apply_phase_shift(seq: PulseSequence, shift: float) -> PulseSequence:
    """Shift every trainable phase by the same angle.

    The shifted sequence's propagator is a diagonal-phase conjugation of
    the original, so every transition probability |U_ij|^2 is unchanged
    at every error value; only relative phases between amplitudes move.
    """
    return seq.with_phases(canonical_phase(seq.phases + float(shift)))


@dataclass(frozen=True)
class ControlProblem:
    """A target, a template sequence, and the error statistics to train on."""

    task: object
    template: PulseSequence
    model: ErrorModel
    sampling: object = None
    name: str = ""

    def samples(self, count: int, seed=None):
        """Draw a training set from the problem's sampling spec."""
        if self.sampling is None:
            raise ValueError(f"problem {self.name!r} has no sampling spec")
        return draw(self.sampling, count, self.model.dimension, seed,
                    model=self.model)

    def sample_factory(self, count: int) -> SampleFactory:
        """Per-restart fresh-sample drawer for the same spec."""
        if self.sampling is None:
            raise ValueError(f"problem {self.name!r} has no sampling spec")
        return SampleFactory(spec=self.sampling, count=count, model=self.model)


def _uniform_template(n_pulses: int, area: float, rabi: float) -> PulseSequence:
    if n_pulses < 1:
        raise ValueError("need at least one pulse")
    if rabi < 0 or area < 0:
        raise ValueError("area and rabi must be non-negative")
    if rabi == 0.0:
        if area != 0.0:
            raise ValueError("a zero-rabi pulse cannot carry pulse area")
        duration = np.pi / 2
    else:
        if area == 0.0:
            raise ValueError("zero area needs rabi = 0")
        # conventional area = 2 * rabi * duration
        duration = area / (2.0 * rabi)
    return PulseSequence(tuple(
        Pulse(phase=0.0, rabi=rabi, duration=duration)
        for _ in range(n_pulses)))


def build_population_inversion(n_pulses: int, area: float = np.pi / 2,
                               rabi: float = 1.0, sampling=None,
                               model: ErrorModel | None = None) -> ControlProblem:
    """Invert |0> to |1> with N identical-area pulses.

    `model` defaults to a single pulse-area error axis; pass e.g. the
    area + detuning model for multi-error training.
    """
    if n_pulses * area < np.pi - 1e-12:
        raise ValueError(
            f"total nominal area {n_pulses * area:.4f} cannot reach inversion "
            "(needs at least pi)")
    return ControlProblem(
        task=StatePrep(initial=KET0, target=KET1),
        template=_uniform_template(n_pulses, area, rabi),
        model=model or ErrorModel.pulse_area(),
        sampling=sampling,
        name="population_inversion")


def build_superposition(phi: float, varphi: float = 0.0, n_pulses: int = 7,
                        area: float = np.pi / 4, rabi: float = 1.0,
                        sampling=None) -> ControlProblem:
    """Prepare the (phi, varphi) superposition from |0>."""
    return ControlProblem(
        task=StatePrep(initial=KET0, target=target_superposition(phi, varphi)),
        template=_uniform_template(n_pulses, area, rabi),
        model=ErrorModel.pulse_area(),
        sampling=sampling,
        name="superposition")


def build_gate_operator_based(target, n_pulses: int = 9,
                              area: float = np.pi / 4, rabi: float = 1.0,
                              sampling=None) -> ControlProblem:
    """Synthesize a 2x2 target unitary by direct gate-fidelity training."""
    return ControlProblem(
        task=GateSynth(target=target),
        template=_uniform_template(n_pulses, area, rabi),
        model=ErrorModel.pulse_area(),
        sampling=sampling,
        name="gate_operator_based")


@dataclass(frozen=True)
class StateBasedGatePlan:
    """Gate synthesis via superposition training plus a global phase shift.

    Train `problem` (state preparation of the (phi, varphi) superposition),
    then shift every learned phase by `phase_shift`.  The shift tunes the
    relative phase between the gate's columns without touching any
    transition probability; `verify` reports how close the shifted
    sequence is to the three-angle target gate.
    """

    problem: ControlProblem
    phase_shift: float
    target_gate: np.ndarray

    def shifted(self, seq: PulseSequence) -> PulseSequence:
        return apply_phase_shift(seq, self.phase_shift)

    def verify(self, seq: PulseSequence, error=None) -> float:
        """Gate fidelity of the shifted sequence against the target gate."""
        U = sequence_propagator(self.shifted(seq), error)
        return gate_fidelity(U, GateSynth(target=self.target_gate))


def build_gate_state_based(phi: float, varphi: float, big_phi: float,
                           n_pulses: int = 7, area: float = np.pi / 4,
                           rabi: float = 1.0,
                           sampling=None) -> StateBasedGatePlan:
    """State-based gate synthesis: superposition training + phase shift."""
    problem = ControlProblem(
        task=StatePrep(initial=KET0, target=target_superposition(phi, varphi)),
        template=_uniform_template(n_pulses, area, rabi),
        model=ErrorModel.pulse_area(),
        sampling=sampling,
        name="gate_state_based")
    return StateBasedGatePlan(problem=problem, phase_shift=float(big_phi),
                              target_gate=target_gate(phi, varphi, big_phi))


def build_time_varying_inversion(n_pulses: int, area: float = np.pi / 2,
                                 rabi: float = 1.0,
                                 sampling=None) -> ControlProblem:
    """Population inversion with an independent area error per pulse."""
    if n_pulses * area < np.pi - 1e-12:
        raise ValueError(
            f"total nominal area {n_pulses * area:.4f} cannot reach inversion "
            "(needs at least pi)")
    return ControlProblem(
        task=StatePrep(initial=KET0, target=KET1),
        template=_uniform_template(n_pulses, area, rabi),
        model=ErrorModel.time_varying(n_pulses),
        sampling=sampling,
        name="time_varying_inversion")


def build_detuning_inversion(n_pulses: int, rabi: float = 1.0,
                             sampling=None) -> ControlProblem:
    """Population inversion with detunings as the trainable parameters.

    The template starts resonant (detuning 0, phases 0) with the
    compensated duration pi/(2 rabi); detuning training re-derives each
    duration from its detuning at every step.
    """
    if rabi <= 0:
        raise ValueError("detuning training needs a positive rabi")
    template = PulseSequence(tuple(
        Pulse(phase=0.0, rabi=rabi, detuning=0.0,
              duration=np.pi / (2.0 * rabi))
        for _ in range(n_pulses)))
    return ControlProblem(
        task=StatePrep(initial=KET0, target=KET1),
        template=template,
        model=ErrorModel.pulse_area(),
        sampling=sampling,
        name="detuning_inversion")


def build_three_level_inversion(n_pulses: int, rabi: float = 1.0,
                                duration: float | None = None,
                                sampling=None) -> ControlProblem:
    """Transfer |1> to |3> through the ladder's middle state.

    The default duration pi/(sqrt(2) rabi) makes a single zero-phase pulse
    a complete transfer at zero error.
    """
    if rabi <= 0:
        raise ValueError("three-level inversion needs a positive rabi")
    if duration is None:
        duration = np.pi / (np.sqrt(2.0) * rabi)
    template = PulseSequence(tuple(
        Pulse3(phase_a=0.0, phase_b=0.0, rabi_a=rabi, rabi_b=rabi,
               duration=duration)
        for _ in range(n_pulses)))
    return ControlProblem(
        task=StatePrep(initial=np.array([1.0, 0.0, 0.0]),
                       target=np.array([0.0, 0.0, 1.0])),
        template=template,
        model=ErrorModel.pulse_area(),
        sampling=sampling,
        name="three_level_inversion")
