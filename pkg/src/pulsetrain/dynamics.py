"""Pulse sequences, systematic-error models, and exact propagators.

This module holds the physical layer: constant-amplitude pulses described by
(phase, Rabi frequency, detuning, duration), sequences of such pulses, and the
systematic errors that distort them.  Propagation is exact: every pulse
Hamiltonian is piecewise constant, so the time-evolution operator is a matrix
exponential evaluated by spectral decomposition rather than by any truncated
series.

Conventions
-----------
The two-level drive Hamiltonian is written in the symmetric form

    H = (Delta + Omega*eps_delta) * sigma_z
        + Omega*(1 + eps_area) * (cos(theta) sigma_x + sin(theta) sigma_y)

so a resonant pulse rotates the Bloch vector at angular rate 2*Omega.  The
generator angle A = Omega*T used by :func:`resonant_propagator` is therefore
half the conventional rotation-angle pulse area: A = pi/2 fully inverts the
populations, which in laboratory language is a "pi pulse" of duration
T = pi/(2*Omega).  Helper constructors that speak the laboratory convention
live in :mod:`pulsetrain.tasks`.

Three-level systems are driven on the 1-2 and 2-3 transitions of a ladder,

    H = Omega_a*(1+eps_area)*e^{-i theta_a} |1><2|
      + Omega_b*(1+eps_area)*e^{-i theta_b} |2><3|  + h.c.

with both tones sharing the pulse-area error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

# Error component kinds.  "pulse_area" scales every Rabi frequency by
# (1 + eps), "detuning" adds eps*Omega to the z coefficient of every pulse,
# and "time_varying_area" scales the Rabi frequency of one pulse interval.
PULSE_AREA = "pulse_area"
DETUNING = "detuning"
TIME_VARYING_AREA = "time_varying_area"
_ERROR_KINDS = (PULSE_AREA, DETUNING, TIME_VARYING_AREA)

_HERMITIAN_TOL = 1e-12


def canonical_phase(theta):
    """Wrap an angle (or array of angles) into the interval (-pi, pi]."""
    th = np.remainder(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    th = np.where(th == -np.pi, np.pi, th)
    if th.ndim == 0:
        return float(th)
    return th


@dataclass(frozen=True)
class Pulse:
    """One constant two-level pulse.

    Parameters
    ----------
    phase : float
        Drive phase theta, stored canonically in (-pi, pi].
    rabi : float
        Rabi frequency Omega >= 0 in the symmetric-Hamiltonian convention
        (rotation rate 2*Omega).
    detuning : float
        Trained detuning Delta of the sigma_z term (0 for resonant pulses).
    duration : float
        Pulse duration T > 0.  The generator angle is A = rabi*duration.
    """

    phase: float
    rabi: float = 1.0
    detuning: float = 0.0
    duration: float = math.pi / 2

    def __post_init__(self):
        for name in ("phase", "rabi", "detuning", "duration"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Pulse.{name} must be finite")
        if self.rabi < 0:
            raise ValueError("Pulse.rabi must be non-negative")
        if self.duration <= 0:
            raise ValueError("Pulse.duration must be positive")
        object.__setattr__(self, "phase", canonical_phase(self.phase))

    @property
    def area(self) -> float:
        """Generator angle A = Omega*T (pi/2 for a full population flip)."""
        return self.rabi * self.duration


@dataclass(frozen=True)
class Pulse3:
    """One constant pulse on a three-level ladder (tones on 1-2 and 2-3)."""

    phase_a: float
    phase_b: float
    rabi_a: float = 1.0
    rabi_b: float = 1.0
    duration: float = math.pi / math.sqrt(2.0)

    def __post_init__(self):
        for name in ("phase_a", "phase_b", "rabi_a", "rabi_b", "duration"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Pulse3.{name} must be finite")
        if self.rabi_a < 0 or self.rabi_b < 0:
            raise ValueError("Pulse3 Rabi frequencies must be non-negative")
        if self.duration <= 0:
            raise ValueError("Pulse3.duration must be positive")
        object.__setattr__(self, "phase_a", canonical_phase(self.phase_a))
        object.__setattr__(self, "phase_b", canonical_phase(self.phase_b))


@dataclass(frozen=True)
class PulseSequence:
    """An ordered, homogeneous tuple of pulses; pulse 1 acts first.

    The total propagator is U = U_N ... U_2 U_1 (right-to-left product).
    Sequences are immutable; use :meth:`with_phases` or
    :meth:`with_detunings` to derive modified copies.
    """

    pulses: tuple

    def __post_init__(self):
        pulses = tuple(self.pulses)
        if not pulses:
            raise ValueError("PulseSequence needs at least one pulse")
        kinds = {type(p) for p in pulses}
        if kinds == {Pulse}:
            dim = 2
        elif kinds == {Pulse3}:
            dim = 3
        else:
            raise ValueError("PulseSequence pulses must be all Pulse or all Pulse3")
        object.__setattr__(self, "pulses", pulses)
        object.__setattr__(self, "_dim", dim)

    @property
    def system_dim(self) -> int:
        return self._dim

    @property
    def n_pulses(self) -> int:
        return len(self.pulses)

    @property
    def n_angles(self) -> int:
        """Number of trainable phases (N for two-level, 2N for the ladder)."""
        return len(self.pulses) * (1 if self._dim == 2 else 2)

    @property
    def phases(self) -> np.ndarray:
        """Flat phase vector; three-level pulses contribute (theta_a, theta_b)."""
        if self._dim == 2:
            return np.array([p.phase for p in self.pulses])
        return np.array([v for p in self.pulses for v in (p.phase_a, p.phase_b)])

    @property
    def rabis(self) -> np.ndarray:
        if self._dim == 2:
            return np.array([p.rabi for p in self.pulses])
        raise ValueError("use rabis_a/rabis_b for three-level sequences")

    @property
    def rabis_a(self) -> np.ndarray:
        return np.array([p.rabi_a for p in self.pulses])

    @property
    def rabis_b(self) -> np.ndarray:
        return np.array([p.rabi_b for p in self.pulses])

    @property
    def detunings(self) -> np.ndarray:
        if self._dim != 2:
            raise ValueError("three-level sequences carry no detuning parameters")
        return np.array([p.detuning for p in self.pulses])

    @property
    def durations(self) -> np.ndarray:
        return np.array([p.duration for p in self.pulses])

    def with_phases(self, phases) -> "PulseSequence":
        """Return a copy with the flat phase vector replaced."""
        phases = np.asarray(phases, dtype=float).ravel()
        if phases.size != self.n_angles:
            raise ValueError(
                f"expected {self.n_angles} phases, got {phases.size}")
        if self._dim == 2:
            new = tuple(
                Pulse(phase=float(th), rabi=p.rabi, detuning=p.detuning,
                      duration=p.duration)
                for th, p in zip(phases, self.pulses))
        else:
            pairs = phases.reshape(-1, 2)
            new = tuple(
                Pulse3(phase_a=float(a), phase_b=float(b), rabi_a=p.rabi_a,
                       rabi_b=p.rabi_b, duration=p.duration)
                for (a, b), p in zip(pairs, self.pulses))
        return PulseSequence(new)

    def with_detunings(self, detunings, durations=None) -> "PulseSequence":
        """Return a copy with detunings (and optionally durations) replaced."""
        if self._dim != 2:
            raise ValueError("three-level sequences carry no detuning parameters")
        detunings = np.asarray(detunings, dtype=float).ravel()
        if detunings.size != self.n_pulses:
            raise ValueError(
                f"expected {self.n_pulses} detunings, got {detunings.size}")
        if durations is None:
            durations = self.durations
        durations = np.asarray(durations, dtype=float).ravel()
        new = tuple(
            Pulse(phase=p.phase, rabi=p.rabi, detuning=float(d),
                  duration=float(t))
            for p, d, t in zip(self.pulses, detunings, durations))
        return PulseSequence(new)

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        # (a + b) means "a acts first, then b".
        if not isinstance(other, PulseSequence):
            return NotImplemented
        return PulseSequence(self.pulses + other.pulses)

    def to_dict(self) -> dict:
        """JSON-ready dump of every pulse parameter."""
        if self._dim == 2:
            return {
                "system_dim": 2,
                "phases": [p.phase for p in self.pulses],
                "rabis": [p.rabi for p in self.pulses],
                "detunings": [p.detuning for p in self.pulses],
                "durations": [p.duration for p in self.pulses],
            }
        return {
            "system_dim": 3,
            "phases_a": [p.phase_a for p in self.pulses],
            "phases_b": [p.phase_b for p in self.pulses],
            "rabis_a": [p.rabi_a for p in self.pulses],
            "rabis_b": [p.rabi_b for p in self.pulses],
            "durations": [p.duration for p in self.pulses],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSequence":
        """Inverse of :meth:`to_dict`."""
        dim = data.get("system_dim")
        if dim == 2:
            pulses = tuple(
                Pulse(phase=th, rabi=r, detuning=d, duration=t)
                for th, r, d, t in zip(data["phases"], data["rabis"],
                                       data["detunings"], data["durations"]))
        elif dim == 3:
            pulses = tuple(
                Pulse3(phase_a=a, phase_b=b, rabi_a=ra, rabi_b=rb, duration=t)
                for a, b, ra, rb, t in zip(data["phases_a"], data["phases_b"],
                                           data["rabis_a"], data["rabis_b"],
                                           data["durations"]))
        else:
            raise ValueError(f"unsupported system_dim {dim!r}")
        return cls(pulses)


@dataclass(frozen=True)
class ErrorAxis:
    """One systematic-error component: a kind tag plus, for time-varying
    pulse-area errors, the 0-based pulse interval it distorts."""

    kind: str
    interval: int | None = None

    def __post_init__(self):
        if self.kind not in _ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.kind!r}")
        if self.kind == TIME_VARYING_AREA:
            if self.interval is None or self.interval < 0:
                raise ValueError(
                    "time_varying_area axes need a non-negative interval index")
        elif self.interval is not None:
            raise ValueError(f"{self.kind} axes carry no interval index")


@dataclass(frozen=True)
class ErrorModel:
    """The ordered tuple of error axes a sample vector refers to."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(self.axes)
        if not axes:
            raise ValueError("ErrorModel needs at least one axis")
        for ax in axes:
            if not isinstance(ax, ErrorAxis):
                raise ValueError("ErrorModel axes must be ErrorAxis instances")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def pulse_area(cls) -> "ErrorModel":
        return cls((ErrorAxis(PULSE_AREA),))

    @classmethod
    def detuning(cls) -> "ErrorModel":
        return cls((ErrorAxis(DETUNING),))

    @classmethod
    def area_and_detuning(cls) -> "ErrorModel":
        return cls((ErrorAxis(PULSE_AREA), ErrorAxis(DETUNING)))

    @classmethod
    def time_varying(cls, n_intervals: int) -> "ErrorModel":
        if n_intervals < 1:
            raise ValueError("need at least one interval")
        return cls(tuple(ErrorAxis(TIME_VARYING_AREA, l)
                         for l in range(n_intervals)))

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def has_detuning(self) -> bool:
        return any(ax.kind == DETUNING for ax in self.axes)

    def resolve(self, values, n_pulses: int):
        """Resolve sample vectors to per-pulse error coefficients.

        Parameters
        ----------
        values : array_like, shape (..., L)
            Sample vectors over the model's L axes.
        n_pulses : int
            Number of pulses the errors apply to.

        Returns
        -------
        eps_area : ndarray, shape (..., n_pulses)
            Fractional Rabi-frequency error per pulse.
        eps_detuning : ndarray, shape (...,)
            Detuning error in units of each pulse's Rabi frequency.
        """
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.dimension:
            raise ValueError(
                f"sample dimension {values.shape[-1]} does not match the "
                f"{self.dimension}-axis error model")
        lead = values.shape[:-1]
        eps_area = np.zeros(lead + (n_pulses,))
        eps_det = np.zeros(lead)
        for j, ax in enumerate(self.axes):
            if ax.kind == PULSE_AREA:
                eps_area += values[..., j, None]
            elif ax.kind == DETUNING:
                eps_det = eps_det + values[..., j]
            else:
                if ax.interval >= n_pulses:
                    raise ValueError(
                        f"error interval {ax.interval} out of range for "
                        f"{n_pulses} pulses")
                eps_area[..., ax.interval] += values[..., j]
        return eps_area, eps_det


@dataclass(frozen=True)
class ErrorSample:
    """One realization of the systematic errors: a model plus a value vector."""

    model: ErrorModel
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel().copy()
        if values.size != self.model.dimension:
            raise ValueError(
                f"expected {self.model.dimension} components, got {values.size}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def pulse_area(cls, eps: float) -> "ErrorSample":
        return cls(ErrorModel.pulse_area(), np.array([eps]))

    @classmethod
    def detuning(cls, eps: float) -> "ErrorSample":
        return cls(ErrorModel.detuning(), np.array([eps]))

    @classmethod
    def area_and_detuning(cls, eps_area: float, eps_detuning: float) -> "ErrorSample":
        return cls(ErrorModel.area_and_detuning(),
                   np.array([eps_area, eps_detuning]))

    @classmethod
    def time_varying(cls, values) -> "ErrorSample":
        values = np.asarray(values, dtype=float).ravel()
        return cls(ErrorModel.time_varying(values.size), values)

    def resolve_pulse(self, pulse_index: int):
        """Scalar (eps_area, eps_detuning) seen by one pulse."""
        ea = 0.0
        ed = 0.0
        for j, ax in enumerate(self.model.axes):
            if ax.kind == PULSE_AREA:
                ea += self.values[j]
            elif ax.kind == DETUNING:
                ed += self.values[j]
            elif ax.interval == pulse_index:
                ea += self.values[j]
        return ea, ed


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

def pulse_hamiltonian(pulse: Pulse, error: ErrorSample | None = None,
                      pulse_index: int = 0) -> np.ndarray:
    """Two-level Hamiltonian of one pulse under a systematic error.

    Returns (Delta + Omega*eps_delta)*sigma_z
    + Omega*(1+eps_area)*(cos(theta)*sigma_x + sin(theta)*sigma_y).
    A detuning error rides additively on any trained detuning.
    """
    ea, ed = (0.0, 0.0) if error is None else error.resolve_pulse(pulse_index)
    drive = pulse.rabi * (1.0 + ea)
    dz = pulse.detuning + pulse.rabi * ed
    return (dz * SIGMA_Z
            + drive * (math.cos(pulse.phase) * SIGMA_X
                       + math.sin(pulse.phase) * SIGMA_Y))


def three_level_hamiltonian(pulse: Pulse3, error: ErrorSample | None = None,
                            pulse_index: int = 0) -> np.ndarray:
    """Ladder Hamiltonian of one two-tone pulse under a pulse-area error."""
    if error is not None and error.model.has_detuning:
        raise ValueError(
            "detuning errors are not defined for the three-level ladder")
    ea, _ = (0.0, 0.0) if error is None else error.resolve_pulse(pulse_index)
    ca = pulse.rabi_a * (1.0 + ea) * np.exp(-1j * pulse.phase_a)
    cb = pulse.rabi_b * (1.0 + ea) * np.exp(-1j * pulse.phase_b)
    H = np.zeros((3, 3), dtype=complex)
    H[0, 1] = ca
    H[1, 0] = np.conj(ca)
    H[1, 2] = cb
    H[2, 1] = np.conj(cb)
    return H


# ---------------------------------------------------------------------------
# Propagators
# ---------------------------------------------------------------------------

def resonant_propagator(area, phase) -> np.ndarray:
    """Closed-form resonant two-level propagator.

    Parameters
    ----------
    area : float or array_like
        Generator angle A = Omega*T.  A = pi/2 fully inverts the populations.
    phase : float or array_like
        Drive phase theta.

    Returns
    -------
    ndarray, shape broadcast(area, phase) + (2, 2)
        U = [[cos A, -i e^{-i theta} sin A], [-i e^{i theta} sin A, cos A]].
    """
    A, th = np.broadcast_arrays(np.asarray(area, dtype=float),
                                np.asarray(phase, dtype=float))
    ca = np.cos(A)
    sa = np.sin(A)
    U = np.empty(A.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = ca
    U[..., 1, 1] = ca
    U[..., 0, 1] = -1j * np.exp(-1j * th) * sa
    U[..., 1, 0] = -1j * np.exp(1j * th) * sa
    return U


def propagator(hamiltonian, duration) -> np.ndarray:
    """exp(-i*H*T) of a Hermitian H via spectral decomposition.

    Accepts stacked Hamiltonians of shape (..., d, d); `duration` broadcasts
    over the stack.  Non-Hermitian input is rejected.
    """
    H = np.asarray(hamiltonian, dtype=complex)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise ValueError("hamiltonian must have shape (..., d, d)")
    scale = max(1.0, float(np.max(np.abs(H))) if H.size else 1.0)
    if float(np.max(np.abs(H - np.conj(H.swapaxes(-1, -2))))) > _HERMITIAN_TOL * scale:
        raise ValueError("hamiltonian is not Hermitian")
    w, v = np.linalg.eigh(H)
    T = np.asarray(duration, dtype=float)
    phase = np.exp(-1j * w * np.expand_dims(T, -1))
    return np.matmul(v * phase[..., None, :], np.conj(v.swapaxes(-1, -2)))


def sequence_propagator(seq: PulseSequence, error: ErrorSample | None = None) -> np.ndarray:
    """Total propagator U = U_N ... U_1 of a sequence under one error sample.

    This is the reference route (per-pulse eigensolve); the vectorized
    closed-form route is :func:`sequence_propagator_batch`.
    """
    U = np.eye(seq.system_dim, dtype=complex)
    build = pulse_hamiltonian if seq.system_dim == 2 else three_level_hamiltonian
    for n, p in enumerate(seq.pulses):
        H = build(p, error, n)
        U = propagator(H, p.duration) @ U
    return U


# ---------------------------------------------------------------------------
# Vectorized closed-form route
# ---------------------------------------------------------------------------

def _two_level_factors(a, dz, T, ux, uy):
    """Closed-form pulse propagators for a batch of two-level pulses.

    a, dz broadcast to (..., N): drive and sigma_z coefficients.
    T, ux, uy broadcast likewise (durations and virtual phase components,
    which may lie off the unit circle).  Returns a dict of the spectral
    factors needed for both the propagators and their exact derivatives.
    """
    a, dz, T, ux, uy = np.broadcast_arrays(a, dz, T, ux, uy)
    hx = a * ux
    hy = a * uy
    omega = np.sqrt(hx * hx + hy * hy + dz * dz)
    wt = omega * T
    cc = np.cos(wt)
    ss = np.sin(wt)
    g = T * np.sinc(wt / np.pi)  # sin(omega T)/omega, finite at omega = 0
    U = np.empty(a.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = cc - 1j * g * dz
    U[..., 1, 1] = cc + 1j * g * dz
    U[..., 0, 1] = -1j * g * (hx - 1j * hy)
    U[..., 1, 0] = -1j * g * (hx + 1j * hy)
    return {"U": U, "a": a, "hx": hx, "hy": hy, "hz": dz, "omega": omega,
            "T": T, "cc": cc, "ss": ss, "g": g}


def _three_level_factors(a, b, T, uax, uay, ubx, uby):
    """Closed-form pulse propagators for a batch of ladder pulses.

    The ladder Hamiltonian has eigenvalues {0, +/-omega}, so
    exp(-iHT) = I - i g H + f2 H^2 with g = sin(wT)/w and
    f2 = (cos(wT)-1)/w^2, both evaluated in singularity-free form.
    """
    a, b, T, uax, uay, ubx, uby = np.broadcast_arrays(a, b, T, uax, uay, ubx, uby)
    ca = a * (uax - 1j * uay)
    cb = b * (ubx - 1j * uby)
    ca2 = a * a * (uax * uax + uay * uay)
    cb2 = b * b * (ubx * ubx + uby * uby)
    omega = np.sqrt(ca2 + cb2)
    wt = omega * T
    cc = np.cos(wt)
    ss = np.sin(wt)
    g = T * np.sinc(wt / np.pi)
    half = T * np.sinc(wt / (2.0 * np.pi))
    f2 = -0.5 * half * half  # (cos(wT)-1)/omega^2
    U = np.empty(a.shape + (3, 3), dtype=complex)
    U[..., 0, 0] = 1.0 + f2 * ca2
    U[..., 0, 1] = -1j * g * ca
    U[..., 0, 2] = f2 * ca * cb
    U[..., 1, 0] = -1j * g * np.conj(ca)
    U[..., 1, 1] = 1.0 + f2 * (ca2 + cb2)
    U[..., 1, 2] = -1j * g * cb
    U[..., 2, 0] = f2 * np.conj(ca * cb)
    U[..., 2, 1] = -1j * g * np.conj(cb)
    U[..., 2, 2] = 1.0 + f2 * cb2
    return {"U": U, "a": a, "b": b, "ca": ca, "cb": cb, "omega": omega,
            "T": T, "cc": cc, "ss": ss, "g": g, "f2": f2}


def _chain_product(Us):
    """U_N ... U_1 for Us of shape (B, N, d, d) -> (B, d, d)."""
    B, N, d, _ = Us.shape
    out = np.broadcast_to(np.eye(d, dtype=complex), (B, d, d)).copy()
    for n in range(N):
        out = Us[:, n] @ out
    return out


def sequence_propagator_batch(seq: PulseSequence, model: ErrorModel,
                              values) -> np.ndarray:
    """Total propagators for a batch of error samples, shape (B, d, d).

    `values` has shape (B, L) over the model's axes.  Agrees with
    :func:`sequence_propagator` applied sample by sample.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    eps_area, eps_det = model.resolve(values, seq.n_pulses)
    T = seq.durations[None, :]
    phases = seq.phases
    if seq.system_dim == 2:
        rabi = seq.rabis[None, :]
        a = rabi * (1.0 + eps_area)
        dz = seq.detunings[None, :] + rabi * eps_det[:, None]
        f = _two_level_factors(a, dz, T, np.cos(phases)[None, :],
                               np.sin(phases)[None, :])
    else:
        if model.has_detuning:
            raise ValueError(
                "detuning errors are not defined for the three-level ladder")
        pairs = phases.reshape(-1, 2)
        a = seq.rabis_a[None, :] * (1.0 + eps_area)
        b = seq.rabis_b[None, :] * (1.0 + eps_area)
        f = _three_level_factors(a, b, T,
                                 np.cos(pairs[:, 0])[None, :],
                                 np.sin(pairs[:, 0])[None, :],
                                 np.cos(pairs[:, 1])[None, :],
                                 np.sin(pairs[:, 1])[None, :])
    return _chain_product(f["U"])


def state_trajectory(seq: PulseSequence, initial,
                     error: ErrorSample | None = None,
                     substeps: int = 20):
    """State-vector time series under a sequence, sampled inside each pulse.

    Returns (times, states) with times of shape (1 + N*substeps,) and states
    of shape (len(times), d); row 0 is the initial state at t = 0.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    psi = np.asarray(initial, dtype=complex).ravel()
    if psi.size != seq.system_dim:
        raise ValueError("initial state dimension does not match the sequence")
    build = pulse_hamiltonian if seq.system_dim == 2 else three_level_hamiltonian
    times = [0.0]
    states = [psi.copy()]
    t0 = 0.0
    for n, p in enumerate(seq.pulses):
        H = build(p, error, n)
        dt = p.duration / substeps
        step = propagator(H, dt)
        for k in range(1, substeps + 1):
            psi = step @ psi
            times.append(t0 + k * dt)
            states.append(psi.copy())
        t0 += p.duration
    return np.array(times), np.array(states)
