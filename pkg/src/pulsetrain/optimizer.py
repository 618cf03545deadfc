"""Gradient training of pulse phases and detunings over sampled errors.

Phase training works in virtual variables: each trainable angle theta is
represented by the pair u = (cos theta, sin theta), the gradient step moves
u off the unit circle, and the two-argument arctangent projects the result
back to an angle.  Re-deriving u from the phases at the start of every
iteration keeps the parametrization exactly on the circle without any
constrained-optimization machinery.

The cost gradient with respect to the virtual variables is exact: each pulse
propagator is a closed form in (u_x, u_y), so its derivative is too, and a
forward/backward sweep of cached partial products turns the per-pulse
derivatives into the full chain-rule gradient in one pass over the sample
batch.  Detuning training instead differentiates by central finite
differences, because the resonance-compensating duration rule
T = pi / (2 sqrt(rabi^2 + detuning^2)) couples each duration to its
detuning.

Two meta strategies sit on top of the single-run loop: escape training,
which repeatedly kicks converged solutions and keeps only improving groups,
and restart training, which runs many independent random initializations
and reports the acceptance statistics.  Both derive per-group random
streams from one master seed, so results do not depend on worker count.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    PulseSequence,
    _chain_product,
    _three_level_factors,
    _two_level_factors,
    canonical_phase,
)
from .metrics import (
    GateSynth,
    RobustnessReport,
    StatePrep,
    fidelity,
    robustness_report,
)

_SMALL_WT = 1e-3  # switch to the series form of the spectral factors below this


# ---------------------------------------------------------------------------
# Virtual variables
# ---------------------------------------------------------------------------

def phases_to_virtual(phases) -> np.ndarray:
    """Map a flat phase vector to (cos, sin) pairs, shape (M, 2)."""
    phases = np.asarray(phases, dtype=float).ravel()
    return np.column_stack([np.cos(phases), np.sin(phases)])


def virtual_to_phase(virtual) -> np.ndarray:
    """Project virtual pairs back to angles in (-pi, pi].

    Uses the two-argument arctangent, so all four quadrants are reachable;
    a zero pair has no direction and is rejected.
    """
    virtual = np.asarray(virtual, dtype=float)
    if virtual.ndim != 2 or virtual.shape[1] != 2:
        raise ValueError("virtual controls must have shape (M, 2)")
    if np.any((virtual[:, 0] == 0.0) & (virtual[:, 1] == 0.0)):
        raise ValueError("zero virtual vector has no phase")
    return canonical_phase(np.arctan2(virtual[:, 1], virtual[:, 0]))


# ---------------------------------------------------------------------------
# Configuration and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters and derived-stream master seed.

    The testing stage (robustness scan, acceptance rule) is part of the
    config because escape and restart training decide with it.
    """

    learning_rate_x: float = 1e-3
    learning_rate_y: float = 1e-3
    detuning_learning_rate: float = 0.1
    max_iterations: int = 10_000
    gradient_tol: float = 1e-8
    cost_tol: float = 0.0
    groups: int = 1
    escape_rounds: int = 20
    updates_per_round: int = 5
    kick_scale: float = 0.5
    escape_tol: float = 1e-4
    detuning_reinit_ratio: float = 10.0
    phase_init: tuple = (-np.pi, np.pi)
    detuning_init: tuple = (-3.0, 3.0)
    test_interval: tuple = (-0.1, 0.1)
    test_grid_size: int = 2001
    width_threshold: float = 1e-4
    accept_threshold: float = 0.9999
    fd_step: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate_x", "learning_rate_y",
                     "detuning_learning_rate", "gradient_tol", "kick_scale",
                     "escape_tol", "detuning_reinit_ratio", "width_threshold",
                     "accept_threshold", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"TrainConfig.{name} must be positive")
        if self.cost_tol < 0:
            raise ValueError("TrainConfig.cost_tol must be non-negative")
        for name in ("max_iterations", "groups", "escape_rounds",
                     "updates_per_round"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"TrainConfig.{name} must be at least 1")
        for name in ("phase_init", "detuning_init", "test_interval"):
            pair = tuple(float(v) for v in getattr(self, name))
            if len(pair) != 2 or not pair[0] < pair[1]:
                raise ValueError(f"TrainConfig.{name} must be (lo, hi) with lo < hi")
            object.__setattr__(self, name, pair)
        if self.test_grid_size < 2:
            raise ValueError("TrainConfig.test_grid_size must be >= 2")
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for name in ("phase_init", "detuning_init", "test_interval"):
            out[name] = list(out[name])
        return out


@dataclass(frozen=True)
class TrainResult:
    """Outcome of one training run (or one surviving escape group)."""

    sequence: PulseSequence
    parameters: np.ndarray
    kind: str                      # "phase" or "detuning"
    final_cost: float
    iterations: int
    cost_trace: np.ndarray
    group_index: int
    report: RobustnessReport
    accepted: bool
    kick_iterations: tuple = ()
    stop_reason: str = "max_iterations"

    def __post_init__(self):
        for name in ("parameters", "cost_trace"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_dict(self, include_trace: bool = True) -> dict:
        out = {
            "kind": self.kind,
            "parameters": [float(x) for x in self.parameters],
            "sequence": self.sequence.to_dict(),
            "final_cost": float(self.final_cost),
            "iterations": int(self.iterations),
            "group_index": int(self.group_index),
            "accepted": bool(self.accepted),
            "kick_iterations": [int(i) for i in self.kick_iterations],
            "stop_reason": self.stop_reason,
            "report": self.report.to_dict(),
        }
        if include_trace:
            out["cost_trace"] = [float(x) for x in self.cost_trace]
        return out


# ---------------------------------------------------------------------------
# Cost and exact gradient in the virtual variables
# ---------------------------------------------------------------------------

def _dg_domega(omega, T, cc, ss, g):
    # d/domega [sin(omega T)/omega], series below _SMALL_WT to dodge the
    # 0/0 cancellation
    wt = omega * T
    safe = np.where(omega == 0.0, 1.0, omega)
    exact = (T * cc - g) / safe
    series = omega * T ** 3 * (T * T * omega * omega / 30.0 - 1.0 / 3.0)
    return np.where(np.abs(wt) < _SMALL_WT, series, exact)


def _domega(weight, component, omega):
    # d omega / d u = weight^2 * u / omega, zero in the fully degenerate case
    mask = omega > 0.0
    return np.where(mask, weight * weight * component / np.where(mask, omega, 1.0), 0.0)


def _two_level_inputs(seq, samples):
    eps_area, eps_det = samples.model.resolve(samples.values, seq.n_pulses)
    rabi = seq.rabis[None, :]
    a = rabi * (1.0 + eps_area)
    dz = seq.detunings[None, :] + rabi * eps_det[:, None]
    return a, dz, seq.durations[None, :]


def _three_level_inputs(seq, samples):
    if samples.model.has_detuning:
        raise ValueError(
            "detuning errors are not defined for the three-level ladder")
    eps_area, _ = samples.model.resolve(samples.values, seq.n_pulses)
    a = seq.rabis_a[None, :] * (1.0 + eps_area)
    b = seq.rabis_b[None, :] * (1.0 + eps_area)
    return a, b, seq.durations[None, :]


def _virtual_factors(seq, samples, u):
    """Per-pulse closed-form factors for arbitrary (off-circle) virtuals."""
    if u.shape != (seq.n_angles, 2):
        raise ValueError(f"expected virtuals of shape ({seq.n_angles}, 2)")
    if seq.system_dim == 2:
        a, dz, T = _two_level_inputs(seq, samples)
        return _two_level_factors(a, dz, T, u[None, :, 0], u[None, :, 1])
    a, b, T = _three_level_inputs(seq, samples)
    pairs = u.reshape(seq.n_pulses, 2, 2)
    return _three_level_factors(a, b, T,
                                pairs[None, :, 0, 0], pairs[None, :, 0, 1],
                                pairs[None, :, 1, 0], pairs[None, :, 1, 1])


def _gate_anchor(target) -> complex:
    # phase aligning tr(target^dag U) with the det-normalized target
    det = np.linalg.det(target)
    return complex(np.exp(1j * np.angle(det) / target.shape[0]))


def _training_fidelity(U, task):
    """Fidelity inside the training objective.

    States use the plain overlap.  Gates use the phase-anchored overlap
    Re[s tr(target^dag U)] / M with s the determinant phase of the target:
    every sample is rewarded for approaching one common representative of
    the gate, so samples cannot settle on opposite global phases.  Reported
    metrics keep the phase-insensitive modulus convention.
    """
    if isinstance(task, GateSynth):
        tdag = np.conj(task.target.T)
        tr = np.einsum("ab,...ba->...", tdag, U)
        return np.real(_gate_anchor(task.target) * tr) / task.system_dim
    return fidelity(U, task)


def _virtual_cost(seq, samples, task, u) -> float:
    """Mean training loss as a function of the raw virtual variables."""
    f = _virtual_factors(seq, samples, u)
    F = _training_fidelity(_chain_product(f["U"]), task)
    return float(np.mean(samples.labels - F))


def _state_sweeps(U, initial, target):
    """Pre-pulse forward states and post-pulse adjoint states, (K, N, d)."""
    K, N, d, _ = U.shape
    fwd = np.empty((K, N, d), dtype=complex)
    fwd[:, 0] = initial
    for n in range(1, N):
        fwd[:, n] = np.einsum("kij,kj->ki", U[:, n - 1], fwd[:, n - 1])
    bwd = np.empty((K, N, d), dtype=complex)
    bwd[:, N - 1] = target
    for n in range(N - 2, -1, -1):
        bwd[:, n] = np.einsum("kji,kj->ki", np.conj(U[:, n + 1]), bwd[:, n + 1])
    amp = np.einsum("ki,ki->k", np.conj(bwd[:, N - 1]),
                    np.einsum("kij,kj->ki", U[:, N - 1], fwd[:, N - 1]))
    return fwd, bwd, amp


def _gate_sandwiches(U, target):
    """W_n = (prefix before n) target^dag (suffix after n), plus tr(target^dag U_tot)."""
    K, N, d, _ = U.shape
    eye = np.broadcast_to(np.eye(d, dtype=complex), (K, d, d))
    pre = np.empty((K, N, d, d), dtype=complex)
    pre[:, 0] = eye
    for n in range(1, N):
        pre[:, n] = U[:, n - 1] @ pre[:, n - 1]
    post = np.empty((K, N, d, d), dtype=complex)
    post[:, N - 1] = eye
    for n in range(N - 2, -1, -1):
        post[:, n] = post[:, n + 1] @ U[:, n + 1]
    tdag = np.conj(target.T)
    W = np.einsum("knab,bc,kncd->knad", pre, tdag, post)
    total = U[:, N - 1] @ pre[:, N - 1]
    tr = np.einsum("ab,kba->k", tdag, total)
    return W, tr


def _two_level_gradient(seq, samples, task, u):
    a, dz, T = _two_level_inputs(seq, samples)
    f = _two_level_factors(a, dz, T, u[None, :, 0], u[None, :, 1])
    U, omega, g = f["U"], f["omega"], f["g"]
    T, cc, ss = f["T"], f["cc"], f["ss"]
    hx, hy, hz = f["hx"], f["hy"], f["hz"]
    dgdo = _dg_domega(omega, T, cc, ss, g)
    dox = _domega(f["a"], u[None, :, 0], omega)
    doy = _domega(f["a"], u[None, :, 1], omega)

    if isinstance(task, StatePrep):
        fwd, bwd, amp = _state_sweeps(U, task.initial, task.target)
        b0, b1 = np.conj(bwd[..., 0]), np.conj(bwd[..., 1])
        p0, p1 = fwd[..., 0], fwd[..., 1]
        t0 = b0 * p0 + b1 * p1
        tH = b0 * (hz * p0 + (hx - 1j * hy) * p1) \
            + b1 * ((hx + 1j * hy) * p0 - hz * p1)
        tx = b0 * p1 + b1 * p0
        ty = -1j * b0 * p1 + 1j * b1 * p0
        core = -T * ss * t0 - 1j * dgdo * tH
        dc_x = dox * core - 1j * g * f["a"] * tx
        dc_y = doy * core - 1j * g * f["a"] * ty
        cbar = np.conj(amp)[:, None]
        dF_x = 2.0 * np.real(cbar * dc_x)
        dF_y = 2.0 * np.real(cbar * dc_y)
        J = float(np.mean(samples.labels - np.abs(amp) ** 2))
    else:
        W, tr = _gate_sandwiches(U, task.target)
        tw = W[..., 0, 0] + W[..., 1, 1]
        tx = W[..., 0, 1] + W[..., 1, 0]
        ty = 1j * (W[..., 0, 1] - W[..., 1, 0])
        tz = W[..., 0, 0] - W[..., 1, 1]
        tH = hx * tx + hy * ty + hz * tz
        core = -T * ss * tw - 1j * dgdo * tH
        dc_x = dox * core - 1j * g * f["a"] * tx
        dc_y = doy * core - 1j * g * f["a"] * ty
        M = task.system_dim
        cbar = _gate_anchor(task.target) / M
        dF_x = np.real(cbar * dc_x)
        dF_y = np.real(cbar * dc_y)
        J = float(np.mean(samples.labels - np.real(cbar * tr)))

    grad = np.column_stack([-dF_x.mean(axis=0), -dF_y.mean(axis=0)])
    return J, grad


def _f2_domega(omega, T, cc, ss, f2):
    # d/domega [(cos(omega T) - 1)/omega^2]
    wt = omega * T
    safe = np.where(omega == 0.0, 1.0, omega)
    exact = -(T * ss + 2.0 * omega * f2) / (safe * safe)
    series = omega * T ** 4 * (1.0 / 12.0 - T * T * omega * omega / 180.0)
    return np.where(np.abs(wt) < _SMALL_WT, series, exact)


def _ladder_apply(ca, cb, psi):
    # H psi for the ladder Hamiltonian with couplings (ca, cb)
    out = np.empty_like(psi)
    out[..., 0] = ca * psi[..., 1]
    out[..., 1] = np.conj(ca) * psi[..., 0] + cb * psi[..., 2]
    out[..., 2] = np.conj(cb) * psi[..., 1]
    return out


def _pair_product(x, y, i, j):
    # <x| (|i><j| + |j><i|) |y> and the -i/+i (sigma_y-like) partner
    xi, xj = np.conj(x[..., i]), np.conj(x[..., j])
    real = xi * y[..., j] + xj * y[..., i]
    imag = -1j * xi * y[..., j] + 1j * xj * y[..., i]
    return real, imag


def _three_level_gradient(seq, samples, task, u):
    if not isinstance(task, StatePrep):
        raise ValueError("three-level training supports state preparation only")
    a, b, T = _three_level_inputs(seq, samples)
    pairs = u.reshape(seq.n_pulses, 2, 2)
    f = _three_level_factors(a, b, T,
                             pairs[None, :, 0, 0], pairs[None, :, 0, 1],
                             pairs[None, :, 1, 0], pairs[None, :, 1, 1])
    U, omega, g, f2 = f["U"], f["omega"], f["g"], f["f2"]
    T, cc, ss = f["T"], f["cc"], f["ss"]
    ca, cb = f["ca"], f["cb"]
    f1p = -1j * _dg_domega(omega, T, cc, ss, g)
    f2p = _f2_domega(omega, T, cc, ss, f2)
    f1 = -1j * g

    fwd, bwd, amp = _state_sweeps(U, task.initial, task.target)
    w = _ladder_apply(ca, cb, fwd)
    v = _ladder_apply(ca, cb, bwd)
    tH = np.einsum("kni,kni->kn", np.conj(bwd), w)
    tHH = np.einsum("kni,kni->kn", np.conj(v), w)
    core = f1p * tH + f2p * tHH

    cbar = np.conj(amp)[:, None]
    grad = np.empty((seq.n_angles, 2))
    for leg, (i, j, wgt) in enumerate(((0, 1, f["a"]), (1, 2, f["b"]))):
        xr, xi_ = _pair_product(bwd, fwd, i, j)
        wr, wi = _pair_product(bwd, w, i, j)
        vr, vi = _pair_product(v, fwd, i, j)
        ux = pairs[None, :, leg, 0]
        uy = pairs[None, :, leg, 1]
        dox = _domega(wgt, ux, omega)
        doy = _domega(wgt, uy, omega)
        dc_x = dox * core + wgt * (f1 * xr + f2 * (wr + vr))
        dc_y = doy * core + wgt * (f1 * xi_ + f2 * (wi + vi))
        grad[leg::2, 0] = -(2.0 * np.real(cbar * dc_x)).mean(axis=0)
        grad[leg::2, 1] = -(2.0 * np.real(cbar * dc_y)).mean(axis=0)
    J = float(np.mean(samples.labels - np.abs(amp) ** 2))
    return J, grad


def _virtual_cost_gradient(seq, samples, task, u):
    if samples.size == 0:
        raise ValueError("gradient needs at least one error sample")
    if task.system_dim != seq.system_dim:
        raise ValueError("task dimension does not match the sequence")
    if seq.system_dim == 2:
        return _two_level_gradient(seq, samples, task, u)
    return _three_level_gradient(seq, samples, task, u)


# ---------------------------------------------------------------------------
# Detuning objective (durations follow the compensation rule)
# ---------------------------------------------------------------------------

def compensated_durations(rabis, detunings) -> np.ndarray:
    """T = pi / (2 sqrt(rabi^2 + detuning^2)) per pulse."""
    rabis = np.asarray(rabis, dtype=float)
    detunings = np.asarray(detunings, dtype=float)
    return np.pi / (2.0 * np.sqrt(rabis * rabis + detunings * detunings))


def _detuning_sequence(template, detunings):
    return template.with_detunings(
        detunings, compensated_durations(template.rabis, detunings))


def _detuning_cost(template, samples, task, detunings) -> float:
    seq = _detuning_sequence(template, detunings)
    return _virtual_cost(seq, samples, task, phases_to_virtual(seq.phases))


def _detuning_fd_gradient(template, samples, task, detunings, step):
    grad = np.empty(detunings.size)
    for n in range(detunings.size):
        plus = detunings.copy()
        plus[n] += step
        minus = detunings.copy()
        minus[n] -= step
        grad[n] = (_detuning_cost(template, samples, task, plus)
                   - _detuning_cost(template, samples, task, minus)) / (2 * step)
    return grad


# ---------------------------------------------------------------------------
# Public gradient interface
# ---------------------------------------------------------------------------

def cost_gradient(seq, samples, task, wrt: str = "virtual",
                  fd_step: float = 1e-6):
    """Cost and its gradient, as (J, gradient).

    wrt="virtual": exact analytic gradient with respect to the virtual
    phase variables, shape (n_angles, 2), evaluated on the unit circle at
    the sequence's current phases.

    wrt="detunings": central-difference gradient with respect to the
    per-pulse detunings, shape (n_pulses,).  The objective includes the
    compensation rule, so perturbing a detuning also re-derives that
    pulse's duration; the sequence's own durations are ignored.

    For state tasks J equals :func:`pulsetrain.metrics.cost`.  For gate
    tasks J is the phase-anchored training loss (see `_training_fidelity`),
    which upper-bounds the modulus-convention loss and shares its zeros.
    """
    if wrt == "virtual":
        u = phases_to_virtual(seq.phases)
        return _virtual_cost_gradient(seq, samples, task, u)
    if wrt == "detunings":
        if seq.system_dim != 2:
            raise ValueError("detuning training is defined for two-level sequences")
        det = seq.detunings.copy()
        J = _detuning_cost(seq, samples, task, det)
        return J, _detuning_fd_gradient(seq, samples, task, det, fd_step)
    raise ValueError(f"unknown gradient target {wrt!r}")


def finite_difference_gradient(seq, samples, task, wrt: str = "virtual",
                               step: float = 1e-6) -> np.ndarray:
    """Central finite differences in the same parametrization.

    For the virtual variables, each component is displaced off the unit
    circle, matching the analytic gradient's unconstrained definition.
    """
    if wrt == "virtual":
        u0 = phases_to_virtual(seq.phases)
        grad = np.empty_like(u0)
        for m in range(u0.shape[0]):
            for c in range(2):
                plus = u0.copy()
                plus[m, c] += step
                minus = u0.copy()
                minus[m, c] -= step
                grad[m, c] = (_virtual_cost(seq, samples, task, plus)
                              - _virtual_cost(seq, samples, task, minus)) / (2 * step)
        return grad
    if wrt == "detunings":
        return _detuning_fd_gradient(seq, samples, task, seq.detunings.copy(), step)
    raise ValueError(f"unknown gradient target {wrt!r}")


# ---------------------------------------------------------------------------
# Single-run training loops
# ---------------------------------------------------------------------------

def _finish(template, parameters, kind, trace, iterations, stop_reason,
            task, cfg, group_index=0):
    if kind == "phase":
        seq = template.with_phases(parameters)
    else:
        seq = _detuning_sequence(template, parameters)
    report = robustness_report(seq, task, cfg.test_interval[0],
                               cfg.test_interval[1], cfg.test_grid_size,
                               cfg.width_threshold)
    return TrainResult(
        sequence=seq, parameters=parameters, kind=kind,
        final_cost=float(trace[-1]), iterations=iterations,
        cost_trace=np.asarray(trace), group_index=group_index,
        report=report, accepted=report.average_fidelity > cfg.accept_threshold,
        stop_reason=stop_reason)


def train_phases(seq0: PulseSequence, samples, task,
                 cfg: TrainConfig) -> TrainResult:
    """Gradient descent on the phases of `seq0` until a stop rule fires.

    Every iteration recomputes the virtual variables from the current
    phases, takes one step u' = u - alpha * dJ/du, and projects back to
    angles.  Stops on cost <= cost_tol, gradient norm <= gradient_tol, or
    the iteration cap; the cost trace holds J for every visited iterate.
    """
    theta = seq0.phases
    lr = np.array([cfg.learning_rate_x, cfg.learning_rate_y])
    trace = []
    stop_reason = "max_iterations"
    updates = 0
    for _ in range(cfg.max_iterations):
        u = phases_to_virtual(theta)
        J, grad = _virtual_cost_gradient(seq0, samples, task, u)
        if not np.isfinite(J):
            raise RuntimeError(
                f"cost became non-finite after {updates} updates")
        trace.append(J)
        if J <= cfg.cost_tol:
            stop_reason = "cost"
            break
        if np.sqrt(np.sum(grad * grad)) <= cfg.gradient_tol:
            stop_reason = "gradient"
            break
        theta = virtual_to_phase(u - lr[None, :] * grad)
        updates += 1
    else:
        trace.append(_virtual_cost(seq0, samples, task,
                                   phases_to_virtual(theta)))
    return _finish(seq0, theta, "phase", trace, updates, stop_reason, task, cfg)


def train_detunings(template: PulseSequence, samples, task,
                    cfg: TrainConfig) -> TrainResult:
    """Gradient descent on per-pulse detunings with coupled durations.

    Durations follow the compensation rule at every step, and any detuning
    exceeding `detuning_reinit_ratio` times its Rabi frequency is redrawn
    from the initial range instead of being kept.
    """
    if template.system_dim != 2:
        raise ValueError("detuning training is defined for two-level sequences")
    if np.any(template.rabis <= 0.0):
        raise ValueError("detuning training needs strictly positive Rabi frequencies")
    det = template.detunings.copy()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2,)))
    trace = []
    stop_reason = "max_iterations"
    updates = 0
    for _ in range(cfg.max_iterations):
        J = _detuning_cost(template, samples, task, det)
        if not np.isfinite(J):
            raise RuntimeError(
                f"cost became non-finite after {updates} updates")
        trace.append(J)
        if J <= cfg.cost_tol:
            stop_reason = "cost"
            break
        grad = _detuning_fd_gradient(template, samples, task, det, cfg.fd_step)
        if np.sqrt(np.sum(grad * grad)) <= cfg.gradient_tol:
            stop_reason = "gradient"
            break
        det = det - cfg.detuning_learning_rate * grad
        runaway = np.abs(det / template.rabis) > cfg.detuning_reinit_ratio
        if np.any(runaway):
            det[runaway] = rng.uniform(cfg.detuning_init[0],
                                       cfg.detuning_init[1],
                                       int(runaway.sum()))
        updates += 1
    else:
        trace.append(_detuning_cost(template, samples, task, det))
    return _finish(template, det, "detuning", trace, updates, stop_reason,
                   task, cfg)


# ---------------------------------------------------------------------------
# Escape training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EscapeOutcome:
    """Surviving groups of an escape run, in ascending group order."""

    survivors: tuple
    total_average_fidelity: float
    rounds: int
    score_history: tuple

    @property
    def best(self) -> TrainResult:
        return max(self.survivors, key=lambda r: r.report.average_fidelity)


def initial_sequences(template: PulseSequence, count: int,
                      cfg: TrainConfig) -> list:
    """Independent random-phase copies of `template`, one per group."""
    out = []
    for m in range(count):
        kids = np.random.SeedSequence(cfg.seed, spawn_key=(0, m)).spawn(2)
        rng = np.random.default_rng(kids[0])
        out.append(template.with_phases(
            rng.uniform(cfg.phase_init[0], cfg.phase_init[1],
                        template.n_angles)))
    return out


def initial_detuned_sequence(template: PulseSequence,
                             cfg: TrainConfig) -> PulseSequence:
    """`template` with detunings drawn from cfg.detuning_init.

    The all-resonant template is a stationary point of the detuning
    objective (the cost is even in each detuning there), so descent must
    start from a random draw; durations follow the compensation rule.
    """
    if template.system_dim != 2:
        raise ValueError("detuning training is defined for two-level sequences")
    kids = np.random.SeedSequence(cfg.seed, spawn_key=(0, 0)).spawn(2)
    rng = np.random.default_rng(kids[0])
    det = rng.uniform(cfg.detuning_init[0], cfg.detuning_init[1],
                      template.n_pulses)
    return _detuning_sequence(template, det)


def escape_search(groups, samples, task, cfg: TrainConfig,
                  score_fn=None) -> EscapeOutcome:
    """Kick-and-retrain meta-optimization over M trained groups.

    Each round gives every surviving group `updates_per_round` escape
    attempts: phases are kicked by uniform noise on [-kick_scale,
    kick_scale], retrained, and the kicked solution replaces the group
    only if its tested score improves.  After each round, groups scoring
    below the across-group mean are discarded; the search stops when the
    best-to-mean gap falls below `escape_tol` or the round budget runs out.
    """
    groups = list(groups)
    if len(groups) < 2:
        raise ValueError("escape training needs at least two groups")
    score = score_fn or (lambda res: res.report.average_fidelity)

    state = {}
    for m, seq0 in enumerate(groups):
        res = train_phases(seq0, samples, task, cfg)
        res = dataclasses.replace(res, group_index=m)
        state[m] = {
            "result": res,
            "score": score(res),
            "trace": list(res.cost_trace),
            "kicks": [],
            "updates": res.iterations,
            "rng": np.random.default_rng(
                np.random.SeedSequence(cfg.seed, spawn_key=(1, m))),
        }

    history = []
    rounds = 0
    for _ in range(cfg.escape_rounds):
        rounds += 1
        for m in sorted(state):
            g = state[m]
            for _ in range(cfg.updates_per_round):
                kick = g["rng"].uniform(-cfg.kick_scale, cfg.kick_scale,
                                        g["result"].sequence.n_angles)
                kicked = g["result"].sequence.with_phases(
                    canonical_phase(g["result"].parameters + kick))
                cand = train_phases(kicked, samples, task, cfg)
                cand = dataclasses.replace(cand, group_index=m)
                cand_score = score(cand)
                if cand_score > g["score"]:
                    g["kicks"].append(len(g["trace"]))
                    g["trace"].extend(cand.cost_trace)
                    g["updates"] += cand.iterations
                    g["result"] = cand
                    g["score"] = cand_score
        scores = {m: state[m]["score"] for m in state}
        f_tot = float(np.mean(list(scores.values())))
        for m, s in scores.items():
            if s < f_tot:
                del state[m]
        if not state:
            raise RuntimeError("every escape group fell below the average score")
        history.append({m: state[m]["score"] for m in sorted(state)})
        if max(scores.values()) - f_tot < cfg.escape_tol:
            break

    survivors = tuple(
        dataclasses.replace(state[m]["result"],
                            cost_trace=np.asarray(state[m]["trace"]),
                            kick_iterations=tuple(state[m]["kicks"]),
                            iterations=state[m]["updates"])
        for m in sorted(state))
    total = float(np.mean([state[m]["score"] for m in sorted(state)]))
    return EscapeOutcome(survivors=survivors, total_average_fidelity=total,
                         rounds=rounds, score_history=tuple(history))


# ---------------------------------------------------------------------------
# Restart training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RestartOutcome:
    """All restarts, the best one, and the acceptance statistics."""

    best: TrainResult
    results: tuple
    accepted: tuple
    acceptance_fraction: float


def _restart_worker(args):
    template, samples, task, cfg, m = args
    kids = np.random.SeedSequence(cfg.seed, spawn_key=(0, m)).spawn(2)
    rng = np.random.default_rng(kids[0])
    theta0 = rng.uniform(cfg.phase_init[0], cfg.phase_init[1],
                         template.n_angles)
    if callable(samples):
        samples = samples(m, kids[1])
    res = train_phases(template.with_phases(theta0), samples, task, cfg)
    return dataclasses.replace(res, group_index=m)


def restart_search(template: PulseSequence, count: int, samples, task,
                   cfg: TrainConfig, score_fn=None,
                   jobs: int = 1) -> RestartOutcome:
    """`count` independent trainings from fresh random initializations.

    `samples` is either a fixed SampleSet shared by every restart or a
    callable (group_index, seed) -> SampleSet drawing fresh samples per
    restart.  Restarts whose score clears `accept_threshold` are the
    accepted set; the best restart is returned regardless (an empty
    accepted set is a reported outcome, not an error).  `jobs` > 1 runs
    restarts in separate processes with identical results.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    work = [(template, samples, task, cfg, m) for m in range(count)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_restart_worker, work))
    else:
        results = [_restart_worker(w) for w in work]

    if score_fn is not None:
        scores = [score_fn(r) for r in results]
        results = [dataclasses.replace(r, accepted=s > cfg.accept_threshold)
                   for r, s in zip(results, scores)]
    else:
        scores = [r.report.average_fidelity for r in results]
    best = results[int(np.argmax(scores))]
    accepted = tuple(r for r in results if r.accepted)
    return RestartOutcome(best=best, results=tuple(results),
                          accepted=accepted,
                          acceptance_fraction=len(accepted) / count)
