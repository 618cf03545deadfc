"""Tests for gradient training: virtual variables, exact gradients, loops.

The finite-difference oracle cross-checks every analytic gradient; training
behavior tests use deliberately small budgets so the whole file stays fast.
"""

import dataclasses

import numpy as np
import pytest

from pulsetrain.dynamics import ErrorModel, Pulse, Pulse3, PulseSequence
from pulsetrain.metrics import GateSynth, StatePrep, cost
from pulsetrain.optimizer import (
    TrainConfig,
    TrainResult,
    compensated_durations,
    cost_gradient,
    escape_search,
    finite_difference_gradient,
    initial_sequences,
    phases_to_virtual,
    restart_search,
    train_detunings,
    train_phases,
    virtual_to_phase,
)
from pulsetrain.sampling import SampleSet, Uniform, draw

RNG = np.random.default_rng(20240119)

INVERSION = StatePrep(initial=[1.0, 0.0], target=[0.0, 1.0])
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def uniform_template(n, area=np.pi / 2):
    return PulseSequence(tuple(
        Pulse(phase=0.0, rabi=1.0, duration=area / 2.0) for _ in range(n)))


def random_sequence(n, rng, detuned=False):
    return PulseSequence(tuple(
        Pulse(phase=rng.uniform(-np.pi, np.pi), rabi=rng.uniform(0.5, 1.5),
              detuning=rng.uniform(-0.8, 0.8) if detuned else 0.0,
              duration=rng.uniform(0.3, 1.8))
        for _ in range(n)))


def small_cfg(**kw):
    base = dict(learning_rate_x=0.05, learning_rate_y=0.05,
                max_iterations=150, test_grid_size=201, seed=0)
    base.update(kw)
    return TrainConfig(**base)


# ---------------------------------------------------------------------------
# Virtual variables
# ---------------------------------------------------------------------------

def test_phases_to_virtual_basics():
    u = phases_to_virtual([0.0, np.pi / 2])
    assert np.allclose(u, [[1.0, 0.0], [0.0, 1.0]], atol=1e-15)


def test_virtual_to_phase_quadrants():
    assert virtual_to_phase(np.array([[0.0, 1.0]]))[0] == pytest.approx(np.pi / 2)
    assert virtual_to_phase(np.array([[-1.0, 0.0]]))[0] == pytest.approx(np.pi)
    assert virtual_to_phase(np.array([[-1e-3, -1e-3]]))[0] == pytest.approx(-3 * np.pi / 4)


def test_virtual_round_trip():
    theta = RNG.uniform(-np.pi, np.pi, 50)
    theta[theta == -np.pi] = np.pi
    back = virtual_to_phase(phases_to_virtual(theta))
    assert np.allclose(back, theta, atol=1e-12)


def test_projection_idempotence():
    u = RNG.normal(size=(20, 2))
    proj = phases_to_virtual(virtual_to_phase(u))
    again = phases_to_virtual(virtual_to_phase(proj))
    assert np.max(np.abs(proj - again)) < 1e-12
    assert np.allclose(np.sum(proj ** 2, axis=1), 1.0, atol=1e-12)


def test_virtual_to_phase_rejects_degenerate():
    with pytest.raises(ValueError):
        virtual_to_phase(np.array([[0.0, 0.0]]))
    with pytest.raises(ValueError):
        virtual_to_phase(np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# Gradient correctness
# ---------------------------------------------------------------------------

def relative_error(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


@pytest.mark.parametrize("case", range(20))
def test_analytic_gradient_matches_finite_differences(case):
    rng = np.random.default_rng(1000 + case)
    n = rng.integers(1, 8)
    kind = case % 4
    if kind == 0:
        seq = random_sequence(n, rng)
        task = INVERSION
        samples = draw(Uniform(-0.3, 0.3), 16, seed=case)
    elif kind == 1:
        seq = random_sequence(n, rng, detuned=True)
        task = INVERSION
        samples = draw(Uniform(-0.2, 0.2), 16, dim=2, seed=case,
                       model=ErrorModel.area_and_detuning())
    elif kind == 2:
        seq = random_sequence(n, rng)
        task = GateSynth(target=HADAMARD)
        samples = draw(Uniform(-0.2, 0.2), 16, dim=2, seed=case,
                       model=ErrorModel.area_and_detuning())
    else:
        seq = PulseSequence(tuple(
            Pulse3(phase_a=rng.uniform(-np.pi, np.pi),
                   phase_b=rng.uniform(-np.pi, np.pi),
                   rabi_a=rng.uniform(0.5, 1.5), rabi_b=rng.uniform(0.5, 1.5),
                   duration=rng.uniform(0.3, 1.5))
            for _ in range(n)))
        task = StatePrep(initial=[1, 0, 0], target=[0, 0, 1])
        samples = draw(Uniform(-0.2, 0.2), 16, seed=case)
    J, grad = cost_gradient(seq, samples, task)
    fd = finite_difference_gradient(seq, samples, task)
    assert relative_error(grad, fd) <= 1e-6
    if isinstance(task, GateSynth):
        # anchored gate loss upper-bounds the modulus loss, equality at zero
        assert J >= cost(seq, samples, task) - 1e-12
    else:
        assert J == pytest.approx(cost(seq, samples, task), abs=1e-14)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_per_pulse_error_model(seed):
    rng = np.random.default_rng(3000 + seed)
    n = int(rng.integers(2, 7))
    seq = random_sequence(n, rng)
    model = ErrorModel.time_varying(n)
    samples = draw(Uniform(-0.2, 0.2), 16, dim=n, seed=seed, model=model)
    J, grad = cost_gradient(seq, samples, INVERSION)
    fd = finite_difference_gradient(seq, samples, INVERSION)
    assert relative_error(grad, fd) <= 1e-6
    assert J == pytest.approx(cost(seq, samples, INVERSION), abs=1e-14)


def test_single_pulse_gradient_closed_form():
    # one resonant pulse, one zero-error sample, inversion target:
    # J(u) = 1 - sin^2(a T |u|), so dJ/du_x = -a T sin(2 a T) u_x on the circle
    theta = 0.7
    T = 0.4
    seq = PulseSequence((Pulse(phase=theta, rabi=1.0, duration=T),))
    samples = SampleSet(values=np.zeros((1, 1)), labels=np.ones(1),
                        spec=Uniform(-1, 1), seed=None,
                        model=ErrorModel.pulse_area())
    _, grad = cost_gradient(seq, samples, INVERSION)
    want = -T * np.sin(2 * T) * np.array([np.cos(theta), np.sin(theta)])
    assert np.allclose(grad[0], want, atol=1e-12)


def test_gradient_near_degenerate_pulse():
    seq = PulseSequence((Pulse(phase=0.3, rabi=1e-6, duration=0.5),
                         Pulse(phase=-1.2, rabi=1.0, duration=1.0)))
    samples = draw(Uniform(-0.3, 0.3), 8, seed=3)
    _, grad = cost_gradient(seq, samples, INVERSION)
    fd = finite_difference_gradient(seq, samples, INVERSION)
    assert np.all(np.isfinite(grad))
    assert relative_error(grad, fd) <= 1e-6


def test_gradient_rejects_bad_wrt():
    samples = draw(Uniform(-0.1, 0.1), 4, seed=0)
    with pytest.raises(ValueError):
        cost_gradient(uniform_template(2), samples, INVERSION, wrt="phases")


def test_three_level_gradient_needs_state_task():
    seq = PulseSequence((Pulse3(phase_a=0.1, phase_b=0.2),))
    samples = draw(Uniform(-0.1, 0.1), 4, seed=0)
    with pytest.raises(ValueError):
        cost_gradient(seq, samples, GateSynth(target=np.eye(3)))


# ---------------------------------------------------------------------------
# Phase training loop
# ---------------------------------------------------------------------------

def test_train_converges_at_zero_error():
    # two quarter-area pulses reach inversion at zero error once the phases
    # align; descent from a random start should find that
    samples = SampleSet(values=np.zeros((1, 1)), labels=np.ones(1),
                        spec=Uniform(-1, 1), seed=None,
                        model=ErrorModel.pulse_area())
    cfg = TrainConfig(learning_rate_x=0.2, learning_rate_y=0.2,
                      max_iterations=5000, cost_tol=1e-12,
                      test_grid_size=201, seed=0)
    seq0 = uniform_template(2).with_phases([2.1, -0.9])
    res = train_phases(seq0, samples, INVERSION, cfg)
    assert res.final_cost <= 1e-10
    assert res.stop_reason in ("cost", "gradient")


def test_train_stops_immediately_when_cost_met():
    # a bare pi pulse is exact at zero error, so the first evaluation stops
    samples = SampleSet(values=np.zeros((1, 1)), labels=np.ones(1),
                        spec=Uniform(-1, 1), seed=None,
                        model=ErrorModel.pulse_area())
    res = train_phases(uniform_template(1, area=np.pi), samples, INVERSION,
                       small_cfg(cost_tol=1e-12))
    assert res.stop_reason == "cost"
    assert res.iterations == 0
    assert len(res.cost_trace) == 1


def test_train_trace_monotone_at_small_rate():
    samples = draw(Uniform(-0.3, 0.3), 64, seed=5)
    cfg = TrainConfig(learning_rate_x=1e-4, learning_rate_y=1e-4,
                      max_iterations=100, test_grid_size=201, seed=0)
    seq0 = uniform_template(5).with_phases(
        np.random.default_rng(7).uniform(-np.pi, np.pi, 5))
    res = train_phases(seq0, samples, INVERSION, cfg)
    assert np.all(np.diff(res.cost_trace) <= 1e-15)
    assert len(res.cost_trace) == res.iterations + 1


def test_train_gradient_stop():
    samples = draw(Uniform(-0.3, 0.3), 16, seed=6)
    res = train_phases(uniform_template(3), samples, INVERSION,
                       small_cfg(gradient_tol=1e3))
    assert res.stop_reason == "gradient"
    assert res.iterations == 0


def test_train_is_deterministic():
    samples = draw(Uniform(-0.3, 0.3), 32, seed=8)
    seq0 = uniform_template(4).with_phases([0.3, -1.0, 2.2, 0.9])
    a = train_phases(seq0, samples, INVERSION, small_cfg())
    b = train_phases(seq0, samples, INVERSION, small_cfg())
    assert np.array_equal(a.parameters, b.parameters)
    assert np.array_equal(a.cost_trace, b.cost_trace)


def test_train_aborts_on_non_finite_cost():
    bad = SampleSet(values=np.array([[np.nan]]), labels=np.ones(1),
                    spec=Uniform(-1, 1), seed=None,
                    model=ErrorModel.pulse_area())
    with pytest.raises(RuntimeError):
        train_phases(uniform_template(2), bad, INVERSION, small_cfg())


def test_train_result_serializes():
    samples = draw(Uniform(-0.3, 0.3), 16, seed=9)
    res = train_phases(uniform_template(3), samples, INVERSION,
                       small_cfg(max_iterations=20))
    d = res.to_dict()
    assert d["kind"] == "phase"
    assert len(d["parameters"]) == 3
    assert len(d["cost_trace"]) == res.iterations + 1
    assert d["report"]["quadrature"] == "trapezoid"
    assert "cost_trace" not in res.to_dict(include_trace=False)


def test_three_level_training_improves_cost():
    seq0 = PulseSequence(tuple(
        Pulse3(phase_a=p, phase_b=q, duration=np.pi / np.sqrt(2))
        for p, q in [(0.4, -0.2), (1.2, 0.5), (-0.8, 0.3)]))
    task = StatePrep(initial=[1, 0, 0], target=[0, 0, 1])
    samples = draw(Uniform(0.0, 0.3), 24, seed=11)
    res = train_phases(seq0, samples, task, small_cfg(max_iterations=200))
    assert res.final_cost < res.cost_trace[0]
    assert res.parameters.size == 6


# ---------------------------------------------------------------------------
# Detuning training
# ---------------------------------------------------------------------------

def test_compensated_durations_rule():
    T = compensated_durations([1.0, 2.0], [0.0, 2.0])
    assert T[0] == pytest.approx(np.pi / 2)
    assert T[1] == pytest.approx(np.pi / (2 * np.sqrt(8.0)))


def test_detuning_training_improves_cost():
    template = PulseSequence(tuple(
        Pulse(phase=0.0, rabi=1.0, detuning=d, duration=np.pi / 2)
        for d in (0.5, -1.0, 1.5)))
    samples = draw(Uniform(-0.2, 0.2), 24, seed=12)
    res = train_detunings(template, samples, INVERSION,
                          small_cfg(max_iterations=120))
    assert res.kind == "detuning"
    assert res.final_cost < res.cost_trace[0]
    assert np.allclose(res.sequence.durations,
                       compensated_durations([1.0] * 3, res.parameters))


def test_detuning_reinit_redraws_runaways():
    template = PulseSequence((
        Pulse(phase=0.0, rabi=1.0, detuning=20.0, duration=np.pi / 2),
        Pulse(phase=0.0, rabi=1.0, detuning=0.0, duration=np.pi / 2)))
    samples = draw(Uniform(-0.1, 0.1), 8, seed=13)
    res = train_detunings(template, samples, INVERSION,
                          small_cfg(max_iterations=3))
    assert np.all(np.abs(res.parameters) <= 10.0)


def test_detuning_training_rejects_three_level():
    seq3 = PulseSequence((Pulse3(phase_a=0.0, phase_b=0.0),))
    samples = draw(Uniform(-0.1, 0.1), 4, seed=0)
    with pytest.raises(ValueError):
        train_detunings(seq3, samples,
                        StatePrep(initial=[1, 0, 0], target=[0, 0, 1]),
                        small_cfg())


# ---------------------------------------------------------------------------
# Escape training
# ---------------------------------------------------------------------------

def escape_setup():
    template = uniform_template(3)
    samples = draw(Uniform(-0.3, 0.3), 32, seed=14)
    cfg = small_cfg(max_iterations=80, escape_rounds=2, updates_per_round=2,
                    kick_scale=0.4)
    return template, samples, cfg


def test_escape_requires_two_groups():
    template, samples, cfg = escape_setup()
    with pytest.raises(ValueError):
        escape_search([template], samples, INVERSION, cfg)


def test_escape_survivors_and_history():
    template, samples, cfg = escape_setup()
    groups = initial_sequences(template, 4, cfg)
    out = escape_search(groups, samples, INVERSION, cfg)
    assert 1 <= len(out.survivors) <= 4
    # survivor sets shrink monotonically across rounds
    keys = [set(h) for h in out.score_history]
    for earlier, later in zip(keys, keys[1:]):
        assert later <= earlier
    # per-group scores never decrease while the group survives
    for m in keys[-1]:
        series = [h[m] for h in out.score_history if m in h]
        assert all(a <= b + 1e-15 for a, b in zip(series, series[1:]))
    assert out.total_average_fidelity == pytest.approx(
        np.mean([r.report.average_fidelity for r in out.survivors]))


def test_escape_traces_concatenate_at_kick_marks():
    template, samples, cfg = escape_setup()
    out = escape_search(initial_sequences(template, 3, cfg), samples,
                        INVERSION, cfg)
    for res in out.survivors:
        marks = np.asarray(res.kick_iterations)
        assert np.all(np.diff(marks) > 0) if marks.size > 1 else True
        assert np.all(marks < len(res.cost_trace))


def test_escape_is_deterministic():
    template, samples, cfg = escape_setup()
    a = escape_search(initial_sequences(template, 3, cfg), samples, INVERSION, cfg)
    b = escape_search(initial_sequences(template, 3, cfg), samples, INVERSION, cfg)
    assert np.array_equal(a.survivors[0].parameters, b.survivors[0].parameters)
    assert a.score_history == b.score_history


# ---------------------------------------------------------------------------
# Restart training
# ---------------------------------------------------------------------------

def test_restart_single_count_matches_manual_train():
    template = uniform_template(3)
    samples = draw(Uniform(-0.3, 0.3), 32, seed=15)
    cfg = small_cfg(max_iterations=60)
    out = restart_search(template, 1, samples, INVERSION, cfg)
    kids = np.random.SeedSequence(cfg.seed, spawn_key=(0, 0)).spawn(2)
    theta0 = np.random.default_rng(kids[0]).uniform(-np.pi, np.pi, 3)
    manual = train_phases(template.with_phases(theta0), samples, INVERSION, cfg)
    assert np.array_equal(out.best.parameters, manual.parameters)
    assert out.results[0].group_index == 0


def test_restart_best_improves_with_more_restarts():
    template = uniform_template(3)
    samples = draw(Uniform(-0.3, 0.3), 32, seed=16)
    cfg = small_cfg(max_iterations=60)
    few = restart_search(template, 4, samples, INVERSION, cfg)
    many = restart_search(template, 12, samples, INVERSION, cfg)
    # the first 4 restarts of the larger run are the smaller run
    for a, b in zip(few.results, many.results[:4]):
        assert np.array_equal(a.parameters, b.parameters)
    assert many.best.report.average_fidelity >= few.best.report.average_fidelity


def test_restart_parallel_matches_serial():
    template = uniform_template(3)
    samples = draw(Uniform(-0.3, 0.3), 24, seed=17)
    cfg = small_cfg(max_iterations=40)
    serial = restart_search(template, 4, samples, INVERSION, cfg, jobs=1)
    parallel = restart_search(template, 4, samples, INVERSION, cfg, jobs=2)
    for a, b in zip(serial.results, parallel.results):
        assert np.array_equal(a.parameters, b.parameters)
        assert np.array_equal(a.cost_trace, b.cost_trace)


def test_restart_fresh_samples_per_group():
    template = uniform_template(3)
    seen = []

    def factory(m, seed):
        s = draw(Uniform(-0.3, 0.3), 16, seed=seed)
        seen.append(s.values.copy())
        return s

    cfg = small_cfg(max_iterations=30)
    restart_search(template, 3, factory, INVERSION, cfg)
    assert len(seen) == 3
    assert not np.array_equal(seen[0], seen[1])


def test_restart_acceptance_statistics():
    template = uniform_template(3)
    samples = draw(Uniform(-0.3, 0.3), 24, seed=18)
    cfg = small_cfg(max_iterations=40)
    out = restart_search(template, 5, samples, INVERSION, cfg)
    flags = [r.accepted for r in out.results]
    assert out.acceptance_fraction == pytest.approx(np.mean(flags))
    assert all(r in out.results for r in out.accepted)
    score_override = restart_search(template, 5, samples, INVERSION, cfg,
                                    score_fn=lambda r: 1.0)
    assert score_override.acceptance_fraction == 1.0


def test_restart_rejects_zero_count():
    with pytest.raises(ValueError):
        restart_search(uniform_template(2), 0,
                       draw(Uniform(-0.1, 0.1), 4, seed=0), INVERSION,
                       small_cfg())


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    {"learning_rate_x": 0.0},
    {"learning_rate_y": -1.0},
    {"detuning_learning_rate": 0.0},
    {"max_iterations": 0},
    {"gradient_tol": 0.0},
    {"cost_tol": -1e-3},
    {"groups": 0},
    {"updates_per_round": 0},
    {"kick_scale": 0.0},
    {"phase_init": (1.0, -1.0)},
    {"test_interval": (0.1, 0.1)},
    {"test_grid_size": 1},
    {"accept_threshold": 0.0},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_config_to_dict_round_trippable():
    cfg = TrainConfig(seed=7, test_interval=(-0.2, 0.2))
    d = cfg.to_dict()
    assert d["seed"] == 7
    assert d["test_interval"] == [-0.2, 0.2]
    assert TrainConfig(**{**d, "test_interval": tuple(d["test_interval"]),
                          "phase_init": tuple(d["phase_init"]),
                          "detuning_init": tuple(d["detuning_init"])}) == cfg


def test_initial_sequences_deterministic_and_in_range():
    cfg = small_cfg(seed=21)
    seqs = initial_sequences(uniform_template(4), 3, cfg)
    again = initial_sequences(uniform_template(4), 3, cfg)
    assert len(seqs) == 3
    for s, t in zip(seqs, again):
        assert np.array_equal(s.phases, t.phases)
        assert np.all((s.phases >= -np.pi) & (s.phases <= np.pi))
    assert not np.array_equal(seqs[0].phases, seqs[1].phases)
