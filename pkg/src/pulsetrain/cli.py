"""Command line front end: train, test, and aggregate pulse sequences.

Verbs:
    pulsetrain train --config cfg.json [--seed S] [--jobs J] [--out DIR]
    pulsetrain test PARAMS.json [--config cfg.json] [--seed S] [--out DIR]
    pulsetrain sweep "runs/*" [--out DIR]

The config is one JSON object with sections task / sampling / samples /
optimizer / testing / seed / jobs; every omitted field is filled with its
default and the fully resolved config is echoed into the artifacts, so a
run can always be reproduced from its own params file.  All numeric output
is deterministic for a fixed config and seed: JSON is written with sorted
keys, CSV floats use the shortest round-trip representation, and no file
carries a timestamp.  Exit codes: 0 success, 2 invalid config or
arguments, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import json
import math
import os
import sys

import numpy as np

from .dynamics import ErrorModel, PulseSequence, sequence_propagator
from .metrics import (
    GateSynth,
    cost,
    fidelity,
    fidelity_grid,
    grid_average_fidelity,
    robustness_report,
)
from .optimizer import (
    TrainConfig,
    escape_search,
    initial_detuned_sequence,
    initial_sequences,
    restart_search,
    train_detunings,
)
from .sampling import spec_from_dict, spec_to_dict
from .tasks import (
    HADAMARD,
    build_detuning_inversion,
    build_gate_operator_based,
    build_gate_state_based,
    build_population_inversion,
    build_superposition,
    build_three_level_inversion,
    build_time_varying_inversion,
    target_gate,
)

PARAMS_FORMAT = "pulsetrain-params-v1"
SUMMARY_FORMAT = "pulsetrain-summary-v1"
TEST_SUMMARY_FORMAT = "pulsetrain-test-summary-v1"

# average-fidelity bin edges for the sweep histogram
HISTOGRAM_EDGES = (0.0, 0.9, 0.99, 0.999, 0.9999, 1.0)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# ---------------------------------------------------------------------------
# Config validation
# ---------------------------------------------------------------------------

_MISSING = object()


def _section(cfg, name, default=_MISSING):
    val = cfg.get(name, default)
    if val is _MISSING:
        raise ConfigError(f"{name}: required section is missing")
    return val


def _check_keys(d, allowed, path):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(unknown)}")


def _get(d, key, path, default=_MISSING):
    val = d.get(key, default)
    if val is _MISSING:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return val


def _as_int(val, path, lo=None):
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}: expected an integer, got {val!r}")
    if lo is not None and val < lo:
        raise ConfigError(f"{path}: must be >= {lo}, got {val}")
    return int(val)


def _as_float(val, path):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(f"{path}: must be finite, got {val!r}")
    return float(val)


def _as_bool(val, path):
    if not isinstance(val, bool):
        raise ConfigError(f"{path}: expected true/false, got {val!r}")
    return val


def _as_pair(val, path):
    if (not isinstance(val, (list, tuple)) or len(val) != 2):
        raise ConfigError(f"{path}: expected a [lo, hi] pair, got {val!r}")
    lo = _as_float(val[0], f"{path}[0]")
    hi = _as_float(val[1], f"{path}[1]")
    if not hi > lo:
        raise ConfigError(f"{path}: needs lo < hi, got [{lo}, {hi}]")
    return [lo, hi]


def _as_choice(val, choices, path):
    if val not in choices:
        raise ConfigError(
            f"{path}: expected one of {', '.join(choices)}, got {val!r}")
    return val


TASK_KINDS = ("population_inversion", "superposition", "gate_operator",
              "gate_state", "time_varying", "detuning", "three_level")

# fields owned by the optimizer section; seed and the test-scan fields are
# owned by their own sections and injected into TrainConfig afterwards
_OPT_FIELDS = ("learning_rate_x", "learning_rate_y", "detuning_learning_rate",
               "max_iterations", "gradient_tol", "cost_tol", "escape_rounds",
               "updates_per_round", "kick_scale", "escape_tol",
               "detuning_reinit_ratio", "phase_init", "detuning_init",
               "accept_threshold", "fd_step")


def _normalize_task(raw):
    if not isinstance(raw, dict):
        raise ConfigError("task: expected an object")
    kind = _as_choice(_get(raw, "kind", "task"), TASK_KINDS, "task.kind")
    out = {"kind": kind}
    keys = ["kind", "n_pulses"]
    out["n_pulses"] = _as_int(_get(raw, "n_pulses", "task"),
                              "task.n_pulses", lo=1)
    if kind in ("population_inversion", "superposition", "gate_operator",
                "gate_state", "time_varying"):
        default_area = np.pi / 2 if kind in ("population_inversion",
                                             "time_varying") else np.pi / 4
        out["area"] = _as_float(raw.get("area", default_area), "task.area")
        out["rabi"] = _as_float(raw.get("rabi", 1.0), "task.rabi")
        keys += ["area", "rabi"]
    if kind in ("detuning", "three_level"):
        out["rabi"] = _as_float(raw.get("rabi", 1.0), "task.rabi")
        keys.append("rabi")
    if kind == "population_inversion":
        out["multi_error"] = _as_bool(raw.get("multi_error", False),
                                      "task.multi_error")
        keys.append("multi_error")
    if kind in ("superposition", "gate_state"):
        out["phi"] = _as_float(_get(raw, "phi", "task"), "task.phi")
        out["varphi"] = _as_float(raw.get("varphi", 0.0), "task.varphi")
        keys += ["phi", "varphi"]
    if kind == "gate_state":
        out["big_phi"] = _as_float(_get(raw, "big_phi", "task"),
                                   "task.big_phi")
        keys.append("big_phi")
    if kind == "gate_operator":
        out["target"] = _normalize_target(_get(raw, "target", "task"))
        keys.append("target")
    if kind == "three_level":
        duration = raw.get("duration")
        out["duration"] = (None if duration is None
                           else _as_float(duration, "task.duration"))
        keys.append("duration")
    _check_keys(raw, keys, "task")
    return out


def _normalize_target(val):
    if val == "hadamard":
        return "hadamard"
    if isinstance(val, (list, tuple)) and len(val) == 2:
        rows = []
        for i, row in enumerate(val):
            if not isinstance(row, (list, tuple)) or len(row) != 2:
                raise ConfigError(f"task.target[{i}]: expected a 2-entry row")
            cells = []
            for j, cell in enumerate(row):
                path = f"task.target[{i}][{j}]"
                if isinstance(cell, (int, float)) and not isinstance(cell, bool):
                    cells.append([float(cell), 0.0])
                elif (isinstance(cell, (list, tuple)) and len(cell) == 2):
                    cells.append([_as_float(cell[0], path),
                                  _as_float(cell[1], path)])
                else:
                    raise ConfigError(
                        f"{path}: expected a number or [re, im] pair")
            rows.append(cells)
        return rows
    raise ConfigError('task.target: expected "hadamard" or a 2x2 matrix')


def _target_matrix(val):
    if val == "hadamard":
        return HADAMARD
    return np.array([[complex(c[0], c[1]) for c in row] for row in val])


def _normalize_sampling(raw):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("sampling: expected an object")
    try:
        spec = spec_from_dict(raw)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"sampling: {e}") from None
    return spec_to_dict(spec)


def _normalize_optimizer(raw, task_kind):
    if not isinstance(raw, dict):
        raise ConfigError("optimizer: expected an object")
    strategy = _as_choice(raw.get("strategy", "plain"),
                          ("plain", "escape", "restart"),
                          "optimizer.strategy")
    if task_kind == "detuning" and strategy != "plain":
        raise ConfigError(
            "optimizer.strategy: detuning training runs the plain strategy "
            "from the resonant template")
    out = {"strategy": strategy}
    keys = ["strategy"]
    if strategy == "restart":
        out["restarts"] = _as_int(raw.get("restarts", 10),
                                  "optimizer.restarts", lo=1)
        out["fresh_samples"] = _as_bool(raw.get("fresh_samples", False),
                                        "optimizer.fresh_samples")
        keys += ["restarts", "fresh_samples"]
    elif "fresh_samples" in raw or "restarts" in raw:
        raise ConfigError(
            "optimizer.restarts/fresh_samples: only valid with the restart "
            "strategy")
    if strategy == "escape":
        out["groups"] = _as_int(raw.get("groups", 10), "optimizer.groups",
                                lo=2)
        keys.append("groups")
    elif "groups" in raw:
        raise ConfigError("optimizer.groups: only valid with the escape "
                          "strategy")
    defaults = TrainConfig().to_dict()
    for name in _OPT_FIELDS:
        if name in ("phase_init", "detuning_init"):
            out[name] = _as_pair(raw.get(name, defaults[name]),
                                 f"optimizer.{name}")
        elif name in ("max_iterations", "escape_rounds", "updates_per_round"):
            out[name] = _as_int(raw.get(name, defaults[name]),
                                f"optimizer.{name}", lo=1)
        else:
            out[name] = _as_float(raw.get(name, defaults[name]),
                                  f"optimizer.{name}")
    _check_keys(raw, keys + list(_OPT_FIELDS), "optimizer")
    return out


def _normalize_testing(raw):
    if not isinstance(raw, dict):
        raise ConfigError("testing: expected an object")
    _check_keys(raw, ("interval", "grid_size", "width_threshold",
                      "detuning_interval", "fresh_samples"), "testing")
    out = {
        "interval": _as_pair(raw.get("interval", [-0.1, 0.1]),
                             "testing.interval"),
        "grid_size": _as_int(raw.get("grid_size", 2001),
                             "testing.grid_size", lo=2),
        "width_threshold": _as_float(raw.get("width_threshold", 1e-4),
                                     "testing.width_threshold"),
        "fresh_samples": _as_int(raw.get("fresh_samples", 1000),
                                 "testing.fresh_samples", lo=1),
    }
    if out["width_threshold"] <= 0:
        raise ConfigError("testing.width_threshold: must be positive")
    det = raw.get("detuning_interval")
    out["detuning_interval"] = (None if det is None
                                else _as_pair(det, "testing.detuning_interval"))
    return out


def normalize_config(raw, seed_override=None, jobs_override=None):
    """Validate a raw config dict and fill every default in."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object at the top level")
    _check_keys(raw, ("task", "sampling", "samples", "optimizer", "testing",
                      "seed", "jobs"), "config")
    task = _normalize_task(_section(raw, "task"))
    eff = {
        "task": task,
        "sampling": _normalize_sampling(raw.get("sampling")),
        "samples": _as_int(raw.get("samples", 1000), "samples", lo=1),
        "optimizer": _normalize_optimizer(raw.get("optimizer", {}),
                                          task["kind"]),
        "testing": _normalize_testing(raw.get("testing", {})),
        "seed": _as_int(raw.get("seed", 0), "seed", lo=0),
        "jobs": _as_int(raw.get("jobs", 1), "jobs", lo=1),
    }
    if seed_override is not None:
        eff["seed"] = _as_int(seed_override, "seed", lo=0)
    if jobs_override is not None:
        eff["jobs"] = _as_int(jobs_override, "jobs", lo=1)
    return eff


def config_hash(effective: dict) -> str:
    """Short digest of the fully resolved config, for provenance lines."""
    text = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------

def build_problem(task_cfg, sampling_dict):
    """(ControlProblem, StateBasedGatePlan | None) from the config echo."""
    spec = spec_from_dict(sampling_dict) if sampling_dict else None
    kind = task_cfg["kind"]
    n = task_cfg["n_pulses"]
    try:
        if kind == "population_inversion":
            model = (ErrorModel.area_and_detuning()
                     if task_cfg["multi_error"] else None)
            return build_population_inversion(
                n, area=task_cfg["area"], rabi=task_cfg["rabi"],
                sampling=spec, model=model), None
        if kind == "superposition":
            return build_superposition(
                task_cfg["phi"], task_cfg["varphi"], n_pulses=n,
                area=task_cfg["area"], rabi=task_cfg["rabi"],
                sampling=spec), None
        if kind == "gate_operator":
            return build_gate_operator_based(
                _target_matrix(task_cfg["target"]), n_pulses=n,
                area=task_cfg["area"], rabi=task_cfg["rabi"],
                sampling=spec), None
        if kind == "gate_state":
            plan = build_gate_state_based(
                task_cfg["phi"], task_cfg["varphi"], task_cfg["big_phi"],
                n_pulses=n, area=task_cfg["area"], rabi=task_cfg["rabi"],
                sampling=spec)
            return plan.problem, plan
        if kind == "time_varying":
            return build_time_varying_inversion(
                n, area=task_cfg["area"], rabi=task_cfg["rabi"],
                sampling=spec), None
        if kind == "detuning":
            return build_detuning_inversion(
                n, rabi=task_cfg["rabi"], sampling=spec), None
        if kind == "three_level":
            return build_three_level_inversion(
                n, rabi=task_cfg["rabi"], duration=task_cfg["duration"],
                sampling=spec), None
    except ValueError as e:
        raise ConfigError(f"task: {e}") from None
    raise ConfigError(f"task.kind: unhandled kind {kind!r}")


def _train_config(eff) -> TrainConfig:
    opt = eff["optimizer"]
    kwargs = {name: opt[name] for name in _OPT_FIELDS}
    kwargs["phase_init"] = tuple(kwargs["phase_init"])
    kwargs["detuning_init"] = tuple(kwargs["detuning_init"])
    kwargs.update(
        seed=eff["seed"],
        test_interval=tuple(eff["testing"]["interval"]),
        test_grid_size=eff["testing"]["grid_size"],
        width_threshold=eff["testing"]["width_threshold"],
        groups=opt.get("groups", 1),
    )
    try:
        return TrainConfig(**kwargs)
    except ValueError as e:
        raise ConfigError(f"optimizer: {e}") from None


# ---------------------------------------------------------------------------
# Artifact writing
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def _provenance(h, seed) -> str:
    return f"# config_hash={h} seed={seed}\n"


def _write_text(path, text):
    with open(path, "w") as f:
        f.write(text)


def _write_json(path, obj):
    _write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_cost_trace(path, trace, h, seed):
    lines = [_provenance(h, seed), "iteration,cost\n"]
    lines += [f"{i},{_fmt(c)}\n" for i, c in enumerate(trace)]
    _write_text(path, "".join(lines))


def _write_profile(path, grid, F, h, seed):
    lines = [_provenance(h, seed), "epsilon,fidelity\n"]
    lines += [f"{_fmt(e)},{_fmt(f)}\n" for e, f in zip(grid, F)]
    _write_text(path, "".join(lines))


def _write_profile_2d(path, area_grid, det_grid, F, h, seed):
    lines = [_provenance(h, seed), "eps_a,eps_delta,fidelity\n"]
    for i, ea in enumerate(area_grid):
        for j, ed in enumerate(det_grid):
            lines.append(f"{_fmt(ea)},{_fmt(ed)},{_fmt(F[i, j])}\n")
    _write_text(path, "".join(lines))


def _scan_artifacts(outdir, seq, task, model, testing, h, seed):
    """Write profile CSV(s) and return the summary's scan block."""
    lo, hi = testing["interval"]
    if testing["detuning_interval"] is not None:
        if seq.system_dim != 2:
            raise ConfigError(
                "testing.detuning_interval: 2-D scans need a two-level task")
        dlo, dhi = testing["detuning_interval"]
        m = testing["grid_size"]
        area_grid = np.linspace(lo, hi, m)
        det_grid = np.linspace(dlo, dhi, m)
        F = fidelity_grid(seq, task, area_grid, det_grid)
        favg = grid_average_fidelity(F)
        _write_profile_2d(os.path.join(outdir, "profile2d.csv"),
                          area_grid, det_grid, F, h, seed)
        return {
            "scan": "2d",
            "area_interval": [lo, hi],
            "detuning_interval": [dlo, dhi],
            "grid_size": m,
            "quadrature": "trapezoid",
            "average_fidelity": favg,
            "generalization_error": 1.0 - favg,
            # the robust width is defined on a 1-D scan only
            "robust_width": None,
        }
    report = robustness_report(seq, task, lo, hi, testing["grid_size"],
                               testing["width_threshold"], model=model)
    _write_profile(os.path.join(outdir, "profile.csv"),
                   report.grid, report.fidelities, h, seed)
    block = report.to_dict()
    block["scan"] = "1d"
    return block


def _sample_mean_fidelity(seq, problem, task, testing, seed):
    """Mean fidelity over fresh draws from the problem's sampling spec."""
    if problem.sampling is None:
        return None, None
    count = testing["fresh_samples"]
    fresh = problem.samples(
        count, seed=np.random.SeedSequence(seed, spawn_key=(3,)))
    return 1.0 - cost(seq, fresh, task), count


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None


def run_train(args) -> None:
    eff = normalize_config(_load_json(args.config), args.seed, args.jobs)
    if eff["sampling"] is None:
        raise ConfigError("sampling: required for training")
    h = config_hash(eff)
    seed = eff["seed"]
    problem, plan = build_problem(eff["task"], eff["sampling"])
    cfg = _train_config(eff)
    opt = eff["optimizer"]
    strategy = opt["strategy"]

    shared = problem.samples(
        eff["samples"], seed=np.random.SeedSequence(seed, spawn_key=(4,)))
    escape_info = None
    acceptance_fraction = None
    if eff["task"]["kind"] == "detuning":
        # the resonant template is a stationary point; start from a random
        # detuning draw as in the phase strategies
        seq0 = initial_detuned_sequence(problem.template, cfg)
        best = train_detunings(seq0, shared, problem.task, cfg)
    elif strategy == "escape":
        outcome = escape_search(
            initial_sequences(problem.template, opt["groups"], cfg),
            shared, problem.task, cfg)
        best = outcome.best
        escape_info = {
            "rounds": outcome.rounds,
            "survivors": len(outcome.survivors),
            "total_average_fidelity": outcome.total_average_fidelity,
        }
    else:
        count = opt["restarts"] if strategy == "restart" else 1
        fresh = strategy == "restart" and opt["fresh_samples"]
        samples_arg = problem.sample_factory(eff["samples"]) if fresh else shared
        outcome = restart_search(problem.template, count, samples_arg,
                                 problem.task, cfg, jobs=eff["jobs"])
        best = outcome.best
        acceptance_fraction = outcome.acceptance_fraction

    # a state-based gate stores the shifted sequence and is reported
    # against its target gate; everything else is reported on its own task
    stored = plan.shifted(best.sequence) if plan else best.sequence
    report_task = GateSynth(target=plan.target_gate) if plan else problem.task

    os.makedirs(args.out, exist_ok=True)
    scan = _scan_artifacts(args.out, stored, report_task, problem.model,
                           eff["testing"], h, seed)
    mean_f, n_fresh = _sample_mean_fidelity(stored, problem, report_task,
                                            eff["testing"], seed)
    zero_error = fidelity(sequence_propagator(stored), report_task)

    params = {
        "format": PARAMS_FORMAT,
        "config_hash": h,
        "seed": seed,
        "config": eff,
        "kind": best.kind,
        "parameters": [float(p) for p in best.parameters],
        "sequence": stored.to_dict(),
        "phase_shift": plan.phase_shift if plan else None,
        "final_cost": float(best.final_cost),
        "iterations": int(best.iterations),
        "stop_reason": best.stop_reason,
        "group_index": int(best.group_index),
        "accepted": bool(best.accepted),
        "acceptance_fraction": acceptance_fraction,
    }
    _write_json(os.path.join(args.out, "params.json"), params)
    _write_cost_trace(os.path.join(args.out, "cost_trace.csv"),
                      best.cost_trace, h, seed)
    summary = {
        "format": SUMMARY_FORMAT,
        "config_hash": h,
        "seed": seed,
        "task": eff["task"],
        "sampling": eff["sampling"],
        "samples": eff["samples"],
        "strategy": strategy,
        "final_cost": float(best.final_cost),
        "iterations": int(best.iterations),
        "stop_reason": best.stop_reason,
        "accepted": bool(best.accepted),
        "acceptance_fraction": acceptance_fraction,
        "escape": escape_info,
        "report": scan,
        "zero_error_fidelity": zero_error,
        "sample_mean_fidelity": mean_f,
        "test_samples": n_fresh,
    }
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print(f"wrote {args.out}: final_cost={best.final_cost:.3e} "
          f"average_fidelity={scan['average_fidelity']:.6f}")


# ---------------------------------------------------------------------------
# test
# ---------------------------------------------------------------------------

def _load_params(path):
    params = _load_json(path)
    if not isinstance(params, dict) or params.get("format") != PARAMS_FORMAT:
        raise ConfigError(f"{path}: not a {PARAMS_FORMAT} file")
    for field in ("config", "sequence", "config_hash", "seed"):
        if field not in params:
            raise ConfigError(f"{path}: missing field {field}")
    return params


def _report_task_for(task_cfg, problem, plan):
    if plan is not None:
        return GateSynth(target=target_gate(task_cfg["phi"],
                                            task_cfg["varphi"],
                                            task_cfg["big_phi"]))
    return problem.task


def run_test(args) -> None:
    params = _load_params(args.params)
    eff = params["config"]
    testing = eff["testing"]
    if args.config is not None:
        override = _load_json(args.config)
        if not isinstance(override, dict):
            raise ConfigError("config: expected a JSON object")
        testing = _normalize_testing(override.get("testing", override))
    h = params["config_hash"]
    seed = params["seed"] if args.seed is None else args.seed

    try:
        seq = PulseSequence.from_dict(params["sequence"])
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"sequence: cannot rebuild ({e})") from None
    problem, plan = build_problem(eff["task"], eff["sampling"])
    task = _report_task_for(eff["task"], problem, plan)
    if seq.system_dim != problem.template.system_dim:
        raise ConfigError(
            f"sequence: dimension {seq.system_dim} does not match the "
            f"{eff['task']['kind']} task")
    if seq.n_pulses != eff["task"]["n_pulses"]:
        raise ConfigError(
            f"sequence: {seq.n_pulses} pulses but the task declares "
            f"{eff['task']['n_pulses']}")

    outdir = args.out if args.out else (os.path.dirname(args.params) or ".")
    os.makedirs(outdir, exist_ok=True)
    scan = _scan_artifacts(outdir, seq, task, problem.model, testing, h, seed)
    mean_f, n_fresh = _sample_mean_fidelity(seq, problem, task, testing, seed)
    summary = {
        "format": TEST_SUMMARY_FORMAT,
        "config_hash": h,
        "seed": seed,
        "task": eff["task"],
        "report": scan,
        "zero_error_fidelity": fidelity(sequence_propagator(seq), task),
        "sample_mean_fidelity": mean_f,
        "test_samples": n_fresh,
    }
    _write_json(os.path.join(outdir, "summary.json"), summary)
    print(f"wrote {outdir}: average_fidelity={scan['average_fidelity']:.6f}")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sampling_boundary(sampling) -> float:
    if sampling is None:
        return 0.0
    for key in ("hi", "mean", "offset"):
        if key in sampling:
            return float(sampling[key])
    return 0.0


def _summary_row(path, summary):
    report = summary.get("report") or {}
    sampling = summary.get("sampling")
    run = os.path.basename(os.path.dirname(os.path.abspath(path))) or path
    return {
        "run": run,
        "n_pulses": int(summary["task"]["n_pulses"]),
        "task": summary["task"]["kind"],
        "sampling": sampling["kind"] if sampling else "",
        "boundary": _sampling_boundary(sampling),
        "average_fidelity": float(report["average_fidelity"]),
        "generalization_error": float(report["generalization_error"]),
        "robust_width": report.get("robust_width"),
        "acceptance_fraction": summary.get("acceptance_fraction"),
        "final_cost": summary.get("final_cost"),
        "config_hash": summary["config_hash"],
        "seed": summary["seed"],
    }


def run_sweep(args) -> None:
    matches = sorted(glob.glob(args.pattern))
    if not matches:
        raise RuntimeError(f"no files match {args.pattern!r}")
    rows, problems = [], []
    for match in matches:
        path = (os.path.join(match, "summary.json") if os.path.isdir(match)
                else match)
        try:
            summary = _load_json(path)
            if summary.get("format") != SUMMARY_FORMAT:
                raise ConfigError(f"not a {SUMMARY_FORMAT} file")
            rows.append(_summary_row(path, summary))
        except (OSError, ConfigError, KeyError, TypeError, ValueError) as e:
            problems.append(f"{path}: {e}")
    if problems:
        for p in problems:
            print(f"warning: skipped {p}", file=sys.stderr)
    if not rows:
        raise RuntimeError(
            f"no usable run summaries among {len(matches)} match(es)")
    rows.sort(key=lambda r: (r["n_pulses"], r["boundary"], r["run"]))

    os.makedirs(args.out, exist_ok=True)
    header = ("run,task,n_pulses,sampling,boundary,average_fidelity,"
              "generalization_error,robust_width,acceptance_fraction,"
              "final_cost,config_hash,seed\n")
    lines = [f"# runs={len(rows)}\n", header]
    for r in rows:
        opt = {k: ("" if r[k] is None else _fmt(r[k]))
               for k in ("robust_width", "acceptance_fraction", "final_cost")}
        lines.append(
            f"{r['run']},{r['task']},{r['n_pulses']},{r['sampling']},"
            f"{_fmt(r['boundary'])},{_fmt(r['average_fidelity'])},"
            f"{_fmt(r['generalization_error'])},{opt['robust_width']},"
            f"{opt['acceptance_fraction']},{opt['final_cost']},"
            f"{r['config_hash']},{r['seed']}\n")
    _write_text(os.path.join(args.out, "aggregate.csv"), "".join(lines))

    favg = [r["average_fidelity"] for r in rows]
    lines = [f"# runs={len(rows)}\n", "bin_lo,bin_hi,count\n"]
    for lo, hi in zip(HISTOGRAM_EDGES, HISTOGRAM_EDGES[1:]):
        last = hi == HISTOGRAM_EDGES[-1]
        n = sum(1 for f in favg if f >= lo and (f <= hi if last else f < hi))
        lines.append(f"{_fmt(lo)},{_fmt(hi)},{n}\n")
    _write_text(os.path.join(args.out, "histogram.csv"), "".join(lines))
    print(f"aggregated {len(rows)} run(s) into {args.out}")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsetrain",
        description="Train and test error-robust composite pulse sequences.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train a configured problem")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's master seed")
    p.add_argument("--jobs", type=int, default=None,
                   help="override the config's worker count")
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("test", help="scan stored parameters over errors")
    p.add_argument("params", help="params.json from a training run")
    p.add_argument("--config", default=None,
                   help="JSON file whose testing section overrides the run's")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for fresh test samples")
    p.add_argument("--out", default=None,
                   help="output directory (default: params directory)")

    p = sub.add_parser("sweep", help="aggregate many run summaries")
    p.add_argument("pattern", help="glob of run directories or summary files")
    p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "train":
            if args.out is None:
                stem = os.path.splitext(os.path.basename(args.config))[0]
                args.out = f"{stem}-run"
            run_train(args)
        elif args.verb == "test":
            run_test(args)
        else:
            run_sweep(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
