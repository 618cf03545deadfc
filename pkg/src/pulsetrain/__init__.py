"""pulsetrain: composite pulse sequences trained on sampled systematic errors.

A small numpy library for making quantum state preparation and gates robust:
pulse-sequence dynamics with exact propagators, robustness metrics, error
sampling, gradient training of pulse phases and detunings, and escape/restart
meta-optimization on top.
"""

from .dynamics import (
    DETUNING as DETUNING,
    PULSE_AREA as PULSE_AREA,
    TIME_VARYING_AREA as TIME_VARYING_AREA,
    ErrorAxis as ErrorAxis,
    ErrorModel as ErrorModel,
    ErrorSample as ErrorSample,
    Pulse as Pulse,
    Pulse3 as Pulse3,
    PulseSequence as PulseSequence,
    canonical_phase as canonical_phase,
    propagator as propagator,
    pulse_hamiltonian as pulse_hamiltonian,
    resonant_propagator as resonant_propagator,
    sequence_propagator as sequence_propagator,
    sequence_propagator_batch as sequence_propagator_batch,
    state_trajectory as state_trajectory,
    three_level_hamiltonian as three_level_hamiltonian,
)
from .metrics import (
    GateSynth as GateSynth,
    RobustnessReport as RobustnessReport,
    StatePrep as StatePrep,
    average_fidelity as average_fidelity,
    cost as cost,
    fidelity as fidelity,
    fidelity_grid as fidelity_grid,
    fidelity_profile as fidelity_profile,
    gate_fidelity as gate_fidelity,
    generalization_error as generalization_error,
    grid_average_fidelity as grid_average_fidelity,
    robust_width as robust_width,
    robustness_report as robustness_report,
    state_fidelity as state_fidelity,
    total_average_fidelity as total_average_fidelity,
)
from .optimizer import (
    EscapeOutcome as EscapeOutcome,
    RestartOutcome as RestartOutcome,
    TrainConfig as TrainConfig,
    TrainResult as TrainResult,
    compensated_durations as compensated_durations,
    cost_gradient as cost_gradient,
    escape_search as escape_search,
    finite_difference_gradient as finite_difference_gradient,
    initial_detuned_sequence as initial_detuned_sequence,
    initial_sequences as initial_sequences,
    phases_to_virtual as phases_to_virtual,
    restart_search as restart_search,
    train_detunings as train_detunings,
    train_phases as train_phases,
    virtual_to_phase as virtual_to_phase,
)
from .sampling import (
    Beta as Beta,
    Exponential as Exponential,
    Gaussian as Gaussian,
    SampleFactory as SampleFactory,
    SampleSet as SampleSet,
    Uniform as Uniform,
    draw as draw,
    empirical_moments as empirical_moments,
    spec_from_dict as spec_from_dict,
    spec_to_dict as spec_to_dict,
)
from .tasks import (
    HADAMARD as HADAMARD,
    KET0 as KET0,
    KET1 as KET1,
    ControlProblem as ControlProblem,
    StateBasedGatePlan as StateBasedGatePlan,
    apply_phase_shift as apply_phase_shift,
    build_detuning_inversion as build_detuning_inversion,
    build_gate_operator_based as build_gate_operator_based,
    build_gate_state_based as build_gate_state_based,
    build_population_inversion as build_population_inversion,
    build_superposition as build_superposition,
    build_three_level_inversion as build_three_level_inversion,
    build_time_varying_inversion as build_time_varying_inversion,
    target_gate as target_gate,
    target_superposition as target_superposition,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
