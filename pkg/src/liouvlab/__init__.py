"""liouvlab: a numerical laboratory for dissipative two- and three-level systems.

Builds Liouvillian superoperators, analyzes their spectra for exceptional
points, integrates Lindblad dynamics along static and swept parameter paths,
unravels the master equation into Monte-Carlo wavefunction trajectories, and
extracts oscillation frequencies and decay rates by damped-sinusoid fitting.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateInput,
    DegenerateSteadyState,
    DomainError,
    InsufficientData,
    LiouvlabError,
    NoSteadyState,
    NonConvergence,
    NotDensityMatrix,
    NotHermitian,
    NumericalError,
    OutOfRange,
    Overflow,
    ZeroNorm,
)
from .numerics import (
    EigenDecomposition,
    eig_general,
    expm,
    kron,
    principal_angle,
    trace_distance,
)
from .model import (
    DriveParams,
    ParameterSchedule,
    QuantumSystem,
    Rates,
    basis_ket,
    hamiltonian,
    jump_operators,
    make_system,
    minus_x,
    plus_x,
    schedule_eval,
    sigma_z,
)
from .liouvillian import (
    EpMap,
    SpectralResult,
    Superoperator,
    analytic_qubit_eigensystem,
    build_superoperator,
    ep_scan,
    pair_branches,
    refine_triple_point,
    spectrum,
    steady_state,
    unvec,
    vec,
)
from .dynamics import (
    EvolutionResult,
    IntegratorConfig,
    bloch_rhs,
    integrate_bloch,
    integrate_constant,
    integrate_scheduled,
    observables_from_states,
    validate_density_matrix,
)
from .trajectories import (
    EnsembleResult,
    TrajectoryRecord,
    apply_jump,
    run_ensemble,
    run_trajectory,
    split_seed,
)
from .analysis import (
    DampedSineFit,
    SweepResult,
    TransitionScan,
    chirality,
    entropy,
    ep_coupling,
    fit_damped_sine,
    predict_rates,
    scan_transition,
    sweep_metrics,
)

__all__ = [
    "__version__",
    # errors
    "LiouvlabError", "ConfigError", "NumericalError", "NonConvergence",
    "Overflow", "NotHermitian", "NotDensityMatrix", "NoSteadyState",
    "DegenerateSteadyState", "ZeroNorm", "OutOfRange", "DomainError",
    "InsufficientData", "DegenerateInput",
    # numerics
    "EigenDecomposition", "eig_general", "expm", "kron", "principal_angle",
    "trace_distance",
    # model
    "Rates", "DriveParams", "QuantumSystem", "ParameterSchedule",
    "basis_ket", "plus_x", "minus_x", "sigma_z", "hamiltonian",
    "jump_operators", "make_system", "schedule_eval",
    # liouvillian
    "Superoperator", "SpectralResult", "EpMap", "vec", "unvec",
    "build_superoperator", "spectrum", "steady_state",
    "analytic_qubit_eigensystem", "pair_branches", "ep_scan",
    "refine_triple_point",
    # dynamics
    "IntegratorConfig", "EvolutionResult", "integrate_constant",
    "integrate_scheduled", "bloch_rhs", "integrate_bloch",
    "validate_density_matrix", "observables_from_states",
    # trajectories
    "TrajectoryRecord", "EnsembleResult", "run_trajectory", "run_ensemble",
    "split_seed", "apply_jump",
    # analysis
    "DampedSineFit", "TransitionScan", "SweepResult", "fit_damped_sine",
    "scan_transition", "chirality", "entropy", "sweep_metrics",
    "ep_coupling", "predict_rates",
]
