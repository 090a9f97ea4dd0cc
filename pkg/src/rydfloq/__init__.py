"""Floquet spectra, ionization thresholds, and localization diagnostics for a
microwave-driven one-dimensional Rydberg surrogate.

The pipeline: a Sturmian basis discretizes the Coulomb problem (basis), the
periodically driven Hamiltonian is complex-dilated and block-assembled
(floquet), shift-invert Arnoldi extracts resonances (eigensolve), spectral
weights of the initial state give ionization probabilities and localization
diagnostics (observables), and a bisection harness locates 10%-yield fields
over scans in the principal quantum number (threshold). A split-operator
grid propagation (oracle) cross-checks the whole chain by an independent
route, and the cli module drives everything from archivable config files.
"""

from .banded import BandedMatrix
from .basis import (
    OperatorSet,
    SturmianBasis,
    build_operators,
    field_free_spectrum,
    field_free_state,
    load_operators,
    save_operators,
)
from .eigensolve import EigenPair, EigenRequest, c_product, dense_eigs, shift_invert_eigs
from .errors import (
    AccuracyError,
    ConvergenceError,
    InsufficientSpectrumError,
    NoThresholdError,
    SingularShiftError,
    StepSizeError,
)
from .floquet import (
    FloquetConfig,
    FloquetProblem,
    assemble,
    block_count_heuristic,
    embed_initial,
)
from .observables import (
    SpectralDecomposition,
    SpectralEntry,
    decompose,
    ionization_probability,
    localization_length,
    photon_number,
    regime_classify,
    rotated_initial_state,
    shannon_width,
)
from .oracle import GridSpec, evolve, grid_bound_states, propagate
from .threshold import (
    ScanPlan,
    SolverSettings,
    ThresholdRecord,
    auto_basis_size,
    default_scan_plan,
    find_threshold,
    initial_state_decomposition,
    load_journal,
    pion_at,
    plan_hash,
    run_scan,
    write_csv,
)
from .units import (
    AtomicParams,
    LabParams,
    ScaledParams,
    lab_to_atomic,
    scale,
    unscale,
)

__all__ = [
    "AccuracyError",
    "AtomicParams",
    "BandedMatrix",
    "ConvergenceError",
    "EigenPair",
    "EigenRequest",
    "FloquetConfig",
    "FloquetProblem",
    "GridSpec",
    "InsufficientSpectrumError",
    "LabParams",
    "NoThresholdError",
    "OperatorSet",
    "ScaledParams",
    "ScanPlan",
    "SingularShiftError",
    "SolverSettings",
    "SpectralDecomposition",
    "SpectralEntry",
    "StepSizeError",
    "SturmianBasis",
    "ThresholdRecord",
    "assemble",
    "auto_basis_size",
    "block_count_heuristic",
    "build_operators",
    "c_product",
    "decompose",
    "default_scan_plan",
    "dense_eigs",
    "embed_initial",
    "evolve",
    "field_free_spectrum",
    "field_free_state",
    "find_threshold",
    "grid_bound_states",
    "initial_state_decomposition",
    "ionization_probability",
    "lab_to_atomic",
    "load_journal",
    "load_operators",
    "localization_length",
    "photon_number",
    "pion_at",
    "plan_hash",
    "propagate",
    "regime_classify",
    "rotated_initial_state",
    "run_scan",
    "save_operators",
    "scale",
    "shannon_width",
    "shift_invert_eigs",
    "unscale",
    "write_csv",
]
