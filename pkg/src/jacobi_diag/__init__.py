"""Jacobi-type algorithms for approximate diagonalization of tensors on O(n) and U(n)."""

from .cost import (
    ComplexGeneral,
    CostState,
    NamedCost,
    RealSymmetric,
    TraceForm,
    build_hermitian_form,
    evaluate,
    load_manifest,
    restricted_samples_real,
    restricted_value_complex,
    save_manifest,
    transformed_tensors,
)
from .diagnostics import (
    HessSurrogate,
    LojasiewiczFit,
    diagnostic_report,
    hess_surrogate_scan,
    rate_fit,
    rate_fit_sequence,
    stationarity_check,
)
from .driver import RunTrace, SolverConfig, cyclic_pairs, read_trace_csv, run, safeguard_audit, write_trace_csv
from .gradient import (
    PairDerivatives,
    delta_bound,
    euclidean_gradient,
    jacobi_g_pair,
    pair_derivatives_real,
    riemann_gradient_complex,
)
from .harness import (
    ExperimentConfig,
    GeneratorDirective,
    compare_and_plot,
    generate,
    haar_orthogonal,
    haar_unitary,
    load_config,
    match_score,
    run_experiment,
)
from .rotations import GivensRotation, PlaneTransform, apply_rotation
from .solvers import CertificationError, GammaMatrix, build_gamma, solve_angle_real, solve_plane_complex
from .tensor import DenseTensor, SymmetryTag, check_symmetry, contract_mode, multi_transform, read_ten, write_ten

__version__ = "0.1.0"
