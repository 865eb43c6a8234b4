"""
rsperturb - Rayleigh-Schrodinger perturbation series for band Hamiltonians

Zero-order states come from inertia bisection and inverse iteration, the
corrections from one factored bordered system, and every coefficient can be
cross-checked against direct diagonalization and finite differences.
"""

__version__ = "1.0.0"

from .errors import (
    ConstructionError,
    DegenerateState,
    EigensolverError,
    IllConditioned,
    NoisyDerivative,
    PerturbationError,
    SingularPivotError,
    SolverRefusal,
    StateCrossing,
)
from .operator_model import (
    BandMatrix,
    BasisSpec,
    HamiltonianSplit,
    LatticeSpec,
    PotentialSpec,
    assemble_at,
    build_lattice_split,
    build_oscillator_split,
    resplit,
    toy_split,
)
from .zero_order import EigenPair, SolverSettings, count_below, solve_state, spectral_gap
from .rs_hierarchy import PerturbationSeries, rs_series, solve_order
from .adaptive_split import SplitKind, SplitPolicy, SplitQuality, apply_policy, improve_split, split_quality
from .series_eval import PartialSumTrace, optimal_truncation, partial_sums, wavefunction_partial_sum
from .oracle_bench import (
    OracleReport,
    convergence_slope,
    direct_energy,
    energy_curve,
    fd_coefficients,
    sum_over_states,
)
from .server import PerturbationServer

__all__ = [
    "ConstructionError",
    "DegenerateState",
    "EigensolverError",
    "IllConditioned",
    "NoisyDerivative",
    "PerturbationError",
    "SingularPivotError",
    "SolverRefusal",
    "StateCrossing",
    "BandMatrix",
    "BasisSpec",
    "HamiltonianSplit",
    "LatticeSpec",
    "PotentialSpec",
    "assemble_at",
    "build_lattice_split",
    "build_oscillator_split",
    "resplit",
    "toy_split",
    "EigenPair",
    "SolverSettings",
    "count_below",
    "solve_state",
    "spectral_gap",
    "PerturbationSeries",
    "rs_series",
    "solve_order",
    "SplitKind",
    "SplitPolicy",
    "SplitQuality",
    "apply_policy",
    "improve_split",
    "split_quality",
    "PartialSumTrace",
    "optimal_truncation",
    "partial_sums",
    "wavefunction_partial_sum",
    "OracleReport",
    "convergence_slope",
    "direct_energy",
    "energy_curve",
    "fd_coefficients",
    "sum_over_states",
    "PerturbationServer",
]
