"""
Zero-order solver - one bound state of a band matrix, no full diagonalization

Bisection on the inertia of h - s*I (counted from the pivots of a
band-preserving LDL^T factorization) brackets the requested eigenvalue
between Gershgorin bounds; inverse iteration with a single sparse LU of the
shifted matrix then refines the eigenpair. A neighbouring eigenvalue inside
the degeneracy gap is refused with DegenerateState.
"""

from typing import Any, Dict, List, Optional, Tuple
from dataclasses import dataclass
import logging

import numpy as np
from scipy.sparse.linalg import splu

from .errors import ConstructionError, DegenerateState, EigensolverError, SingularPivotError
from .operator_model import BandMatrix

logger = logging.getLogger(__name__)

_GOLDEN = 0.6180339887498949
_MAX_PIVOT_RETRIES = 8
_POLISH_STEPS = 2


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and iteration limits shared by the solvers"""
    tol_eig: float = 1e-12
    max_bisect: int = 200
    max_inverse_iter: int = 50
    degeneracy_gap: float = 1e-8
    tol_hier: float = 1e-10
    mu_tol: float = 1e-10
    fd_tol: float = 1e-6

    def __post_init__(self):
        for name, value in self.to_dict().items():
            if not value > 0:
                raise ConstructionError(f"solver setting {name} must be positive, got {value!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tol_eig": self.tol_eig,
            "max_bisect": self.max_bisect,
            "max_inverse_iter": self.max_inverse_iter,
            "degeneracy_gap": self.degeneracy_gap,
            "tol_hier": self.tol_hier,
            "mu_tol": self.mu_tol,
            "fd_tol": self.fd_tol,
        }


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Zero-order energy and unit vector of the selected state"""
    energy: float
    vector: np.ndarray
    state_index: int
    residual: float
    bracket: Tuple[float, float] = (float("nan"), float("nan"))
    iterations: int = 0

    def __post_init__(self):
        vector = np.array(self.vector, dtype=float, copy=True)
        vector.setflags(write=False)
        object.__setattr__(self, "vector", vector)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "energy": self.energy,
            "state_index": self.state_index,
            "residual": self.residual,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
        }


@dataclass
class BisectionStep:
    """One entry of the optional bisection trace"""
    step: int
    lo: float
    hi: float
    shift: float
    count: int


def inertia_below(h: BandMatrix, shift: float) -> int:
    """
    Count eigenvalues of h strictly below ``shift``.

    Sylvester's law of inertia applied to an LDL^T factorization of
    h - shift*I computed inside the band (no pivoting, so no fill).

    Raises:
        SingularPivotError: a pivot is exactly zero; the caller must move the shift
    """
    n, w = h.dim, h.bandwidth
    bands = [h.bands[d].tolist() for d in range(w + 1)]
    # low[d][k] = L[k + d, k]
    low = [[0.0] * n for _ in range(w + 1)]
    pivots = [0.0] * n
    negatives = 0
    for j in range(n):
        pivot = bands[0][j] - shift
        for k in range(max(0, j - w), j):
            l_jk = low[j - k][k]
            pivot -= l_jk * l_jk * pivots[k]
        if pivot == 0.0:
            raise SingularPivotError(shift, j)
        pivots[j] = pivot
        if pivot < 0.0:
            negatives += 1
        for i in range(j + 1, min(n, j + w + 1)):
            s = bands[i - j][j]
            for k in range(max(0, i - w), j):
                s -= low[i - k][k] * low[j - k][k] * pivots[k]
            low[i - j][j] = s / pivot
    return negatives


def count_below(h: BandMatrix, shift: float) -> int:
    """inertia_below with the deterministic retry on exactly singular pivots"""
    nudge = 4.0 * np.finfo(float).eps * max(abs(shift), np.finfo(float).tiny)
    trial = shift
    for _ in range(_MAX_PIVOT_RETRIES):
        try:
            return inertia_below(h, trial)
        except SingularPivotError:
            logger.warning("Zero pivot at shift %.17g, retrying at %.17g", trial, trial + nudge)
            trial += nudge
            nudge *= 2.0
    return inertia_below(h, trial)


def spectral_scale(h: BandMatrix) -> Tuple[float, float, float]:
    """Gershgorin bounds and the span used to scale all tolerances"""
    lo, hi = h.gershgorin_bounds()
    span = hi - lo
    if span <= 0.0:
        span = max(abs(lo), abs(hi), 1.0)
    return lo, hi, span


def eigenvalue_bracket(h: BandMatrix, state_index: int, settings: SolverSettings,
                       trace: Optional[List[BisectionStep]] = None) -> Tuple[float, float]:
    """
    Bracket the (state_index + 1)-th smallest eigenvalue by inertia bisection.

    Returns:
        (lo, hi) with count_below(lo) <= state_index < count_below(hi)
    """
    if not 0 <= state_index < h.dim:
        raise ConstructionError(f"state_index {state_index} outside 0..{h.dim - 1}")
    g_lo, g_hi, span = spectral_scale(h)
    pad = 1e-8 * span
    lo, hi = g_lo - pad, g_hi + pad
    width = settings.tol_eig * span
    for step in range(1, settings.max_bisect + 1):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        count = count_below(h, mid)
        if count > state_index:
            hi = mid
        else:
            lo = mid
        logger.debug("bisect step=%d lo=%.17g hi=%.17g count=%d", step, lo, hi, count)
        if trace is not None:
            trace.append(BisectionStep(step, lo, hi, mid, count))
    return lo, hi


def _start_vector(n: int) -> np.ndarray:
    # Constant vector with a small quasi-random ripple so no state is missed by symmetry.
    ripple = (np.arange(1, n + 1) * _GOLDEN) % 1.0 - 0.5
    v = 1.0 + 1e-3 * ripple
    return v / np.linalg.norm(v)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    # Components within 1e-8 of the largest magnitude count as tied; the first one wins.
    magnitude = np.abs(v)
    lead = int(np.argmax(magnitude >= magnitude.max() * (1.0 - 1e-8)))
    return -v if v[lead] < 0.0 else v


def _factor_shifted(h: BandMatrix, sigma: float, nudge: float):
    # Steps below ulp(sigma) would leave the shift where it is.
    nudge = max(nudge, 8.0 * np.finfo(float).eps * abs(sigma), np.finfo(float).tiny)
    for _ in range(_MAX_PIVOT_RETRIES):
        try:
            return splu(h.shifted(-sigma).to_sparse("csc")), sigma
        except RuntimeError:
            # exactly singular: sigma is an eigenvalue to working precision
            logger.debug("Singular shifted factor at %.17g, moving by %.3e", sigma, nudge)
            sigma += nudge
            nudge *= 2.0
    raise EigensolverError(f"shifted matrix stays singular near {sigma!r}", order=0)


def solve_state(h: BandMatrix, state_index: int, settings: Optional[SolverSettings] = None,
                trace: Optional[List[BisectionStep]] = None) -> EigenPair:
    """
    Solve the zero-order problem for one bound state.

    Inverse iteration runs until the residual drops below tol_eig * ||h||,
    then continues for up to _POLISH_STEPS more solves while the residual
    keeps decreasing, so the vector is accurate to roundoff and not just
    to the stopping tolerance.

    Args:
        h: Symmetric band matrix (the unperturbed operator)
        state_index: Number of eigenvalues strictly below the wanted one
        settings: Solver tolerances
        trace: Optional list collecting the bisection steps

    Returns:
        EigenPair with a unit vector whose largest component is positive.
        When several components tie in magnitude (within a relative 1e-8,
        as for antisymmetric states) the one with the lowest index is made
        positive.

    Raises:
        DegenerateState: a neighbour lies within degeneracy_gap * span
        EigensolverError: inverse iteration did not converge
    """
    settings = settings or SolverSettings()
    lo, hi = eigenvalue_bracket(h, state_index, settings, trace)
    _, _, span = spectral_scale(h)
    estimate = 0.5 * (lo + hi)

    gap = settings.degeneracy_gap * span
    below = count_below(h, estimate - gap)
    above = count_below(h, estimate + gap)
    if below < state_index or above > state_index + 1:
        raise DegenerateState(
            f"state {state_index} near E={estimate:.17g} has a neighbour within {gap:.3g} "
            f"(counts {below}..{above}); perturbation theory would fail here",
            energy=estimate, gap=gap)

    tolerance = settings.tol_eig * h.norm_inf()
    lu, sigma = _factor_shifted(h, estimate, settings.tol_eig * span)
    v = _start_vector(h.dim)
    energy, residual = estimate, float("inf")
    converged_at = None
    for iteration in range(1, settings.max_inverse_iter + _POLISH_STEPS + 1):
        w = lu.solve(v)
        trial = w / np.linalg.norm(w)
        hv = h.matvec(trial)
        trial_energy = float(trial @ hv)
        trial_residual = float(np.linalg.norm(hv - trial_energy * trial))
        logger.debug("inverse iteration %d: E=%.17g residual=%.3e",
                     iteration, trial_energy, trial_residual)
        if converged_at is not None and trial_residual >= residual:
            iteration -= 1
            break
        v, energy, residual = trial, trial_energy, trial_residual
        if converged_at is None:
            if residual <= tolerance:
                converged_at = iteration
            elif iteration >= settings.max_inverse_iter:
                break
        elif iteration - converged_at >= _POLISH_STEPS:
            break

    if converged_at is None:
        raise EigensolverError(
            f"inverse iteration stalled at residual {residual:.3e} > {tolerance:.3e}", order=0)

    v = _fix_sign(v)
    logger.debug("state %d solved: E=%.17g after %d iterations (sigma=%.17g)",
                 state_index, energy, iteration, sigma)
    return EigenPair(energy, v, state_index, residual, (lo, hi), iteration)


def ground_state(h: BandMatrix, settings: Optional[SolverSettings] = None) -> EigenPair:
    return solve_state(h, 0, settings)


def spectral_gap(h: BandMatrix, state_index: int, settings: Optional[SolverSettings] = None) -> float:
    """Distance from the state's eigenvalue to its nearest neighbour (bisection only)"""
    settings = settings or SolverSettings()
    centre = 0.5 * sum(eigenvalue_bracket(h, state_index, settings))
    gaps = []
    for neighbour in (state_index - 1, state_index + 1):
        if 0 <= neighbour < h.dim:
            gaps.append(abs(0.5 * sum(eigenvalue_bracket(h, neighbour, settings)) - centre))
    return min(gaps) if gaps else float("inf")
