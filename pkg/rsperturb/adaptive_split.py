"""
Adaptive Split - choosing H0 so that the corrections shrink

Policies rewrite a HamiltonianSplit into an equivalent one (same H(lambda)
for every lambda) with a different unperturbed part: recentered at another
reference coupling, truncated to a narrower band, or recentered step by step
toward the target coupling.
"""

from typing import Any, Dict, List, Optional
from dataclasses import dataclass, field
from enum import Enum
import logging

import numpy as np

from .errors import ConstructionError
from .operator_model import HamiltonianSplit, assemble_at, resplit
from .rs_hierarchy import PerturbationSeries, rs_series
from .zero_order import SolverSettings, solve_state

logger = logging.getLogger(__name__)


class SplitKind(Enum):
    """Available re-split policies"""
    NONE = "none"
    RECENTER_FULL = "recenter_full"
    BAND_TRUNCATE = "band_truncate"
    ITERATIVE_IMPROVE = "iterative_improve"


@dataclass(frozen=True)
class SplitPolicy:
    """
    How to re-split before solving.

    ``lambda0`` of None means "the target coupling of the run".
    """
    kind: SplitKind = SplitKind.NONE
    lambda0: Optional[float] = None
    keep_bandwidth: int = 0
    max_rounds: int = 8
    shrink_tol: float = 1e-2

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", SplitKind(self.kind))
        except ValueError as e:
            raise ConstructionError(f"unknown split policy: {self.kind!r}") from e
        if self.keep_bandwidth < 0:
            raise ConstructionError("keep_bandwidth must be >= 0")
        if self.max_rounds < 1:
            raise ConstructionError("max_rounds must be >= 1")
        if not self.shrink_tol > 0.0:
            raise ConstructionError("shrink_tol must be > 0")

    @property
    def label(self) -> str:
        if self.kind is SplitKind.BAND_TRUNCATE:
            return f"{self.kind.value}(w={self.keep_bandwidth})"
        return self.kind.value

    def reference(self, lambda_target: Optional[float]) -> float:
        lam = self.lambda0 if self.lambda0 is not None else lambda_target
        if lam is None:
            raise ConstructionError(f"policy {self.kind.value} needs lambda0 or a target coupling")
        return float(lam)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "lambda0": self.lambda0,
            "keep_bandwidth": self.keep_bandwidth,
            "max_rounds": self.max_rounds,
            "shrink_tol": self.shrink_tol,
        }


@dataclass(frozen=True)
class SplitQuality:
    """Size of the leading corrections at the target coupling (mu = target - lambda_ref)"""
    first_correction_energy: float
    first_correction_vector_norm: float
    effective_ratio: float
    lambda_ref: float = 0.0
    lambda_target: float = 0.0
    order: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "first_correction_energy": self.first_correction_energy,
            "first_correction_vector_norm": self.first_correction_vector_norm,
            "effective_ratio": self.effective_ratio,
            "lambda_ref": self.lambda_ref,
            "lambda_target": self.lambda_target,
            "K": self.order,
        }


@dataclass
class ImprovementTrace:
    """Result of IterativeImprove: final split and the accepted quality history"""
    split: HamiltonianSplit
    history: List[SplitQuality] = field(default_factory=list)
    references: List[float] = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.history) - 1


def split_quality(split: HamiltonianSplit, state_index: int, K: int, lambda_target: float,
                  settings: Optional[SolverSettings] = None) -> SplitQuality:
    """
    Run the hierarchy to order K and measure its corrections at the target.

    Args:
        split: Candidate split
        state_index: Expanded state
        K: Order for the effective ratio, K >= 1
        lambda_target: Coupling where the series will be evaluated
        settings: Solver tolerances

    Returns:
        SplitQuality with all entries non-negative
    """
    if K < 1:
        raise ConstructionError("split quality needs K >= 1")
    target = lambda_target if split.has_constant else None
    series = rs_series(split, state_index, K, settings, lambda_target=target)
    return quality_from_series(series, K, lambda_target)


def quality_from_series(series: PerturbationSeries, K: int, lambda_target: float) -> SplitQuality:
    """SplitQuality of an already computed series of order >= K >= 1"""
    if not 1 <= K <= series.order:
        raise ConstructionError(f"quality order K={K} outside 1..{series.order}")
    mu = series.expansion_variable(lambda_target)
    numerator = abs(series.energies[K] * mu ** K)
    denominator = abs(series.energies[K - 1] * mu ** (K - 1))
    if numerator == 0.0:
        ratio = 0.0
    elif denominator == 0.0:
        ratio = float("inf")
    else:
        ratio = numerator / denominator
    return SplitQuality(
        first_correction_energy=abs(mu * series.energies[1]),
        first_correction_vector_norm=abs(mu) * float(np.linalg.norm(series.vector(1))),
        effective_ratio=ratio,
        lambda_ref=series.lambda_ref,
        lambda_target=float(lambda_target),
        order=K,
    )


def _checked(split: HamiltonianSplit, state_index: int,
             settings: Optional[SolverSettings]) -> HamiltonianSplit:
    # The new H0 must have a solvable, non-degenerate state.
    solve_state(split.h0, state_index, settings)
    return split


def band_truncate(split: HamiltonianSplit, lambda0: float, keep_bandwidth: int) -> HamiltonianSplit:
    """
    H0 = band-w0 part of H(lambda0); the rest of H(lambda0) becomes the constant term.
    """
    total = assemble_at(split, lambda0)
    h0 = total.truncated(min(keep_bandwidth, total.bandwidth))
    remainder = total - h0
    return HamiltonianSplit(
        h0=h0,
        h1=split.h1,
        lambda_ref=lambda0,
        representation=split.representation,
        constant=None if remainder.is_zero() else remainder,
    )


def improve_split(split: HamiltonianSplit, policy: SplitPolicy, state_index: int, K: int,
                  lambda_target: float,
                  settings: Optional[SolverSettings] = None) -> ImprovementTrace:
    """
    Recenter toward the target along lambda_r = target - (target - lambda_ref) / 2^r.

    A round is kept only when first_correction_vector_norm drops by more than
    the relative shrink_tol; the first rejected round ends the search.
    """
    K = max(K, 1)
    best = split
    quality = split_quality(split, state_index, K, lambda_target, settings)
    trace = ImprovementTrace(split, [quality], [split.lambda_ref])
    distance = lambda_target - split.lambda_ref
    for r in range(1, policy.max_rounds + 1):
        lam_r = lambda_target - distance * 2.0 ** (-r)
        candidate = _checked(resplit(split, lam_r), state_index, settings)
        candidate_quality = split_quality(candidate, state_index, K, lambda_target, settings)
        threshold = quality.first_correction_vector_norm * (1.0 - policy.shrink_tol)
        if not candidate_quality.first_correction_vector_norm < threshold:
            logger.debug("round %d at lambda=%.6g rejected", r, lam_r)
            break
        best, quality = candidate, candidate_quality
        trace.history.append(quality)
        trace.references.append(lam_r)
        logger.debug("round %d accepted: lambda_ref=%.6g |y1|*|mu|=%.3e",
                     r, lam_r, quality.first_correction_vector_norm)
    trace.split = best
    logger.info("Iterative improvement: %d rounds accepted, lambda_ref=%.6g",
                trace.rounds, best.lambda_ref)
    return trace


def apply_policy(split: HamiltonianSplit, policy: SplitPolicy, state_index: int,
                 settings: Optional[SolverSettings] = None,
                 lambda_target: Optional[float] = None, K: int = 1) -> HamiltonianSplit:
    """
    Rewrite ``split`` according to ``policy``.

    Every result satisfies assemble_at(new, lam) == assemble_at(split, lam) up
    to rounding for all lam.

    Raises:
        DegenerateState: the new H0 is degenerate at the requested state
    """
    if policy.kind is SplitKind.NONE:
        return split
    if policy.kind is SplitKind.RECENTER_FULL:
        new = resplit(split, policy.reference(lambda_target))
    elif policy.kind is SplitKind.BAND_TRUNCATE:
        new = band_truncate(split, policy.reference(lambda_target), policy.keep_bandwidth)
    else:
        if lambda_target is None:
            raise ConstructionError("iterative_improve needs a target coupling")
        return improve_split(split, policy, state_index, K, lambda_target, settings).split
    logger.info("Applied policy %s: lambda_ref=%.6g, h0 bandwidth=%d",
                policy.label, new.lambda_ref, new.h0.bandwidth)
    return _checked(new, state_index, settings)
