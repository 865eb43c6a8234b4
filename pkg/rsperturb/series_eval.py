"""
Series evaluation - partial sums, smallest-term truncation, wave functions

The anharmonic series is asymptotic, not convergent, so partial sums are
reported term by term together with the index of the smallest term.
"""

from typing import Any, Dict, Optional, Sequence, Tuple
from dataclasses import dataclass, replace
import logging

import numpy as np
import pandas as pd

from .errors import ConstructionError
from .rs_hierarchy import PerturbationSeries

logger = logging.getLogger(__name__)

# Coefficients below this fraction of the largest one count as structurally zero.
NEGLIGIBLE_COEFFICIENT = 1e-12


@dataclass(frozen=True)
class PartialSumTrace:
    """Terms E_k mu^k and partial sums S_0..S_K at one coupling"""
    lam: float
    mu: float
    terms: Tuple[float, ...]
    sums: Tuple[float, ...]
    abs_terms: Tuple[float, ...]
    k_opt: int
    errors_vs_oracle: Optional[Tuple[float, ...]] = None

    @property
    def order(self) -> int:
        return len(self.sums) - 1

    def with_oracle(self, energy: float) -> "PartialSumTrace":
        """Attach |S_k - E(lambda)| for a directly computed energy"""
        return replace(self, errors_vs_oracle=tuple(abs(s - energy) for s in self.sums))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "k": np.arange(self.order + 1),
            "term": self.terms,
            "partial_sum": self.sums,
        })
        if self.errors_vs_oracle is not None:
            frame["oracle_error"] = self.errors_vs_oracle
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "terms": list(self.terms),
            "sums": list(self.sums),
            "k_opt": self.k_opt,
            "oracle_errors": list(self.errors_vs_oracle) if self.errors_vs_oracle else None,
        }


def smallest_term_index(abs_terms: Sequence[float],
                        coefficients: Optional[Sequence[float]] = None) -> int:
    """
    Index k >= 1 of the smallest term, ties going to the smaller k.

    Terms whose coefficient vanishes identically (odd orders of a parity
    symmetric problem) are skipped; with no candidates left every k >= 1
    competes.
    """
    if len(abs_terms) < 2:
        return 0
    candidates = list(range(1, len(abs_terms)))
    if coefficients is not None:
        scale = max(abs(c) for c in coefficients[1:])
        nonzero = [k for k in candidates if abs(coefficients[k]) > NEGLIGIBLE_COEFFICIENT * scale]
        if nonzero:
            candidates = nonzero
    return min(candidates, key=lambda k: (abs_terms[k], k))


def partial_sums(series: PerturbationSeries, lam: float) -> PartialSumTrace:
    """
    Accumulate S_k = sum_{j<=k} E_j mu^j at mu = lam - lambda_ref.

    Args:
        series: Computed perturbation series
        lam: Physical coupling

    Returns:
        PartialSumTrace with signed terms, sums and the smallest-term index
    """
    mu = series.expansion_variable(lam)
    terms, sums = [], []
    running = 0.0
    for k, energy in enumerate(series.energies):
        term = energy * mu ** k
        running += term
        terms.append(term)
        sums.append(running)
    abs_terms = tuple(abs(t) for t in terms)
    k_opt = smallest_term_index(abs_terms, series.energies)
    return PartialSumTrace(lam, mu, tuple(terms), tuple(sums), abs_terms, k_opt)


def optimal_truncation(series: PerturbationSeries, lam: float) -> Tuple[int, float]:
    """Smallest-term truncation: (k_opt, S_k_opt)"""
    if series.order < 1:
        raise ConstructionError("optimal truncation needs a series of order >= 1")
    trace = partial_sums(series, lam)
    return trace.k_opt, trace.sums[trace.k_opt]


def wavefunction_partial_sum(series: PerturbationSeries, lam: float, k: int) -> np.ndarray:
    """x + sum_{j=1..k} mu^j y_j, re-gauged to unit norm"""
    if not 0 <= k <= series.order:
        raise ConstructionError(f"k={k} outside 0..{series.order}")
    mu = series.expansion_variable(lam)
    psi = np.array(series.x, dtype=float, copy=True)
    for j in range(1, k + 1):
        psi += mu ** j * series.vector(j)
    return psi / np.linalg.norm(psi)
