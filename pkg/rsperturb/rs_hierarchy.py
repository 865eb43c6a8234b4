"""
Rayleigh-Schrodinger hierarchy as one set of bordered linear systems

Order k of the hierarchy reads

    (H0 - E0) y_k = E_k x + tau_k,
    tau_k = -H1 y_{k-1} + sum_{j=1}^{k-1} E_j y_{k-j},   y_0 = x,

with the intermediate gauge <x, y_k> = 0. E_k comes from the solvability
condition E_k = -<x, tau_k>; y_k from the non-singular bordered system

    [[H0 - E0, x], [x^T, 0]] [y_k; mu] = [E_k x + tau_k; 0],

whose sparse LU is computed once per series and reused for every order.
The multiplier mu must vanish to working accuracy.
"""

from typing import Any, Dict, Optional, Tuple
from dataclasses import dataclass, field, replace
from enum import Enum
import logging

import numpy as np
import scipy.sparse
from scipy.sparse.linalg import LinearOperator, onenormest, splu

from .errors import ConstructionError, IllConditioned, SolverRefusal
from .operator_model import BandMatrix, BasisSpec, HamiltonianSplit
from .zero_order import EigenPair, SolverSettings, solve_state

logger = logging.getLogger(__name__)

TAIL_WEIGHT_LIMIT = 1e-8
CONDITION_LIMIT = 1.0 / (100.0 * np.finfo(float).eps)


class NormalizationKind(Enum):
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class NormalizationPolicy:
    """
    Gauge of the corrections. Only intermediate normalization
    (<x, psi_k> = 0 for k >= 1) is solved for; unit-norm re-gauging happens
    at evaluation time in series_eval.
    """
    kind: NormalizationKind = NormalizationKind.INTERMEDIATE

    def to_dict(self) -> str:
        return self.kind.value


@dataclass(frozen=True, eq=False)
class HierarchyRHS:
    """Known lower-order aggregate tau of order k"""
    tau: np.ndarray
    order: int


@dataclass(frozen=True, eq=False)
class PerturbationSeries:
    """
    Energies E_0..E_K and corrections y_1..y_K of one state.

    ``residuals[k]`` is the independently recomputed defect of order k
    (index 0 holds the eigenpair residual); ``multipliers[k]`` the bordered
    system's solvability multiplier.
    """
    eigenpair: EigenPair
    lambda_ref: float
    energies: Tuple[float, ...]
    vectors: Tuple[np.ndarray, ...] = ()
    residuals: Tuple[float, ...] = ()
    multipliers: Tuple[float, ...] = ()
    normalization: NormalizationPolicy = field(default_factory=NormalizationPolicy)
    condition: float = float("nan")
    tail_weight: Optional[float] = None
    folded_target: Optional[float] = None

    @property
    def order(self) -> int:
        return len(self.energies) - 1

    @property
    def state_index(self) -> int:
        return self.eigenpair.state_index

    @property
    def x(self) -> np.ndarray:
        return self.eigenpair.vector

    def vector(self, k: int) -> np.ndarray:
        """y_k, with y_0 the zero-order vector"""
        if k == 0:
            return self.eigenpair.vector
        return self.vectors[k - 1]

    def expansion_variable(self, lam: float) -> float:
        if self.folded_target is not None and lam != self.folded_target:
            raise ConstructionError(
                f"series folded at lambda={self.folded_target!r} cannot be evaluated at {lam!r}")
        return lam - self.lambda_ref

    def extended(self, energy: float, vector: np.ndarray, residual: float,
                 multiplier: float) -> "PerturbationSeries":
        vector = np.array(vector, dtype=float, copy=True)
        vector.setflags(write=False)
        return replace(
            self,
            energies=self.energies + (float(energy),),
            vectors=self.vectors + (vector,),
            residuals=self.residuals + (float(residual),),
            multipliers=self.multipliers + (float(multiplier),),
        )

    def to_dict(self, include_vectors: bool = False) -> Dict[str, Any]:
        data = {
            "lambda_ref": self.lambda_ref,
            "state_index": self.state_index,
            "normalization": self.normalization.to_dict(),
            "order": self.order,
            "energies": list(self.energies),
            "residuals": list(self.residuals),
            "multipliers": list(self.multipliers),
            "tail_weight": self.tail_weight,
            "folded_target": self.folded_target,
        }
        if include_vectors:
            data["vectors"] = {
                "zero_order": self.x.tolist(),
                "corrections": [y.tolist() for y in self.vectors],
            }
        return data


class BorderedSystem:
    """
    Sparse LU of [[H0 - E0, x], [x^T, 0]], shared by every order of a series.

    Raises IllConditioned when the factorization breaks down or the 1-norm
    condition estimate exceeds 1 / (100 eps): E0 is then (quasi-)degenerate.
    """

    def __init__(self, h0: BandMatrix, eigenpair: EigenPair, order: int = 1):
        n = h0.dim
        x = eigenpair.vector
        border = scipy.sparse.csc_matrix(x.reshape(n, 1))
        shifted = h0.shifted(-eigenpair.energy).to_sparse("csc")
        self.matrix = scipy.sparse.bmat([[shifted, border], [border.T, None]], format="csc")
        self.dim = n
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as e:
            raise IllConditioned(f"bordered matrix is exactly singular ({e})", order=order) from e
        self.condition = self._estimate_condition()
        logger.debug("bordered system: dim=%d condition~%.3e", n + 1, self.condition)
        if not self.condition <= CONDITION_LIMIT:
            raise IllConditioned(
                f"bordered matrix condition estimate {self.condition:.3e} exceeds "
                f"{CONDITION_LIMIT:.3e}; zero-order state is quasi-degenerate",
                order=order, condition=self.condition)

    def _estimate_condition(self) -> float:
        norm = float(abs(self.matrix).sum(axis=0).max())
        inverse = LinearOperator(
            self.matrix.shape,
            matvec=lambda v: self._lu.solve(np.asarray(v, dtype=float)),
            rmatvec=lambda v: self._lu.solve(np.asarray(v, dtype=float), trans="T"),
            dtype=float,
        )
        # t=1 keeps the estimate deterministic (no random probe columns)
        return norm * float(onenormest(inverse, t=1))

    def solve(self, rhs: np.ndarray) -> Tuple[np.ndarray, float]:
        solution = self._lu.solve(np.append(rhs, 0.0))
        return solution[:self.dim], float(solution[self.dim])


def _require_plain(split: HamiltonianSplit):
    if split.has_constant:
        raise ConstructionError("split carries a constant term; fold it with split.folded_at(lambda)")


def build_rhs(split: HamiltonianSplit, series: PerturbationSeries, k: int) -> HierarchyRHS:
    """
    Assemble tau_k from orders 0..k-1.

    Args:
        split: Split whose h1 drives the hierarchy
        series: Series holding at least orders 0..k-1
        k: Order to build (k >= 1)

    Returns:
        HierarchyRHS with tau_k = -H1 y_{k-1} + sum_{j=1}^{k-1} E_j y_{k-j}
    """
    _require_plain(split)
    if not 1 <= k <= series.order + 1:
        raise ConstructionError(f"order {k} needs orders 0..{k - 1}; series has {series.order}")
    tau = -split.h1.matvec(series.vector(k - 1))
    for j in range(1, k):
        tau += series.energies[j] * series.vector(k - j)
    return HierarchyRHS(tau, k)


def _solve_order(split: HamiltonianSplit, eigenpair: EigenPair, series: PerturbationSeries,
                 k: int, settings: SolverSettings,
                 system: BorderedSystem) -> Tuple[float, np.ndarray, float]:
    x = eigenpair.vector
    tau = build_rhs(split, series, k).tau
    energy = -float(x @ tau)
    y, multiplier = system.solve(energy * x + tau)
    tau_norm = float(np.linalg.norm(tau))
    if abs(multiplier) > settings.mu_tol * tau_norm:
        raise IllConditioned(
            f"solvability multiplier {multiplier:.3e} exceeds {settings.mu_tol:.1e} * |tau| "
            f"= {settings.mu_tol * tau_norm:.3e}", order=k, condition=system.condition)
    y = y - (x @ y) * x
    logger.debug("order %d: E=%.17g mu=%.3e |y|=%.6g", k, energy, multiplier, np.linalg.norm(y))
    return energy, y, multiplier


def solve_order(split: HamiltonianSplit, eigenpair: EigenPair, series: PerturbationSeries,
                k: int, settings: Optional[SolverSettings] = None,
                system: Optional[BorderedSystem] = None) -> Tuple[float, np.ndarray]:
    """
    Solve one order of the hierarchy.

    Returns:
        (E_k, y_k) with <x, y_k> = 0

    Raises:
        IllConditioned: bordered system singular or multiplier check failed
    """
    settings = settings or SolverSettings()
    system = system or BorderedSystem(split.h0, eigenpair, order=k)
    energy, y, _ = _solve_order(split, eigenpair, series, k, settings, system)
    return energy, y


def residual_norm(split: HamiltonianSplit, eigenpair: EigenPair,
                  series: PerturbationSeries, k: int) -> float:
    """||(H0 - E0) y_k - E_k x - tau_k||_2, recomputed from the stored series"""
    if not 1 <= k <= series.order:
        raise ConstructionError(f"order {k} not present (series order {series.order})")
    tau = build_rhs(split, series, k).tau
    y = series.vector(k)
    defect = (split.h0.matvec(y) - eigenpair.energy * y
              - series.energies[k] * eigenpair.vector - tau)
    return float(np.linalg.norm(defect))


def _tail_weight(split: HamiltonianSplit, eigenpair: EigenPair) -> Optional[float]:
    if not isinstance(split.representation, BasisSpec):
        return None
    # last two components: parity zeroes every other one
    weight = float(np.max(np.abs(eigenpair.vector[-2:])))
    if weight > TAIL_WEIGHT_LIMIT:
        logger.warning(
            "Basis truncation: tail component of state %d is %.3e (> %.0e); "
            "increase n_basis", eigenpair.state_index, weight, TAIL_WEIGHT_LIMIT)
    return weight


def rs_series(split: HamiltonianSplit, state_index: int, order: int,
              settings: Optional[SolverSettings] = None,
              lambda_target: Optional[float] = None) -> PerturbationSeries:
    """
    Energy and wave-function corrections of one state up to ``order``.

    Args:
        split: Hamiltonian split (a constant term requires lambda_target)
        state_index: Which bound state of h0 to expand
        order: K >= 0
        settings: Solver tolerances
        lambda_target: Coupling at which a constant-bearing split is folded

    Returns:
        PerturbationSeries with per-order residuals

    Raises:
        DegenerateState, IllConditioned, EigensolverError: with ``order`` attached
    """
    settings = settings or SolverSettings()
    if order < 0:
        raise ConstructionError(f"order must be non-negative, got {order}")
    work, folded_target = split, None
    if split.has_constant:
        if lambda_target is None:
            raise ConstructionError("split carries a constant term; lambda_target is required")
        work, folded_target = split.folded_at(lambda_target), lambda_target
    elif split.constant is not None:
        work = HamiltonianSplit(split.h0, split.h1, split.lambda_ref, split.representation)

    try:
        eigenpair = solve_state(work.h0, state_index, settings)
    except SolverRefusal as e:
        raise e.at_order(0)

    series = PerturbationSeries(
        eigenpair=eigenpair,
        lambda_ref=work.lambda_ref,
        energies=(eigenpair.energy,),
        residuals=(eigenpair.residual,),
        multipliers=(0.0,),
        tail_weight=_tail_weight(work, eigenpair),
        folded_target=folded_target,
    )
    if order == 0:
        return series

    system = BorderedSystem(work.h0, eigenpair, order=1)
    series = replace(series, condition=system.condition)
    h0_norm = work.h0.norm_inf()
    for k in range(1, order + 1):
        try:
            energy, y, multiplier = _solve_order(work, eigenpair, series, k, settings, system)
        except SolverRefusal as e:
            raise e.at_order(k)
        series = series.extended(energy, y, float("nan"), multiplier)
        residual = residual_norm(work, eigenpair, series, k)
        bound = settings.tol_hier * h0_norm * max(1.0, float(np.linalg.norm(y)))
        if residual > bound:
            raise IllConditioned(
                f"hierarchy residual {residual:.3e} exceeds {bound:.3e}",
                order=k, condition=system.condition)
        series = replace(series, residuals=series.residuals[:-1] + (residual,))

    logger.info("Series for state %d done: K=%d, E0=%.17g, E1=%.17g",
                state_index, order, series.energies[0], series.energies[1])
    return series
