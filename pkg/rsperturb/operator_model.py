"""
Operator Model - Hamiltonian splits as symmetric band matrices

Builds the two representations of -d^2/dx^2 + V(x) used throughout the engine:
a central-difference lattice (tridiagonal, non-diagonal H0) and the truncated
harmonic-oscillator basis (diagonal H0, banded x^4 perturbation). A split is the
pair (H0, H1) plus the reference coupling lambda_ref, so that

    H(lambda) = H0 + C + (lambda - lambda_ref) * H1

with C an optional constant remainder (zero unless a band-truncation policy
produced the split).
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
from dataclasses import dataclass
from enum import Enum
import json
import logging

import numpy as np
from numpy.polynomial import polynomial as P
import scipy.sparse

from .errors import ConstructionError

logger = logging.getLogger(__name__)


class PotentialKind(Enum):
    """Supported potential families"""
    QUARTIC = "quartic"
    POLYNOMIAL = "polynomial"


class BasisKind(Enum):
    HARMONIC_OSCILLATOR = "harmonic_oscillator"


@dataclass(frozen=True, eq=False)
class BandMatrix:
    """
    Symmetric matrix stored by bandwidth.

    ``bands[d, i]`` holds A[i + d, i] == A[i, i + d]; row 0 is the diagonal.
    Slots past the end of each sub-diagonal are kept at zero, and the array
    is read-only once the matrix is built.
    """
    bands: np.ndarray

    def __post_init__(self):
        bands = np.array(self.bands, dtype=float, copy=True)
        if bands.ndim == 1:
            bands = bands[np.newaxis, :]
        if bands.ndim != 2 or bands.shape[0] < 1 or bands.shape[1] < 1:
            raise ConstructionError(f"band storage must be (w+1, dim), got shape {bands.shape}")
        dim = bands.shape[1]
        if bands.shape[0] - 1 >= dim:
            raise ConstructionError(
                f"bandwidth {bands.shape[0] - 1} must be smaller than dim {dim}")
        if not np.all(np.isfinite(bands)):
            raise ConstructionError("band entries must be finite")
        for d in range(1, bands.shape[0]):
            bands[d, dim - d:] = 0.0
        bands.setflags(write=False)
        object.__setattr__(self, "bands", bands)

    @property
    def dim(self) -> int:
        return self.bands.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.bands.shape[0] - 1

    # Construction helpers

    @classmethod
    def from_diagonals(cls, diagonals: Sequence[Sequence[float]]) -> "BandMatrix":
        """Build from [diag, sub1, sub2, ...] with len(sub_d) == dim - d"""
        if len(diagonals) == 0:
            raise ConstructionError("at least the main diagonal is required")
        dim = len(diagonals[0])
        bands = np.zeros((len(diagonals), dim))
        for d, values in enumerate(diagonals):
            values = np.asarray(values, dtype=float)
            if values.shape != (dim - d,):
                raise ConstructionError(
                    f"sub-diagonal {d} must have length {dim - d}, got {values.shape}")
            bands[d, :dim - d] = values
        return cls(bands)

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> "BandMatrix":
        return cls(np.asarray(values, dtype=float)[np.newaxis, :])

    @classmethod
    def identity(cls, dim: int, scale: float = 1.0) -> "BandMatrix":
        return cls.diagonal(np.full(dim, scale))

    @classmethod
    def from_dense(cls, matrix: np.ndarray, bandwidth: Optional[int] = None,
                   sym_tol: float = 1e-12) -> "BandMatrix":
        """
        Build from a dense symmetric matrix.

        Args:
            matrix: Square array; symmetric to within sym_tol * max|A|
            bandwidth: Declared bandwidth; inferred from the nonzero pattern if None

        Returns:
            BandMatrix holding the symmetrized band of ``matrix``
        """
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConstructionError(f"matrix must be square, got shape {a.shape}")
        scale = max(float(np.max(np.abs(a))), 1.0) if a.size else 1.0
        if np.max(np.abs(a - a.T)) > sym_tol * scale:
            raise ConstructionError("matrix is not symmetric")
        a = 0.5 * (a + a.T)
        dim = a.shape[0]
        rows, cols = np.nonzero(a)
        occupied = int(np.max(np.abs(rows - cols))) if rows.size else 0
        if bandwidth is None:
            bandwidth = occupied
        elif occupied > bandwidth:
            raise ConstructionError(
                f"entries found at distance {occupied} outside bandwidth {bandwidth}")
        bandwidth = min(bandwidth, dim - 1)
        return cls.from_diagonals([np.diagonal(a, -d) for d in range(bandwidth + 1)])

    # Views

    def diagonals(self) -> List[np.ndarray]:
        return [self.bands[d, :self.dim - d] for d in range(self.bandwidth + 1)]

    def dense(self) -> np.ndarray:
        out = np.diag(self.bands[0])
        for d in range(1, self.bandwidth + 1):
            sub = self.bands[d, :self.dim - d]
            out += np.diag(sub, -d) + np.diag(sub, d)
        return out

    def to_sparse(self, format: str = "csc") -> scipy.sparse.spmatrix:
        diagonals, offsets = [self.bands[0]], [0]
        for d in range(1, self.bandwidth + 1):
            sub = self.bands[d, :self.dim - d]
            diagonals += [sub, sub]
            offsets += [-d, d]
        return scipy.sparse.diags(diagonals, offsets, shape=(self.dim, self.dim), format=format)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"vector of length {self.dim} expected, got {v.shape}")
        y = self.bands[0] * v
        n = self.dim
        for d in range(1, self.bandwidth + 1):
            sub = self.bands[d, :n - d]
            y[:n - d] += sub * v[d:]
            y[d:] += sub * v[:n - d]
        return y

    def to_bands_list(self) -> List[List[float]]:
        return [diag.tolist() for diag in self.diagonals()]

    @classmethod
    def from_bands_list(cls, bands: Sequence[Sequence[float]]) -> "BandMatrix":
        return cls.from_diagonals(bands)

    # Arithmetic

    def padded(self, bandwidth: int) -> np.ndarray:
        """Band storage widened with zero sub-diagonals up to ``bandwidth``"""
        out = np.zeros((bandwidth + 1, self.dim))
        out[:self.bandwidth + 1] = self.bands
        return out

    def add(self, other: "BandMatrix", scale: float = 1.0) -> "BandMatrix":
        """Return self + scale * other; bandwidth is the larger of the two"""
        if other.dim != self.dim:
            raise ConstructionError(f"dimension mismatch: {self.dim} vs {other.dim}")
        width = max(self.bandwidth, other.bandwidth)
        return BandMatrix(self.padded(width) + scale * other.padded(width))

    def scaled(self, factor: float) -> "BandMatrix":
        return BandMatrix(factor * self.bands)

    def shifted(self, c: float) -> "BandMatrix":
        """Return self + c * I"""
        bands = self.bands.copy()
        bands[0] += c
        return BandMatrix(bands)

    def truncated(self, keep_bandwidth: int) -> "BandMatrix":
        """Keep only the diagonal and the first ``keep_bandwidth`` sub-diagonals"""
        if keep_bandwidth < 0:
            raise ConstructionError("keep_bandwidth must be non-negative")
        return BandMatrix(self.bands[:keep_bandwidth + 1])

    def __add__(self, other: "BandMatrix") -> "BandMatrix":
        return self.add(other)

    def __sub__(self, other: "BandMatrix") -> "BandMatrix":
        return self.add(other, -1.0)

    def __mul__(self, factor: float) -> "BandMatrix":
        return self.scaled(float(factor))

    __rmul__ = __mul__

    def __neg__(self) -> "BandMatrix":
        return self.scaled(-1.0)

    def equals(self, other: "BandMatrix") -> bool:
        """Entrywise equality, ignoring explicit zero sub-diagonals"""
        if other.dim != self.dim:
            return False
        width = max(self.bandwidth, other.bandwidth)
        return bool(np.array_equal(self.padded(width), other.padded(width)))

    def is_zero(self) -> bool:
        return not np.any(self.bands)

    # Norms and bounds

    def abs_row_sums(self) -> np.ndarray:
        return BandMatrix(np.abs(self.bands)).matvec(np.ones(self.dim))

    def norm_inf(self) -> float:
        return float(np.max(self.abs_row_sums()))

    def norm_max(self) -> float:
        return float(np.max(np.abs(self.bands)))

    def gershgorin_bounds(self) -> Tuple[float, float]:
        centers = self.bands[0]
        radii = self.abs_row_sums() - np.abs(centers)
        return float(np.min(centers - radii)), float(np.max(centers + radii))


@dataclass(frozen=True)
class PotentialSpec:
    """
    Polynomial potential V(x; lambda) = sum c_m x^m + lambda * sum d_m x^m.

    Coefficients run from degree 0 upward. ``PotentialSpec.quartic()`` is the
    anharmonic oscillator V = x^2 + lambda x^4.
    """
    kind: PotentialKind = PotentialKind.POLYNOMIAL
    coefficients: Tuple[float, ...] = ()
    perturbation_coefficients: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "perturbation_coefficients",
                           tuple(float(c) for c in self.perturbation_coefficients))
        if self.kind is PotentialKind.QUARTIC and (
                self.coefficients != (0.0, 0.0, 1.0)
                or self.perturbation_coefficients != (0.0, 0.0, 0.0, 0.0, 1.0)):
            raise ConstructionError("quartic potential is fixed to x^2 + lambda x^4")
        nonzero = [m for m, c in enumerate(self.coefficients) if c != 0.0]
        # Zero potential is allowed: the Dirichlet lattice is a box and still binds.
        if nonzero:
            top = nonzero[-1]
            if top % 2 != 0 or self.coefficients[top] <= 0.0:
                raise ConstructionError(
                    "potential is not confining: leading coefficient must be even-degree and positive")

    @classmethod
    def quartic(cls) -> "PotentialSpec":
        return cls(PotentialKind.QUARTIC, (0.0, 0.0, 1.0), (0.0, 0.0, 0.0, 0.0, 1.0))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float],
                   perturbation_coefficients: Sequence[float] = ()) -> "PotentialSpec":
        return cls(PotentialKind.POLYNOMIAL, tuple(coefficients), tuple(perturbation_coefficients))

    def unperturbed(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.coefficients:
            return np.zeros_like(x)
        return P.polyval(x, self.coefficients)

    def perturbation(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.perturbation_coefficients:
            return np.zeros_like(x)
        return P.polyval(x, self.perturbation_coefficients)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "coefficients": list(self.coefficients),
            "perturbation_coefficients": list(self.perturbation_coefficients),
        }


@dataclass(frozen=True)
class LatticeSpec:
    """Uniform grid of N interior points; Dirichlet zeros at x_min and x_max"""
    x_min: float = -8.0
    x_max: float = 8.0
    n_points: int = 400

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ConstructionError("lattice endpoints must be finite")
        if self.x_min >= self.x_max:
            raise ConstructionError(f"x_min ({self.x_min}) must be below x_max ({self.x_max})")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ConstructionError(f"lattice needs at least 3 points, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points + 1)

    def grid(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(1, self.n_points + 1)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "lattice", "x_min": self.x_min, "x_max": self.x_max,
                "n_points": self.n_points}


@dataclass(frozen=True)
class BasisSpec:
    """Truncated basis of the lambda = 0 harmonic-oscillator eigenstates |0>..|N-1>"""
    n_basis: int = 64
    kind: BasisKind = BasisKind.HARMONIC_OSCILLATOR

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if int(self.n_basis) != self.n_basis or self.n_basis < 2:
            raise ConstructionError(f"basis needs at least 2 states, got {self.n_basis}")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "basis", "basis": self.kind.value, "n_basis": self.n_basis}


Representation = Optional[Union[LatticeSpec, BasisSpec]]


@dataclass(frozen=True, eq=False)
class HamiltonianSplit:
    """
    Decomposition H(lambda) = h0 + constant + (lambda - lambda_ref) * h1.

    ``representation`` is None for splits given directly as matrices
    (the builtin 2x2 toy, random test splits).
    """
    h0: BandMatrix
    h1: BandMatrix
    lambda_ref: float = 0.0
    representation: Representation = None
    constant: Optional[BandMatrix] = None

    def __post_init__(self):
        if self.h0.dim != self.h1.dim:
            raise ConstructionError(f"h0 and h1 dimensions differ: {self.h0.dim} vs {self.h1.dim}")
        if self.constant is not None and self.constant.dim != self.h0.dim:
            raise ConstructionError("constant term dimension differs from h0")
        if not np.isfinite(self.lambda_ref):
            raise ConstructionError("lambda_ref must be finite")
        object.__setattr__(self, "lambda_ref", float(self.lambda_ref))

    @property
    def dim(self) -> int:
        return self.h0.dim

    @property
    def bandwidth(self) -> int:
        widths = [self.h0.bandwidth, self.h1.bandwidth]
        if self.constant is not None:
            widths.append(self.constant.bandwidth)
        return max(widths)

    @property
    def has_constant(self) -> bool:
        return self.constant is not None and not self.constant.is_zero()

    def folded_at(self, lambda_target: float) -> "HamiltonianSplit":
        """
        Absorb the constant term into the perturbation at unit scaling.

        The folded split reproduces H exactly at ``lambda_target`` only, where
        its expansion variable equals one.
        """
        perturbation = self.h1.scaled(lambda_target - self.lambda_ref)
        if self.constant is not None:
            perturbation = perturbation + self.constant
        return HamiltonianSplit(self.h0, perturbation, lambda_target - 1.0, self.representation)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "dim": self.dim,
            "bandwidth": self.bandwidth,
            "h0_bands": self.h0.to_bands_list(),
            "h1_bands": self.h1.to_bands_list(),
            "lambda_ref": self.lambda_ref,
            "representation": _representation_to_dict(self.representation),
        }
        if self.constant is not None:
            data["constant_bands"] = self.constant.to_bands_list()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HamiltonianSplit":
        try:
            h0 = BandMatrix.from_bands_list(data["h0_bands"])
            h1 = BandMatrix.from_bands_list(data["h1_bands"])
            constant = data.get("constant_bands")
            split = cls(
                h0=h0,
                h1=h1,
                lambda_ref=float(data["lambda_ref"]),
                representation=_representation_from_dict(data.get("representation")),
                constant=BandMatrix.from_bands_list(constant) if constant is not None else None,
            )
        except (KeyError, TypeError) as e:
            raise ConstructionError(f"malformed split document: {e}") from e
        if split.dim != data.get("dim", split.dim):
            raise ConstructionError("declared dim does not match the stored bands")
        return split

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "HamiltonianSplit":
        return cls.from_dict(json.loads(text))


def _representation_to_dict(rep: Representation) -> Dict[str, Any]:
    if rep is None:
        return {"kind": "matrix"}
    return rep.to_dict()


def _representation_from_dict(data: Optional[Dict[str, Any]]) -> Representation:
    if not data or data.get("kind") == "matrix":
        return None
    if data["kind"] == "lattice":
        return LatticeSpec(data["x_min"], data["x_max"], data["n_points"])
    if data["kind"] == "basis":
        return BasisSpec(data["n_basis"], BasisKind(data.get("basis", "harmonic_oscillator")))
    raise ConstructionError(f"unknown representation kind: {data['kind']!r}")


def build_lattice_split(lattice: LatticeSpec, potential: PotentialSpec) -> HamiltonianSplit:
    """
    Central-difference discretization of -d^2/dx^2 + V(x).

    Args:
        lattice: Grid with Dirichlet endpoints
        potential: V split into its lambda-independent and lambda-linear parts

    Returns:
        Split with tridiagonal h0 and diagonal h1, lambda_ref = 0
    """
    x = lattice.grid()
    inv_h2 = 1.0 / lattice.spacing ** 2
    n = lattice.n_points
    h0 = BandMatrix.from_diagonals([
        2.0 * inv_h2 + potential.unperturbed(x),
        np.full(n - 1, -inv_h2),
    ])
    h1 = BandMatrix.diagonal(potential.perturbation(x))
    logger.info("Built lattice split: N=%d, h=%.6g on [%g, %g]",
                n, lattice.spacing, lattice.x_min, lattice.x_max)
    return HamiltonianSplit(h0, h1, 0.0, lattice)


def position_matrix(n_basis: int) -> np.ndarray:
    """Dense oscillator-basis matrix of x: X[n, n+1] = sqrt((n + 1) / 2)"""
    off = np.sqrt(np.arange(1, n_basis) / 2.0)
    return np.diag(off, 1) + np.diag(off, -1)


def oscillator_moment(n_basis: int, power: int) -> np.ndarray:
    """
    Exact matrix elements <m|x^power|n> for m, n < n_basis.

    X is built in a basis padded by power // 2 states so that no path of the
    product leaves it; the leading block is then free of truncation error.
    """
    padded = position_matrix(n_basis + power // 2)
    moment = np.linalg.matrix_power(padded, power)
    return moment[:n_basis, :n_basis]


def build_oscillator_split(basis: BasisSpec, potential: PotentialSpec) -> HamiltonianSplit:
    """
    Anharmonic oscillator in the harmonic-oscillator basis.

    h0 = diag(2n + 1) and h1 = <m|x^4|n>, nonzero only for |m - n| in {0, 2, 4}.
    """
    if potential.kind is not PotentialKind.QUARTIC:
        raise ConstructionError("oscillator basis supports the quartic potential only")
    n = basis.n_basis
    h0 = BandMatrix.diagonal(2.0 * np.arange(n) + 1.0)
    h1 = BandMatrix.from_dense(oscillator_moment(n, 4), bandwidth=min(4, n - 1))
    logger.info("Built oscillator split: N=%d basis states", n)
    return HamiltonianSplit(h0, h1, 0.0, basis)


def toy_split() -> HamiltonianSplit:
    """Builtin 2x2 model h0 = diag(0, 2), h1 = [[0, 1], [1, 0]]; E(lambda) = 1 - sqrt(1 + lambda^2)"""
    h0 = BandMatrix.diagonal([0.0, 2.0])
    h1 = BandMatrix.from_diagonals([[0.0, 0.0], [1.0]])
    return HamiltonianSplit(h0, h1, 0.0, None)


def assemble_at(split: HamiltonianSplit, lam: float) -> BandMatrix:
    """Total operator H(lam) = h0 + C + (lam - lambda_ref) * h1"""
    total = split.h0.add(split.h1, lam - split.lambda_ref)
    if split.constant is not None:
        total = total + split.constant
    return total


def resplit(split: HamiltonianSplit, lambda0: float) -> HamiltonianSplit:
    """
    Re-center the split at a new reference coupling.

    The new h0 is the full H(lambda0) (constant term folded in), h1 is kept,
    so assemble_at gives the same operator for every lambda.
    """
    return HamiltonianSplit(
        h0=assemble_at(split, lambda0),
        h1=split.h1,
        lambda_ref=lambda0,
        representation=split.representation,
    )
