"""
Run configuration - one JSON document per run, validated with pydantic

Unknown keys are rejected at every level. Environment variables (loaded
from a .env file by the command-line entry point) only supply defaults
that the document does not cover: RSPT_OUT_DIR and RSPT_LOG_LEVEL.
"""

from typing import List, Literal, Optional
import hashlib
import json
import os

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .adaptive_split import SplitKind, SplitPolicy
from .operator_model import (
    BasisSpec,
    HamiltonianSplit,
    LatticeSpec,
    PotentialKind,
    PotentialSpec,
    build_lattice_split,
    build_oscillator_split,
    toy_split,
)
from .zero_order import SolverSettings

DEFAULT_OUT_DIR = "out"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialConfig(_Strict):
    kind: Literal["quartic", "polynomial"] = "quartic"
    coefficients: List[float] = Field(default_factory=list)
    perturbation_coefficients: List[float] = Field(default_factory=list)

    def to_spec(self) -> PotentialSpec:
        if self.kind == PotentialKind.QUARTIC.value:
            return PotentialSpec.quartic()
        return PotentialSpec.polynomial(self.coefficients, self.perturbation_coefficients)


class LatticeConfig(_Strict):
    x_min: float = -8.0
    x_max: float = 8.0
    n_points: int = 400


class BasisConfig(_Strict):
    n_basis: int = 64


class ModelConfig(_Strict):
    representation: Literal["oscillator", "lattice", "toy2x2"] = "oscillator"
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    lattice: LatticeConfig = Field(default_factory=LatticeConfig)
    basis: BasisConfig = Field(default_factory=BasisConfig)

    def build_split(self) -> HamiltonianSplit:
        """Construct the split named by ``representation``"""
        if self.representation == "toy2x2":
            return toy_split()
        potential = self.potential.to_spec()
        if self.representation == "lattice":
            lattice = LatticeSpec(self.lattice.x_min, self.lattice.x_max, self.lattice.n_points)
            return build_lattice_split(lattice, potential)
        return build_oscillator_split(BasisSpec(self.basis.n_basis), potential)


class PolicyConfig(_Strict):
    kind: Literal["none", "recenter_full", "band_truncate", "iterative_improve"] = "none"
    lambda0: Optional[float] = None
    keep_bandwidth: int = Field(default=0, ge=0)
    max_rounds: int = Field(default=8, ge=1)
    shrink_tol: float = Field(default=1e-2, gt=0.0)

    def to_policy(self) -> SplitPolicy:
        return SplitPolicy(SplitKind(self.kind), self.lambda0, self.keep_bandwidth,
                           self.max_rounds, self.shrink_tol)


class OracleConfig(_Strict):
    enabled: bool = True
    fd_step: float = Field(default=1e-2, gt=0.0)
    fd_order: Optional[int] = Field(default=None, ge=0, le=6)
    grid: Optional[List[float]] = None
    slope_grid: List[float] = Field(default_factory=list)
    sum_over_states: bool = False


class OutputConfig(_Strict):
    directory: Optional[str] = None
    formats: List[Literal["json", "csv"]] = Field(default_factory=lambda: ["json", "csv"])
    include_vectors: bool = False


class SettingsConfig(_Strict):
    tol_eig: float = Field(default=1e-12, gt=0.0)
    max_bisect: int = Field(default=200, gt=0)
    max_inverse_iter: int = Field(default=50, gt=0)
    degeneracy_gap: float = Field(default=1e-8, gt=0.0)
    tol_hier: float = Field(default=1e-10, gt=0.0)
    mu_tol: float = Field(default=1e-10, gt=0.0)
    fd_tol: float = Field(default=1e-6, gt=0.0)

    def to_settings(self) -> SolverSettings:
        return SolverSettings(**self.model_dump())


class RunConfig(_Strict):
    """Complete description of one solve / sweep / oracle run"""
    model: ModelConfig = Field(default_factory=ModelConfig)
    state_index: int = Field(default=0, ge=0)
    order: int = Field(default=4, ge=0)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    policies: Optional[List[PolicyConfig]] = None
    lambda_targets: List[float] = Field(default_factory=lambda: [0.1])
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    settings: SettingsConfig = Field(default_factory=SettingsConfig)

    @field_validator("lambda_targets")
    @classmethod
    def _finite_targets(cls, value: List[float]) -> List[float]:
        if any(v != v or v in (float("inf"), float("-inf")) for v in value):
            raise ValueError("lambda_targets must be finite")
        return value

    @model_validator(mode="after")
    def _fill_oracle_defaults(self) -> "RunConfig":
        if self.oracle.fd_order is None:
            self.oracle.fd_order = min(self.order, 4)
        return self

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.model_validate_json(text)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())

    def all_policies(self) -> List[SplitPolicy]:
        configs = self.policies if self.policies else [self.policy]
        return [p.to_policy() for p in configs]

    def oracle_grid(self, lambda_ref: float) -> List[float]:
        return sorted(self.oracle.grid) if self.oracle.grid else [lambda_ref]

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def resolve_output_dir(cli_value: Optional[str], config: RunConfig) -> str:
    """--out, then output.directory, then RSPT_OUT_DIR, then ./out"""
    return cli_value or config.output.directory or os.getenv("RSPT_OUT_DIR") or DEFAULT_OUT_DIR


def resolve_log_level(quiet: bool) -> str:
    level = os.getenv("RSPT_LOG_LEVEL")
    if level:
        return level.upper()
    return "WARNING" if quiet else "INFO"
