import hashlib
import json
import math
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import (BaseModel, ConfigDict, Field, computed_field, field_validator,
                      model_validator)

import config


class SchemeKind(str, Enum):
    """Discrete-time schemes"""
    LMC = "LMC"
    PLMC = "PLMC"
    MTLMC = "MTLMC"
    REFERENCE = "REFERENCE"


class TestFunctionId(str, Enum):
    """Bounded test functions"""
    __test__ = False

    PHI1 = "PHI1"
    EXP_NEG_NORM = "EXP_NEG_NORM"
    PHI2 = "PHI2"
    ATAN_NORM = "ATAN_NORM"
    CONST = "CONST"
    USER = "USER"


class ExperimentKind(str, Enum):
    """Harness studies"""
    CONVERGE = "converge"
    DENSITY = "density"
    DIMDEP = "dimdep"
    VERIFY = "verify"
    MIXING = "mixing"
    SAMPLE = "sample"


class ModelKind(str, Enum):
    DOUBLEWELL = "doublewell"
    OU = "ou"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class PointSampling(str, Enum):
    """How sampled checks draw points in a ball"""
    BALL = "ball"  # uniform by volume
    RADIAL = "radial"  # norm uniform on [0, radius]


class DoubleWellParams(BaseModel):
    """f(x) = alpha x - beta |x|^2 x"""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0)
    beta: float = Field(gt=0)


class DriftModel(BaseModel):
    """Drift f = -grad U with its growth exponent and assumption constants.

    drift_eval and potential_eval act on the last axis and must accept
    batches of shape (..., d).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    dimension: int = Field(gt=0)
    gamma: float = Field(ge=1)
    a1: Optional[float] = None
    a2: Optional[float] = None
    atilde1: Optional[float] = None
    atilde2: Optional[float] = None
    radius_R: Optional[float] = None
    cf: Optional[float] = None
    drift_eval: Callable[[np.ndarray], np.ndarray]
    potential_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    double_well: Optional[DoubleWellParams] = None

    @field_validator("a1", "a2", "atilde1", "atilde2", "radius_R", "cf")
    @classmethod
    def _positive_when_set(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError(f"constant must be positive, got {value}")
        return value

    @model_validator(mode="after")
    def _contractivity_order(self) -> "DriftModel":
        if self.atilde1 is not None and self.atilde2 is not None and not self.atilde1 > self.atilde2:
            raise ValueError("atilde1 must exceed atilde2")
        return self

    def drift(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.drift_eval(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def potential(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.potential_eval(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def fingerprint(self) -> Dict[str, object]:
        """Everything that identifies the model except the callables"""
        return {
            "name": self.name,
            "dimension": self.dimension,
            "gamma": self.gamma,
            "constants": [self.a1, self.a2, self.atilde1, self.atilde2, self.radius_R, self.cf],
            "double_well": self.double_well.model_dump() if self.double_well else None,
        }


class AssumptionReport(BaseModel):
    """Outcome of a sampled check"""
    assumption_id: str
    samples: int
    violations: int
    worst_margin: float

    @computed_field
    @property
    def passed(self) -> bool:
        return self.violations == 0


class ProjectionParams(BaseModel):
    """Ball projection of radius theta (d/h)^(1/(2 gamma))"""
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(ge=1)
    theta: float = Field(default=config.DEFAULT_THETA, ge=1)
    dimension: int = Field(gt=0)
    step: float = Field(gt=0, lt=1)

    @property
    def is_identity(self) -> bool:
        return self.gamma == 1

    @property
    def cap_radius(self) -> float:
        if self.is_identity:
            return math.inf
        return self.theta * (self.dimension / self.step) ** (1.0 / (2.0 * self.gamma))


class SamplerConfig(BaseModel):
    """One reproducible run description"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scheme: SchemeKind
    model: DriftModel
    h: float = Field(gt=0, lt=1)
    n_steps: int = Field(ge=1)
    theta: float = Field(default=config.DEFAULT_THETA, ge=1)
    x0: Optional[Tuple[float, ...]] = None
    n_trajectories: int = Field(ge=1)
    master_seed: int = config.DEFAULT_SEED
    checkpoint_every: Optional[int] = Field(default=None, ge=1)
    coupled_reference: bool = False
    noise_substeps: int = Field(default=1, ge=1)
    lane: int = Field(default=config.PRIMARY_LANE, ge=0)
    report_projected: bool = False

    @model_validator(mode="after")
    def _x0_matches_dimension(self) -> "SamplerConfig":
        if self.x0 is not None and len(self.x0) != self.model.dimension:
            raise ValueError(f"x0 has length {len(self.x0)}, model dimension is {self.model.dimension}")
        return self

    @property
    def dimension(self) -> int:
        return self.model.dimension

    @property
    def horizon(self) -> float:
        return self.n_steps * self.h

    def initial_state(self) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(self.dimension)
        return np.asarray(self.x0, dtype=np.float64)

    def config_hash(self) -> str:
        payload = {
            "scheme": self.scheme.value,
            "model": self.model.fingerprint(),
            "h": self.h,
            "n_steps": self.n_steps,
            "theta": self.theta,
            "x0": list(self.x0) if self.x0 is not None else None,
            "n_trajectories": self.n_trajectories,
            "master_seed": self.master_seed,
            "checkpoint_every": self.checkpoint_every,
            "noise_substeps": self.noise_substeps,
            "lane": self.lane,
        }
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class Ensemble(BaseModel):
    """Terminal (and optionally checkpointed) states of M trajectories"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scheme: SchemeKind
    model_name: str
    h: float
    n_steps: int
    master_seed: int
    lane: int = config.PRIMARY_LANE
    coupled: bool = False
    config_hash: str
    states: np.ndarray
    projected_states: Optional[np.ndarray] = None
    checkpoints: List[Tuple[int, np.ndarray]] = Field(default_factory=list)
    diverged_step: np.ndarray
    wall_clock: float = 0.0
    steps_taken: int = 0

    @property
    def n_trajectories(self) -> int:
        return self.states.shape[0]

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> float:
        return self.n_steps * self.h

    @property
    def finite_mask(self) -> np.ndarray:
        return self.diverged_step < 0

    @property
    def n_diverged(self) -> int:
        return int(np.count_nonzero(self.diverged_step >= 0))

    @property
    def diverged(self) -> bool:
        return self.n_diverged > 0

    @property
    def diverged_indices(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.diverged_step >= 0)]


class TestFunction(BaseModel):
    """Bounded measurable phi with its sup norm"""
    __test__ = False

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    id: TestFunctionId
    sup_norm: float = Field(gt=0)
    eval: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    @property
    def name(self) -> str:
        return self.label or self.id.value

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.eval(np.asarray(x, dtype=np.float64)), dtype=np.float64)


class ErrorRecord(BaseModel):
    """One (scheme, d, h, phi) cell of an error table"""
    scheme: str = SchemeKind.PLMC.value
    model: str = ModelKind.DOUBLEWELL.value
    alpha: Optional[float] = None
    beta: Optional[float] = None
    phi: str
    h: float
    d: int
    estimate: float
    reference: float
    abs_error: float
    std_error: float

    @model_validator(mode="after")
    def _abs_error_consistent(self) -> "ErrorRecord":
        if self.abs_error != abs(self.estimate - self.reference):
            raise ValueError("abs_error must equal |estimate - reference|")
        return self


class OrderFit(BaseModel):
    """Least-squares slope on log-log axes"""
    slope: float
    intercept: float
    residual_rms: float
    points_used: int
    label: str = ""


class HistogramRow(BaseModel):
    scheme: str
    bin_center: float
    density: float


class MixingPlan(BaseModel):
    """Step size and iteration count reaching epsilon in TV, up to unknown constants"""
    epsilon: float
    gamma: float
    d: int
    C: float
    C_star: float
    c_star: float
    mean_x0_norm: float
    phi_sup_norm: float
    h: float
    k: int
    note: str = "up to unknown constants"

    @property
    def required_time(self) -> float:
        ratio = 2.0 * self.C_star * self.phi_sup_norm * (1.0 + self.mean_x0_norm) / self.epsilon
        return math.log(ratio) / self.c_star


class ExperimentSpec(BaseModel):
    """What a harness run does and where it writes"""
    kind: ExperimentKind
    model: ModelKind = ModelKind.DOUBLEWELL
    alpha: float = Field(default=1.0, gt=0)
    beta: float = Field(default=1.0, gt=0)
    a1: Optional[float] = None
    a2: Optional[float] = None
    atilde1: Optional[float] = None
    atilde2: Optional[float] = None
    radius_R: Optional[float] = None
    scheme: SchemeKind = SchemeKind.PLMC
    h_grid: List[float] = Field(default_factory=list)
    dimensions: List[int] = Field(default_factory=lambda: [1])
    horizon: Optional[float] = Field(default=None, gt=0)
    n_iterations: Optional[int] = Field(default=None, ge=1)
    n_trajectories: int = Field(default=config.DESK_TRAJECTORIES, ge=1)
    h_ref: float = Field(default=config.DESK_H_REF, gt=0, lt=1)
    theta: float = Field(default=config.DEFAULT_THETA, ge=1)
    phi2_gap: float = Field(default=config.PHI2_GAP_FILL, ge=-1, le=1)
    seed: int = config.DEFAULT_SEED
    independent_ref: bool = False
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV
    dump: Optional[str] = None
    workers: int = Field(default=config.DEFAULT_WORKERS, ge=1)

    @field_validator("h_grid")
    @classmethod
    def _strictly_decreasing(cls, grid: List[float]) -> List[float]:
        if any(not 0 < h < 1 for h in grid):
            raise ValueError("step sizes must lie in (0, 1)")
        if any(later >= earlier for earlier, later in zip(grid, grid[1:])):
            raise ValueError("h grid must be strictly decreasing")
        return grid

    @field_validator("dimensions")
    @classmethod
    def _positive_dimensions(cls, dims: List[int]) -> List[int]:
        if not dims or any(d < 1 for d in dims):
            raise ValueError("dimensions must be positive")
        return dims

    @model_validator(mode="after")
    def _horizon_divisible(self) -> "ExperimentSpec":
        if self.horizon is not None:
            for h in self.h_grid:
                n_steps = round(self.horizon / h)
                if n_steps < 1 or abs(n_steps * h - self.horizon) > 1e-9 * max(1.0, self.horizon):
                    raise ValueError(f"T={self.horizon} is not an integer multiple of h={h}")
        return self


class ExperimentReport(BaseModel):
    """Rows, fits and checks of one harness run"""
    spec: ExperimentSpec
    rows: List[ErrorRecord] = Field(default_factory=list)
    orders: List[OrderFit] = Field(default_factory=list)
    histograms: List[HistogramRow] = Field(default_factory=list)
    checks: List[AssumptionReport] = Field(default_factory=list)
    scalars: Dict[str, float] = Field(default_factory=dict)
    divergence_counts: Dict[str, int] = Field(default_factory=dict)
    failed_cells: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
    mixing_plan: Optional[MixingPlan] = None
    version: str = config.VERSION
    runtime: float = 0.0

    @property
    def property_failures(self) -> List[AssumptionReport]:
        return [check for check in self.checks if not check.passed]
