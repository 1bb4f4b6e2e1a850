import math
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Optional, Tuple
from enum import Enum


class ScenarioKind(str, Enum):
    HOMOGENEOUS_RELAXATION = "homogeneous-relaxation"
    BKW_VERIFICATION = "bkw-verification"
    SOD_KINETIC = "sod-kinetic"
    KERNEL_MODE_BUILD = "kernel-mode-build"
    CONVERGENCE_STUDY = "convergence-study"
    AP_SWEEP = "ap-sweep"


class KernelKind(str, Enum):
    MAXWELL = "maxwell"
    VHS = "vhs"


class OperatorKind(str, Enum):
    FAST = "fast"
    DIRECT = "direct"
    DVM = "dvm"


class Decomposition(str, Enum):
    SVD = "svd"
    ANGULAR = "angular"


class StepperKind(str, Enum):
    EXPLICIT = "explicit"
    IMEX = "imex"
    EXPONENTIAL = "exponential"


class ExplicitMethod(str, Enum):
    EULER = "euler"
    RK4 = "rk4"


class InitialKind(str, Enum):
    ANISOTROPIC_GAUSSIAN = "anisotropic-gaussian"
    MAXWELLIAN = "maxwellian"
    BKW = "bkw"
    RIEMANN = "riemann"


class Boundary(str, Enum):
    PERIODIC = "periodic"
    FREE_OUTFLOW = "free-outflow"


class ConvergenceStudy(str, Enum):
    SPECTRAL_EQUILIBRIUM = "spectral-equilibrium"
    SPECTRAL_SELF = "spectral-self"
    ORACLE_AGREEMENT = "oracle-agreement"
    DVM_VS_SPECTRAL = "dvm-vs-spectral"
    TRANSPORT = "transport"
    EULER_RIEMANN = "euler-riemann"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(StrictModel):
    dim: int = 2
    n_per_dim: int = 16
    half_width: float = Field(8.0, gt=0)
    trunc_radius: Optional[float] = None  # mapped cube; default 2 pi / (3 + sqrt 2)

    @field_validator("dim")
    @classmethod
    def planar_velocities(cls, v):
        if v != 2:
            raise ValueError("scenarios run in d = 2 velocity dimensions")
        return v

    @field_validator("n_per_dim")
    @classmethod
    def even_and_large_enough(cls, v):
        if v < 4 or v % 2:
            raise ValueError("must be an even integer >= 4")
        return v

    @field_validator("trunc_radius")
    @classmethod
    def inside_mapped_cube(cls, v):
        if v is not None and not 0 < v <= math.pi:
            raise ValueError("must lie in (0, pi]")
        return v


class KernelConfig(StrictModel):
    kind: KernelKind = KernelKind.MAXWELL
    alpha: float = 0.0
    c_alpha: Optional[float] = None
    quadrature_level: Optional[int] = Field(None, ge=1)
    operator: OperatorKind = OperatorKind.FAST
    decomposition: Decomposition = Decomposition.SVD
    rank: Optional[int] = Field(None, ge=1)
    rank_tolerance: float = Field(1e-12, gt=0)
    cross_section: float = Field(1.0, gt=0)  # DVM only


class TimeConfig(StrictModel):
    stepper: StepperKind = StepperKind.IMEX
    explicit_method: ExplicitMethod = ExplicitMethod.RK4
    dt: float = Field(0.01, gt=0)
    t_final: float = Field(1.0, ge=0)
    epsilon: float = Field(1.0, gt=0)
    penalization: Optional[float] = Field(None, gt=0)  # fixed mu; default mu = c rho
    damp_deviation: bool = True


class InitialConfig(StrictModel):
    kind: InitialKind = InitialKind.ANISOTROPIC_GAUSSIAN
    density: float = Field(1.0, gt=0)
    mean_velocity: List[float] = [0.0, 0.0]
    temperatures: List[float] = [1.5, 0.5]  # per-axis for the anisotropic Gaussian
    temperature: float = Field(1.0, gt=0)
    left: Tuple[float, float, float] = (1.0, 0.0, 1.0)  # (rho, w, p)
    right: Tuple[float, float, float] = (0.125, 0.0, 0.1)
    x0: Optional[float] = None
    perturbation: float = Field(0.0, ge=0, lt=1)  # seeded multiplicative noise

    @field_validator("mean_velocity", "temperatures")
    @classmethod
    def two_components(cls, v):
        if len(v) != 2:
            raise ValueError("needs exactly 2 components (d = 2)")
        return v

    @field_validator("temperatures")
    @classmethod
    def positive_temperatures(cls, v):
        if any(t <= 0 for t in v):
            raise ValueError("temperatures must be positive")
        return v


class SpaceConfig(StrictModel):
    n_cells: int = Field(200, ge=2)
    x_min: float = 0.0
    x_max: float = 1.0
    boundary: Boundary = Boundary.FREE_OUTFLOW
    cfl: float = Field(0.9, gt=0, le=1)

    @model_validator(mode="after")
    def ordered_interval(self):
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        return self


class OutputConfig(StrictModel):
    every: int = Field(1, ge=1)  # steps between series rows
    write_distributions: bool = True


class AcceptanceConfig(StrictModel):
    enabled: bool = True
    m4_relative_tolerance: float = 1e-2
    entropy_increase_tolerance: float = 1e-8
    provenance_tolerance: float = 1e-6
    provenance_n_per_dim: int = Field(24, ge=8)
    provenance_half_width: float = 6.0
    provenance_refine: int = Field(1, ge=1)
    provenance_n_angle: int = 32
    euler_deviation_tolerance: float = 0.02
    riemann_l1_tolerance: float = 0.02
    riemann_n_cells: int = 400
    distance_tolerance: float = 1e-6
    relaxation_factor: float = 1e-2  # final ||f - M[f]|| over initial
    conservation_tolerance: float = 1e-10
    beta_origin_tolerance: float = 1e-10
    equilibrium_drop: float = 1e3
    oracle_tolerance: float = 5e-2
    order_tolerance: float = 0.25


class ConvergenceConfig(StrictModel):
    study: ConvergenceStudy = ConvergenceStudy.SPECTRAL_EQUILIBRIUM
    n_values: List[int] = [8, 16, 24, 32]
    n_angles: List[int] = [16, 32, 64]
    refine: int = Field(4, ge=1)
    n_cells: List[int] = [50, 100, 200, 400]

    @field_validator("n_values")
    @classmethod
    def even_increasing_grids(cls, v):
        if len(v) < 2 or any(n < 4 or n % 2 for n in v):
            raise ValueError("needs at least two even sizes >= 4")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sizes must increase")
        return v

    @field_validator("n_angles", "n_cells")
    @classmethod
    def increasing(cls, v):
        if len(v) < 2 or v[0] < 2 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("needs at least two increasing values >= 2")
        return v

    @model_validator(mode="after")
    def paired_oracle_family(self):
        if self.study == ConvergenceStudy.ORACLE_AGREEMENT and len(self.n_angles) != len(self.n_values):
            raise ValueError("oracle-agreement pairs n_values with n_angles; lengths differ")
        return self


class APConfig(StrictModel):
    epsilons: List[float] = [1.0, 1e-2, 1e-4, 1e-6, 1e-8]
    n_steps: int = Field(1, ge=1)
    stability_steps: int = Field(10, ge=1)
    check_explicit: bool = True


class ScenarioConfig(StrictModel):
    """One scenario run; unknown keys anywhere are rejected."""

    kind: ScenarioKind
    name: Optional[str] = None
    seed: int = 0
    threads: Optional[int] = Field(None, ge=1)
    grid: GridConfig = GridConfig()
    kernel: KernelConfig = KernelConfig()
    time: TimeConfig = TimeConfig()
    initial: InitialConfig = InitialConfig()
    space: Optional[SpaceConfig] = None
    output: OutputConfig = OutputConfig()
    acceptance: AcceptanceConfig = AcceptanceConfig()
    convergence: ConvergenceConfig = ConvergenceConfig()
    ap: APConfig = APConfig()

    @model_validator(mode="after")
    def space_for_sod(self):
        if self.kind == ScenarioKind.SOD_KINETIC and self.space is None:
            self.space = SpaceConfig()
        return self

    @property
    def label(self) -> str:
        return self.name or self.kind.value
