from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import Field, field_validator

from src.config.settings import settings
from src.models.base import BaseModel, frozen_array
from src.models.enclosure import BoundKind, ConstantMode, EnclosureDisk
from src.models.fields import VectorField
from src.models.grid import LameParams
from src.models.potential import PotentialSpec

NormKind = Literal["lp", "morrey_campanato", "kerman_sawyer", "a_p", "hardy"]


class NormReport(BaseModel):
    """Value of one potential-size functional"""

    kind: NormKind
    params: Dict[str, Any] = {}
    value: float = Field(ge=0)
    argmax: Optional[Dict[str, Any]] = Field(default=None, description="Maximizing ball or cube")
    settings: Dict[str, Any] = {}
    seed: Optional[int] = None
    restricted_family: bool = Field(
        default=False, description="Sup taken over a finite family of balls/cubes on the torus"
    )
    diagnostics: Dict[str, Any] = {}


class OrthogonalityReport(BaseModel):
    """‖g_S‖_p + ‖g_P‖_p against (1 + 2d c_p²)‖g‖_p"""

    p: float
    c_p: float
    constant: float
    g_norm: float
    s_norm: float
    p_norm: float
    lhs: float
    rhs: float
    holds: bool


class WeightedRieszReport(BaseModel):
    axis: int
    estimate: float
    iterations: int
    converged: bool
    q2: float
    ratio: float = Field(description="estimate / Q₂(w)")
    configured_constant: float
    within_configured_bound: bool
    constant_provenance: str = "configured, not proven"


class BSNormReport(BaseModel):
    z: complex
    epsilon: Optional[float] = Field(default=None, description="Imaginary shift used for embedded z")
    estimate: float
    iterations: int
    bounds: Dict[str, float] = {}
    bound_provenance: Dict[str, str] = {}
    within_bounds: Dict[str, bool] = {}


class EpsilonExtrapolationReport(BaseModel):
    zeta: complex
    epsilons: List[float]
    estimates: List[float]
    differences: List[float] = Field(description="‖K_{ζ+iε_k}φ - K_{ζ+iε_{k+1}}φ‖")
    monotone: bool
    limit_estimate: float


class StabilityReport(BaseModel):
    condition: Literal["fkv", "mc", "lp", "sectorial"]
    satisfied: bool
    value: float = Field(description="Left side of the smallness condition")
    threshold: float
    margin: float
    inputs: Dict[str, float] = {}
    c_V_source: Optional[str] = None
    sectorial: Optional[bool] = None
    claim: Optional[str] = None


class SpectrumReport(BaseModel):
    eigenvalues: np.ndarray
    residuals: np.ndarray
    matrix_norm: float
    hermitian: bool
    disk: Optional[EnclosureDisk] = None
    verdicts: List[str] = []
    essential_margin: Optional[float] = None
    inflation: float = settings.spectra.CONTAINMENT_INFLATION
    violations: int = 0
    eigencheck: List[Optional[float]] = Field(
        default=[], description="‖K_zφ + φ‖/‖φ‖ for eigenpairs off [0, ∞)"
    )
    settings: Dict[str, Any] = {}

    @field_validator("eigenvalues", "residuals", mode="before")
    @classmethod
    def _freeze(cls, value):
        return frozen_array(value)

    def as_rows(self) -> List[Dict[str, Any]]:
        verdicts = self.verdicts or ["unclassified"] * len(self.eigenvalues)
        return [
            {"re": float(z.real), "im": float(z.imag), "residual": float(r), "verdict": v}
            for z, r, v in zip(self.eigenvalues, np.real(self.residuals), verdicts)
        ]


class PlaneWaveResult(BaseModel):
    field: VectorField
    z: float
    kappa: float
    mode: Literal["S", "P"]
    axis: int
    polarization: Tuple[float, ...]
    residual: float
    divergence_norm: float
    max_modulus_error: float
    wavevector_note: str = (
        "wavevector length is sqrt(z/c) so that -Δv = (z/c) v; a wavevector (0, z/μ, 0) "
        "would not solve the Helmholtz-type system"
    )


class WeylReport(BaseModel):
    z: float
    scales: List[int]
    residuals: List[float]
    norms: List[float]
    ratios: List[float]
    monotone: bool
    total_decay: float


class AdjointSymmetryReport(BaseModel):
    adjoint_defect: float = Field(description="max |H(V)* - H(V̄ᵗ)|")
    j_symmetry_defect: float = Field(description="max |J H(V) J - H(V)*|")
    tol: float
    passed: bool


class SuiteResult(BaseModel):
    name: str
    passed: bool
    checks: Dict[str, bool]
    details: Dict[str, Any] = {}


# Run configuration


class GridConfig(BaseModel):
    d: int = Field(default=settings.grid.DEFAULT_D, description="Spatial dimension")
    n: int = Field(default=settings.grid.DEFAULT_N, description="Points per axis")
    L: float = Field(default=settings.grid.DEFAULT_L, description="Torus side length")


class BoundConfig(BaseModel):
    kind: BoundKind = "lebesgue"
    gamma: float = 0.0
    p: Optional[float] = None
    alpha: Optional[float] = None
    constant_mode: ConstantMode = "explicit_d3"


class ConstantsConfig(BaseModel):
    configured_constant: float = Field(default=settings.constants.CONFIGURED_CONSTANT, gt=0)
    c_F: float = Field(default=settings.constants.C_F, gt=0)
    c_KS: float = Field(default=settings.constants.C_KS, gt=0)
    riesz_C: float = Field(default=settings.constants.RIESZ_C, gt=0)
    riesz_source: Literal["a_2", "empirical"] = Field(
        default="a_2", description="c_V for the d = 3 stability conditions: C*Q2(|V|) or the measured weighted Riesz norm",
    )


class ToleranceConfig(BaseModel):
    power_iteration: float = Field(default=settings.tolerance.POWER_ITERATION_TOL, gt=0)
    residual: float = Field(default=settings.tolerance.RESIDUAL_TOL, gt=0)
    containment_inflation: float = Field(default=settings.spectra.CONTAINMENT_INFLATION, ge=0)
    essential_margin: Optional[float] = Field(default=None, ge=0, description="Default 10‖V‖_∞/n")


Command = Literal["norms", "enclose", "bsnorm", "spectrum", "verify", "planewave"]
Suite = Literal[
    "all", "free-spectrum", "helmholtz", "symbol", "resolvent", "planewave",
    "birman-schwinger", "containment", "norms", "j-symmetry", "weyl",
]


class RunConfig(BaseModel):
    """Request model for one batch run"""

    command: Command
    grid: GridConfig = GridConfig()
    potential: PotentialSpec = PotentialSpec(amplitude=0.01)
    lame: LameParams = LameParams(lam=1.0, mu=1.0)
    bound: BoundConfig = BoundConfig()
    constants: ConstantsConfig = ConstantsConfig()
    epsilons: List[float] = Field(default=settings.runtime.EPSILON_SCHEDULE)
    z_values: List[Tuple[float, float]] = Field(default=[(-1.0, 0.0)], description="Spectral parameters as (re, im)")
    tolerances: ToleranceConfig = ToleranceConfig()
    suite: Suite = "all"
    wave_mode: Literal["S", "P"] = "S"
    wave_axis: int = 0
    wave_z: Optional[float] = Field(default=None, description="Plane-wave z; default the lowest S/P level")
    weyl_scale: int = Field(default=8, ge=0, description="Largest Weyl bump scale; 0 skips the Weyl check")
    output_dir: str = Field(default=settings.runtime.OUTPUT_DIR)
    seed: int = Field(default=settings.runtime.DEFAULT_SEED, ge=0)
    threads: int = Field(default=settings.runtime.THREADS, ge=1)
