import math
from pathlib import Path
from typing import ClassVar, List, Optional

from pydantic_settings import BaseSettings


class BaseAppSettings(BaseSettings):
    """Base settings class with common configuration."""

    BASE_DIR: ClassVar[Path] = Path(__file__).resolve().parent

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        extra = "ignore"


class GridSettings(BaseAppSettings):
    """Default torus discretization."""

    DEFAULT_D: int = 3
    DEFAULT_N: int = 8
    DEFAULT_L: float = 2 * math.pi


class ToleranceSettings(BaseAppSettings):
    """Numerical tolerances and iteration caps."""

    RESOLVENT_SINGULAR_TOL: float = 1e-12
    POWER_ITERATION_TOL: float = 1e-8
    POWER_ITERATION_MAX_ITER: int = 5000
    HARDY_TOL: float = 1e-8
    PNORM_MAX_ITER: int = 100
    RESIDUAL_TOL: float = 1e-8  # relative to the Frobenius norm of H
    POLAR_RANK_TOL: float = 1e-13  # relative to the largest singular value per point


class ConstantSettings(BaseAppSettings):
    """Universal constants the theory proves to exist but never evaluates.

    Every value here is reported as "configured, not proven".
    """

    CONFIGURED_CONSTANT: float = 1.0
    C_F: float = 1.0
    C_KS: float = 1.0
    RIESZ_C: float = 1.0


class NormSettings(BaseAppSettings):
    """Search families for the sup-type potential norms."""

    # radii are multiples of the grid spacing, clipped to [h, L/2]
    MC_RADII_FACTORS: List[int] = [1, 2, 4, 8]
    KS_MAX_LEVEL: int = 3
    AP_MAX_LEVEL: int = 3
    KS_QUADRATURE_ORDER: int = 24


class SpectraSettings(BaseAppSettings):
    """Dense spectrum and containment settings."""

    DENSE_CAP: int = 6000
    DENSE_CHUNK: int = 512
    ESSENTIAL_MARGIN_FACTOR: float = 10.0
    ESSENTIAL_MARGIN_FLOOR: float = 1e-8  # relative to the largest eigenvalue modulus
    CONTAINMENT_INFLATION: float = 0.1
    WEYL_BUMP_FRACTION: float = 1 / 16  # bump radius for n=1, as a fraction of L
    DISK_BOUNDARY_SAMPLES: int = 256


class RuntimeSettings(BaseAppSettings):
    """Batch runtime settings."""

    OUTPUT_DIR: str = "lame_spectra_results"
    DEFAULT_SEED: int = 0
    THREADS: int = 1
    FFT_WORKERS: Optional[int] = None
    EPSILON_SCHEDULE: List[float] = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625]
    LAME_SPECTRA_CACHE: Optional[str] = None


class Settings(BaseAppSettings):
    """Main settings class that combines all specialized settings."""

    grid: GridSettings = GridSettings()
    tolerance: ToleranceSettings = ToleranceSettings()
    constants: ConstantSettings = ConstantSettings()
    norms: NormSettings = NormSettings()
    spectra: SpectraSettings = SpectraSettings()
    runtime: RuntimeSettings = RuntimeSettings()


# Create global settings instance
settings = Settings()
