"""FFT helpers on the periodic torus.

The forward transform divides by n^d, so a constant c maps to c at the zero
frequency and a symbol can be applied to the coefficients without rescaling.
"""
from typing import Literal, Optional

import numpy as np
import scipy.fft

from src.config.settings import settings
from src.models.fields import ScalarField
from src.models.grid import Grid


def _workers() -> Optional[int]:
    return settings.runtime.FFT_WORKERS


def _axes(grid: Grid, batch: int) -> tuple:
    return tuple(batch + a for a in grid.axes)


def forward(samples: np.ndarray, grid: Grid, batch: int = 0) -> np.ndarray:
    """Fourier coefficients over the d spatial axes, after `batch` leading axes."""
    return scipy.fft.fftn(samples, axes=_axes(grid, batch), norm="forward", workers=_workers())


def inverse(coefficients: np.ndarray, grid: Grid, batch: int = 0) -> np.ndarray:
    return scipy.fft.ifftn(coefficients, axes=_axes(grid, batch), norm="forward", workers=_workers())


def spectral_transform(f: ScalarField, direction: Literal["forward", "inverse"] = "forward") -> ScalarField:
    if direction == "forward":
        return f.with_samples(forward(f.samples, f.grid))
    if direction == "inverse":
        return f.with_samples(inverse(f.samples, f.grid))
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def apply_multiplier(samples: np.ndarray, grid: Grid, multiplier: np.ndarray) -> np.ndarray:
    """Apply a scalar Fourier multiplier (shape ``grid.shape``) to every component."""
    coefficients = forward(samples, grid)
    extra = coefficients.ndim - grid.d
    return inverse(coefficients * multiplier.reshape(multiplier.shape + (1,) * extra), grid)


def torus_displacement(grid: Grid, x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Minimum-image displacement x - x0 of every grid point, each entry in [-L/2, L/2)."""
    x0 = grid.center if x0 is None else np.asarray(x0, dtype=float)
    L = grid.L
    return np.mod(grid.coordinates - x0 + L / 2, L) - L / 2


def torus_distance(grid: Grid, x0: Optional[np.ndarray] = None) -> np.ndarray:
    return np.linalg.norm(torus_displacement(grid, x0), axis=-1)


def inverse_norm_multiplier(grid: Grid, power: float) -> np.ndarray:
    """|ξ|^{-power} with the zero frequency mapped to 0."""
    xi2 = grid.wavenumber_squared
    out = np.zeros_like(xi2)
    nonzero = xi2 > 0
    out[nonzero] = xi2[nonzero] ** (-power / 2)
    return out
