import math
from functools import lru_cache
from typing import Tuple

import numpy as np
from pydantic import Field, ValidationError, field_validator, model_validator

from src.errors import ParameterError
from src.models.base import BaseModel


@lru_cache(maxsize=32)
def _lattice(d: int, n: int, L: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    h = L / n
    k = 2 * math.pi * np.fft.fftfreq(n, d=h)
    xi = np.stack(np.meshgrid(*([k] * d), indexing="ij"), axis=-1)
    xi2 = np.sum(xi ** 2, axis=-1)
    x = np.arange(n) * h
    coords = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1)
    for array in (k, xi, xi2, coords):
        array.setflags(write=False)
    return k, xi, xi2, coords


class Grid(BaseModel):
    """Periodic torus [0, L)^d sampled with n points per axis."""

    d: int = Field(ge=1, le=3, description="Spatial dimension")
    n: int = Field(description="Points per axis (power of two, at least 4)")
    L: float = Field(gt=0, description="Side length of the torus")

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, n: int) -> int:
        if n < 4 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 4, got {n}")
        return n

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n ** self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def volume(self) -> float:
        return self.L ** self.d

    @property
    def axes(self) -> Tuple[int, ...]:
        return tuple(range(self.d))

    @property
    def center(self) -> np.ndarray:
        return np.full(self.d, self.L / 2)

    @property
    def frequencies(self) -> np.ndarray:
        """Lattice 2πm/L, m in [-n/2, n/2), in FFT order."""
        return _lattice(self.d, self.n, self.L)[0]

    @property
    def wavevectors(self) -> np.ndarray:
        """Array of shape ``shape + (d,)`` holding ξ at every Fourier index."""
        return _lattice(self.d, self.n, self.L)[1]

    @property
    def wavenumber_squared(self) -> np.ndarray:
        return _lattice(self.d, self.n, self.L)[2]

    @property
    def coordinates(self) -> np.ndarray:
        """Grid points ``i·h``, shape ``shape + (d,)``."""
        return _lattice(self.d, self.n, self.L)[3]


def make_grid(d: int, n: int, L: float) -> Grid:
    try:
        return Grid(d=d, n=n, L=L)
    except ValidationError as e:
        raise ParameterError(f"invalid grid (d={d}, n={n}, L={L}): {e}") from e


class LameParams(BaseModel):
    """Lamé material pair with the standard ellipticity conditions."""

    lam: float = Field(alias="lambda", description="First Lamé parameter")
    mu: float = Field(gt=0, description="Shear modulus")

    @model_validator(mode="after")
    def _elliptic(self) -> "LameParams":
        if self.lam + 2 * self.mu <= 0:
            raise ValueError(f"lambda + 2 mu must be positive, got {self.lam + 2 * self.mu}")
        return self

    @property
    def p_modulus(self) -> float:
        """λ + 2μ, the longitudinal coefficient."""
        return self.lam + 2 * self.mu

    @property
    def min_modulus(self) -> float:
        return min(self.mu, self.p_modulus)
