from enum import IntEnum
from typing import ClassVar, Sequence, Tuple

import numpy as np
from pydantic import field_validator, model_validator

from src.errors import FieldShapeError
from src.models.base import BaseModel, frozen_array
from src.models.grid import Grid


class FieldKind(IntEnum):
    SCALAR = 0
    VECTOR = 1
    MATRIX = 2


class _GridField(BaseModel):
    """Complex samples on a Grid, stored read-only with components innermost."""

    kind: ClassVar[FieldKind]

    grid: Grid
    samples: np.ndarray

    @field_validator("samples", mode="before")
    @classmethod
    def _freeze(cls, samples) -> np.ndarray:
        return frozen_array(samples)

    @classmethod
    def expected_shape(cls, grid: Grid) -> Tuple[int, ...]:
        return grid.shape + cls.component_shape(grid.d)

    @classmethod
    def component_shape(cls, d: int) -> Tuple[int, ...]:
        return ()

    @model_validator(mode="after")
    def _check_samples(self):
        expected = self.expected_shape(self.grid)
        if self.samples.shape != expected:
            raise FieldShapeError(
                f"{type(self).__name__} on grid d={self.grid.d}, n={self.grid.n} "
                f"expects shape {expected}, got {self.samples.shape}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("field samples must be finite")
        return self

    def with_samples(self, samples: np.ndarray):
        return type(self)(grid=self.grid, samples=samples)

    def scaled(self, factor: complex):
        return self.with_samples(factor * self.samples)

    def l2_norm(self) -> float:
        """Discrete L² norm with cell volume h^d."""
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.grid.cell_volume))

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_samples(self.samples - other.samples)

    def _check_compatible(self, other) -> None:
        if type(other) is not type(self) or other.grid != self.grid:
            raise FieldShapeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")


class ScalarField(_GridField):
    kind: ClassVar[FieldKind] = FieldKind.SCALAR

    def lp_norm(self, p: float) -> float:
        h_d = self.grid.cell_volume
        values = np.abs(self.samples)
        if np.isinf(p):
            return float(values.max())
        return float((np.sum(values ** p) * h_d) ** (1 / p))

    @classmethod
    def constant(cls, grid: Grid, value: complex = 1.0) -> "ScalarField":
        return cls(grid=grid, samples=np.full(grid.shape, value, dtype=np.complex128))


class VectorField(_GridField):
    kind: ClassVar[FieldKind] = FieldKind.VECTOR

    @classmethod
    def component_shape(cls, d: int) -> Tuple[int, ...]:
        return (d,)

    @classmethod
    def from_components(cls, components: Sequence[ScalarField]) -> "VectorField":
        grid = components[0].grid
        if any(c.grid != grid for c in components) or len(components) != grid.d:
            raise FieldShapeError("vector components must be d scalar fields on one grid")
        return cls(grid=grid, samples=np.stack([c.samples for c in components], axis=-1))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid=grid, samples=np.zeros(cls.expected_shape(grid), dtype=np.complex128))

    def component(self, j: int) -> ScalarField:
        return ScalarField(grid=self.grid, samples=self.samples[..., j])

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean length |u(x)|."""
        return np.sqrt(np.sum(np.abs(self.samples) ** 2, axis=-1))

    def lp_norm(self, p: float) -> float:
        """(∫ |u(x)|^p dx)^{1/p} with the Euclidean pointwise length."""
        return ScalarField(grid=self.grid, samples=self.magnitude()).lp_norm(p)

    def flat(self) -> np.ndarray:
        return self.samples.reshape(-1)


class MatrixPotentialField(_GridField):
    kind: ClassVar[FieldKind] = FieldKind.MATRIX

    @classmethod
    def component_shape(cls, d: int) -> Tuple[int, ...]:
        return (d, d)

    @classmethod
    def zeros(cls, grid: Grid) -> "MatrixPotentialField":
        return cls(grid=grid, samples=np.zeros(cls.expected_shape(grid), dtype=np.complex128))

    @classmethod
    def scalar(cls, field: ScalarField) -> "MatrixPotentialField":
        """Embed a scalar function as f(x)·I."""
        d = field.grid.d
        return cls(grid=field.grid, samples=field.samples[..., None, None] * np.eye(d))

    def apply(self, u: VectorField) -> VectorField:
        if u.grid != self.grid:
            raise FieldShapeError("potential and vector field live on different grids")
        return u.with_samples(np.einsum("...jk,...k->...j", self.samples, u.samples))

    def conjugate_transpose(self) -> "MatrixPotentialField":
        return self.with_samples(np.conj(np.swapaxes(self.samples, -1, -2)))

    def is_zero(self) -> bool:
        return not np.any(self.samples)

    def operator_norm(self) -> np.ndarray:
        """Largest singular value per point."""
        return np.linalg.norm(self.samples, ord=2, axis=(-2, -1))

    def sup_norm(self) -> float:
        return float(self.operator_norm().max())
