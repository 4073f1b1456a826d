from typing import Optional, Tuple

import numpy as np
from pydantic import Field, field_validator

from src.models.base import BaseModel, frozen_array
from src.models.fields import VectorField
from src.models.grid import Grid


class SymbolMatrices(BaseModel):
    """Lamé symbol L(ξ) with an optional diagonalization P⁻¹LP = D."""

    xi: np.ndarray
    L: np.ndarray
    P: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    P_reference: Optional[np.ndarray] = Field(
        default=None, description="Closed-form d=3 basis, present only where it is invertible"
    )
    reference_singular: bool = False

    @field_validator("xi", "L", "P", "D", "P_reference", mode="before")
    @classmethod
    def _freeze(cls, value):
        return None if value is None else frozen_array(value)

    def conjugation_defect(self, basis: Optional[np.ndarray] = None) -> float:
        """max |P⁻¹LP - D| for the given basis (default: the orthonormal one)."""
        P = self.P if basis is None else basis
        return float(np.max(np.abs(np.linalg.solve(P, self.L @ P) - self.D)))


class PolarFactors(BaseModel):
    """Pointwise |V|^{1/2} and V_{1/2} with V_{1/2}·|V|^{1/2} = V."""

    grid: Grid
    absV_sqrt: np.ndarray
    V_half: np.ndarray
    sign: np.ndarray

    @field_validator("absV_sqrt", "V_half", "sign", mode="before")
    @classmethod
    def _freeze(cls, value):
        return frozen_array(value)

    def apply_abs_sqrt(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("...jk,...k->...j", self.absV_sqrt, u)

    def apply_half(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("...jk,...k->...j", self.V_half, u)

    def apply_half_adjoint(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("...kj,...k->...j", np.conj(self.V_half), u)


class HelmholtzPair(BaseModel):
    """Transversal (divergence-free) and longitudinal (gradient) parts of a field."""

    u_S: VectorField
    u_P: VectorField


class DyadicCube(BaseModel):
    """Cube of side L/2^level with lower corner index·L/2^level."""

    level: int = Field(ge=0)
    index: Tuple[int, ...]

    @field_validator("index")
    @classmethod
    def _in_range(cls, index, info):
        level = info.data.get("level", 0)
        if any(not 0 <= i < 2 ** level for i in index):
            raise ValueError(f"cube index {index} outside [0, 2^{level})")
        return tuple(int(i) for i in index)

    def side(self, grid: Grid) -> float:
        return grid.L / 2 ** self.level

    def slices(self, grid: Grid) -> Tuple[slice, ...]:
        cells = grid.n // 2 ** self.level
        return tuple(slice(i * cells, (i + 1) * cells) for i in self.index)
