import logging
from typing import Optional

import numpy as np

from src.errors import FieldShapeError
from src.models.fields import MatrixPotentialField, ScalarField
from src.models.grid import Grid
from src.models.potential import PotentialSpec
from src.repositories.fields import FieldRepository
from src.utils.spectral import torus_displacement

logger = logging.getLogger(__name__)


class PotentialService:
    """Samples the built-in potential families on a grid.

    Every family is deterministic given its spec. Random families draw from
    ``numpy.random.default_rng(spec.seed)``.
    """

    def __init__(self, field_repository: Optional[FieldRepository] = None):
        self.field_repository = field_repository or FieldRepository()

    def sample_potential(self, spec: PotentialSpec, grid: Grid) -> MatrixPotentialField:
        if spec.center is not None and len(spec.center) != grid.d:
            raise FieldShapeError(f"center has {len(spec.center)} coordinates, grid has d={grid.d}")
        logger.info(f"Sampling {spec.family} potential on d={grid.d}, n={grid.n}, L={grid.L:g}")

        if spec.family == "file":
            return self._load(spec, grid)
        if spec.family == "matrix_dense_random":
            return self._dense_random(spec, grid)
        if spec.family == "complex_rotation":
            profile = self._real_profile(spec.base_family, spec, grid) * np.exp(1j * spec.phase)
        else:
            profile = self._real_profile(spec.family, spec, grid)
        return MatrixPotentialField.scalar(ScalarField(grid=grid, samples=profile))

    def _real_profile(self, family: str, spec: PotentialSpec, grid: Grid) -> np.ndarray:
        displacement = torus_displacement(grid, spec.center)
        r2 = np.sum(displacement ** 2, axis=-1)
        if family == "gaussian_scalar":
            return spec.amplitude * np.exp(-r2 / spec.width ** 2)
        if family == "step_scalar":
            inside = np.all((displacement >= -spec.width) & (displacement < spec.width), axis=-1)
            return spec.amplitude * inside.astype(float)
        if family == "inverse_square_regularized":
            return spec.amplitude / (r2 + spec.epsilon ** 2)
        raise ValueError(f"{family} is not a real scalar family")

    def _dense_random(self, spec: PotentialSpec, grid: Grid) -> MatrixPotentialField:
        rng = np.random.default_rng(spec.seed)
        d = grid.d
        if spec.pointwise_random:
            shape = grid.shape + (d, d)
            draws = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
            return MatrixPotentialField(grid=grid, samples=spec.amplitude * draws)
        matrix = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        matrix /= np.linalg.norm(matrix, 2)
        envelope = self._real_profile("gaussian_scalar", spec.model_copy(update={"amplitude": 1.0}), grid)
        return MatrixPotentialField(grid=grid, samples=spec.amplitude * envelope[..., None, None] * matrix)

    def _load(self, spec: PotentialSpec, grid: Grid) -> MatrixPotentialField:
        field = self.field_repository.load_field(spec.path)
        if field.grid != grid:
            raise FieldShapeError(
                f"{spec.path} holds a field on d={field.grid.d}, n={field.grid.n}, L={field.grid.L:g}; "
                f"requested d={grid.d}, n={grid.n}, L={grid.L:g}"
            )
        if isinstance(field, ScalarField):
            return MatrixPotentialField.scalar(field)
        if not isinstance(field, MatrixPotentialField):
            raise FieldShapeError(f"{spec.path} holds a vector field, not a potential")
        return field
