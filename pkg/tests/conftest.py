import math

import numpy as np
import pytest

from src.models.fields import MatrixPotentialField, ScalarField, VectorField
from src.models.grid import Grid, LameParams
from src.services.enclosure import EnclosureService
from src.services.helmholtz import HelmholtzService
from src.services.lame import LameOperatorService
from src.services.norms import WeightedNormService
from src.services.potentials import PotentialService
from src.services.spectra import SpectraService


@pytest.fixture
def params():
    return LameParams(lam=1.0, mu=1.0)


@pytest.fixture
def grid2():
    return Grid(d=2, n=8, L=2 * math.pi)


@pytest.fixture
def grid3():
    return Grid(d=3, n=8, L=2 * math.pi)


@pytest.fixture
def small_grid():
    return Grid(d=2, n=4, L=2 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def random_vector(rng):
    def make(grid: Grid) -> VectorField:
        shape = grid.shape + (grid.d,)
        return VectorField(grid=grid, samples=rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return make


@pytest.fixture
def constant_potential():
    def make(grid: Grid, value: complex) -> MatrixPotentialField:
        return MatrixPotentialField.scalar(ScalarField.constant(grid, value))
    return make


@pytest.fixture
def norm_service():
    return WeightedNormService()


@pytest.fixture
def helmholtz_service(norm_service):
    return HelmholtzService(norm_service)


@pytest.fixture
def lame_service():
    return LameOperatorService()


@pytest.fixture
def enclosure_service():
    return EnclosureService()


@pytest.fixture
def potential_service():
    return PotentialService()


@pytest.fixture
def spectra_service(lame_service, helmholtz_service, enclosure_service):
    return SpectraService(lame_service, helmholtz_service, enclosure_service)
