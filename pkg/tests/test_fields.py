import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from src.errors import FieldShapeError, ParameterError
from src.models.base import jsonable
from src.models.fields import MatrixPotentialField, ScalarField, VectorField
from src.models.grid import Grid, LameParams, make_grid
from src.models.potential import PotentialSpec
from src.utils import spectral


@pytest.mark.parametrize("n", [2, 6, 12])
def test_grid_rejects_non_power_of_two(n):
    with pytest.raises(ValidationError):
        Grid(d=2, n=n, L=1.0)


def test_make_grid_raises_parameter_error():
    with pytest.raises(ParameterError):
        make_grid(4, 8, 1.0)


def test_grid_geometry(grid2):
    assert grid2.shape == (8, 8)
    assert grid2.size == 64
    assert grid2.h == pytest.approx(math.pi / 4)
    assert grid2.wavevectors.shape == (8, 8, 2)
    # lattice 2πm/L with L = 2π is the integers
    assert_allclose(np.sort(grid2.frequencies), np.arange(-4, 4))


def test_lame_params_ellipticity():
    with pytest.raises(ValidationError):
        LameParams(lam=-3.0, mu=1.0)
    with pytest.raises(ValidationError):
        LameParams(lam=1.0, mu=0.0)
    params = LameParams(**{"lambda": 3.0, "mu": 0.5})
    assert params.p_modulus == 4.0
    assert params.min_modulus == 0.5


def test_vector_field_shape_mismatch(grid2):
    with pytest.raises(FieldShapeError):
        VectorField(grid=grid2, samples=np.zeros((8, 8, 3)))


def test_non_finite_samples_rejected(grid2):
    samples = np.zeros((8, 8))
    samples[0, 0] = np.nan
    with pytest.raises(ValidationError):
        ScalarField(grid=grid2, samples=samples)


def test_samples_are_read_only(grid2):
    field = ScalarField.constant(grid2, 1.0)
    with pytest.raises(ValueError):
        field.samples[0, 0] = 2.0


def test_forward_maps_constant_to_zero_frequency(grid2):
    coefficients = spectral.forward(np.full(grid2.shape, 3.0 + 1j), grid2)
    assert coefficients[0, 0] == pytest.approx(3.0 + 1j)
    coefficients[0, 0] = 0
    assert np.max(np.abs(coefficients)) < 1e-14


def test_transform_roundtrip(grid3, rng):
    f = ScalarField(grid=grid3, samples=rng.standard_normal(grid3.shape) + 1j * rng.standard_normal(grid3.shape))
    back = spectral.spectral_transform(spectral.spectral_transform(f, "forward"), "inverse")
    assert_allclose(back.samples, f.samples, atol=1e-12)


def test_batched_transform_matches_single(grid2, rng):
    stack = rng.standard_normal((3,) + grid2.shape + (2,))
    batched = spectral.forward(stack, grid2, batch=1)
    for k in range(3):
        assert_allclose(batched[k], spectral.forward(stack[k], grid2), atol=1e-14)


def test_lp_norm_of_constant(grid2):
    f = ScalarField.constant(grid2, 1.0)
    assert f.lp_norm(2) == pytest.approx(2 * math.pi)
    assert f.lp_norm(np.inf) == 1.0


def test_torus_displacement_range(grid2):
    displacement = spectral.torus_displacement(grid2, np.array([0.1, 6.0]))
    assert np.all(displacement >= -math.pi) and np.all(displacement < math.pi)


def test_matrix_potential_operations(grid2):
    V = MatrixPotentialField.scalar(ScalarField.constant(grid2, 2j))
    u = VectorField(grid=grid2, samples=np.ones(grid2.shape + (2,)))
    assert_allclose(V.apply(u).samples, 2j * u.samples)
    assert_allclose(V.conjugate_transpose().samples, -V.samples)
    assert V.sup_norm() == pytest.approx(2.0)
    assert MatrixPotentialField.zeros(grid2).is_zero()


def test_fields_on_different_grids_do_not_combine(grid2, small_grid):
    with pytest.raises(FieldShapeError):
        VectorField.zeros(grid2) + VectorField.zeros(small_grid)


def test_potential_spec_requires_epsilon():
    with pytest.raises(ValidationError):
        PotentialSpec(family="inverse_square_regularized")
    with pytest.raises(ValidationError):
        PotentialSpec(family="file")


def test_gaussian_potential_peaks_at_center(potential_service, grid2):
    V = potential_service.sample_potential(PotentialSpec(amplitude=2.0), grid2)
    assert V.sup_norm() == pytest.approx(2.0)
    assert V.operator_norm()[4, 4] == pytest.approx(2.0)


def test_complex_rotation_phase(potential_service, grid2):
    V = potential_service.sample_potential(PotentialSpec(family="complex_rotation", phase=math.pi / 2), grid2)
    assert np.max(np.abs(V.samples.real)) < 1e-15
    assert V.samples[4, 4, 0, 0] == pytest.approx(1j)


def test_random_potential_is_seeded(potential_service, grid2):
    spec = PotentialSpec(family="matrix_dense_random", pointwise_random=True, seed=3)
    first = potential_service.sample_potential(spec, grid2)
    second = potential_service.sample_potential(spec, grid2)
    assert_allclose(first.samples, second.samples)


def test_jsonable_handles_complex_and_infinity():
    assert jsonable({"z": 1 + 2j, "r": math.inf, "a": np.arange(2)}) == {"z": [1.0, 2.0], "r": "inf", "a": [0, 1]}
