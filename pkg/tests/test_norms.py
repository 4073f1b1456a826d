import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import DegenerateInputError, DomainError, ParameterError
from src.models.fields import MatrixPotentialField, ScalarField
from src.models.grid import Grid
from src.models.operators import DyadicCube
from src.models.potential import PotentialSpec
from src.services.norms import ks_combined_norm
from src.services.verification import kerman_sawyer_oracle
from src.utils.linalg import induced_pnorm, power_iter
from src.utils.quadrature import cell_kernel_constant


def test_induced_norms_exact_cases(rng):
    M = rng.standard_normal((5, 3, 3)) + 1j * rng.standard_normal((5, 3, 3))
    for p, order in ((1, 1), (2, 2), (np.inf, np.inf)):
        values, _ = induced_pnorm(M, p)
        assert_allclose(values, [np.linalg.norm(m, order) for m in M], rtol=1e-12)


def test_induced_norm_between_column_bound_and_interpolation(rng):
    M = rng.standard_normal((20, 3, 3))
    p = 3.0
    values, _ = induced_pnorm(M, p)
    columns = ((np.abs(M) ** p).sum(axis=-2) ** (1 / p)).max(axis=-1)
    upper = [np.linalg.norm(m, 1) ** (1 / p) * np.linalg.norm(m, np.inf) ** (1 - 1 / p) for m in M]
    assert np.all(values >= columns * (1 - 1e-12))
    assert np.all(values <= np.array(upper) * (1 + 1e-12))


def test_lp_norm_of_scalar_potential(norm_service, grid2, constant_potential):
    V = constant_potential(grid2, 2.0)
    report = norm_service.lp_norm(V, 1.5)
    assert report.value == pytest.approx(2.0 * (4 * math.pi ** 2) ** (2 / 3))
    with pytest.raises(ParameterError):
        norm_service.lp_norm(V, 0.5)


def test_lp_norm_accepts_p_one(norm_service, grid2, constant_potential):
    V = constant_potential(grid2, 1.0)
    assert norm_service.lp_norm(V, 1.0).value == pytest.approx(4 * math.pi ** 2)


@pytest.mark.parametrize("p,expected", [(2.0, 4.0), (3.0, 4.0), (np.inf, 4.0)])
def test_matrix_pointwise_norm_of_diagonal(norm_service, grid2, p, expected):
    samples = np.broadcast_to(np.diag([3.0, -4.0]).astype(complex), grid2.shape + (2, 2)).copy()
    pointwise = norm_service.matrix_pointwise_norm(MatrixPotentialField(grid=grid2, samples=samples), p)
    assert_allclose(np.real(pointwise.samples), expected, rtol=1e-10)


@pytest.mark.parametrize("p", [1.0, 0.5])
def test_matrix_pointwise_norm_needs_p_above_one(norm_service, grid2, constant_potential, p):
    with pytest.raises(ParameterError):
        norm_service.matrix_pointwise_norm(constant_potential(grid2, 1.0), p)


def test_morrey_campanato_homogeneous(norm_service, potential_service, grid2):
    V = potential_service.sample_potential(PotentialSpec(amplitude=1.0), grid2)
    one = norm_service.morrey_campanato_norm(V, 1.0, 1.5)
    three = norm_service.morrey_campanato_norm(V.scaled(3.0), 1.0, 1.5)
    assert three.value == pytest.approx(3 * one.value)
    assert one.restricted_family
    assert one.argmax["radius"] in one.params["radii"]


def test_morrey_campanato_parameter_checks(norm_service, grid2, constant_potential):
    V = constant_potential(grid2, 1.0)
    with pytest.raises(ParameterError):
        norm_service.morrey_campanato_norm(V, 1.0, 3.0)
    with pytest.raises(ParameterError):
        norm_service.morrey_campanato_norm(V, 1.0, 1.0, radii=[grid2.h / 2])
    with pytest.raises(ParameterError):
        norm_service.morrey_campanato_norm(V, 1.0, 1.0, radii=[grid2.L])


def test_a2_of_two_valued_weight(norm_service):
    grid = Grid(d=2, n=8, L=2 * math.pi)
    a, b = 1.0, 9.0
    weight = np.where(np.arange(8)[:, None] < 4, a, b) * np.ones(grid.shape)
    report = norm_service.a_p_constant(ScalarField(grid=grid, samples=weight), 2.0)
    assert report.value == pytest.approx((a + b) * (1 / a + 1 / b) / 4)
    assert report.argmax["level"] == 0


def test_a_p_constant_weight_is_one(norm_service, grid2):
    assert norm_service.a_p_constant(ScalarField.constant(grid2, 3.0), 2.0).value == pytest.approx(1.0)


def test_a_p_rejects_nonpositive_weight(norm_service, grid2):
    with pytest.raises(DomainError):
        norm_service.a_p_constant(ScalarField.constant(grid2, 0.0), 2.0)
    with pytest.raises(ParameterError):
        norm_service.a_p_constant(ScalarField.constant(grid2, 1.0), 1.0)


def test_kerman_sawyer_against_dense_oracle(norm_service, rng):
    grid = Grid(d=2, n=16, L=2 * math.pi)
    W = ScalarField(grid=grid, samples=rng.uniform(0.0, 1.0, grid.shape))
    report = norm_service.kerman_sawyer_norm(W, 1.0)
    oracle = kerman_sawyer_oracle(W.samples.real, grid, 1.0, report.params["max_level"])
    bound = report.diagnostics["diagonal_correction_bound"]
    assert oracle * (1 - 1e-10) <= report.value <= (oracle + bound) * (1 + 1e-10)


def test_kerman_sawyer_argmax_is_a_dyadic_cube(norm_service):
    grid = Grid(d=2, n=16, L=2 * math.pi)
    samples = np.full(grid.shape, 1e-3)
    samples[10:12, 4:6] = 5.0
    report = norm_service.kerman_sawyer_norm(ScalarField(grid=grid, samples=samples), 1.0)
    cube = DyadicCube(level=report.argmax["level"], index=report.argmax["index"])
    assert report.argmax["side"] == pytest.approx(grid.L / 2 ** cube.level)
    assert np.max(samples[cube.slices(grid)]) == 5.0


def test_kerman_sawyer_input_checks(norm_service, grid2):
    with pytest.raises(DegenerateInputError):
        norm_service.kerman_sawyer_norm(ScalarField.constant(grid2, 0.0), 1.0)
    with pytest.raises(ParameterError):
        norm_service.kerman_sawyer_norm(ScalarField.constant(grid2, 1.0), 2.0)
    with pytest.raises(DomainError):
        norm_service.kerman_sawyer_norm(ScalarField.constant(grid2, -1.0), 1.0)


def test_cell_kernel_constant_d1_closed_form():
    assert cell_kernel_constant(1, 0.5) == pytest.approx(2 / (0.5 * 1.5))


def test_cell_kernel_constant_d2_regular_kernel():
    # alpha = d + 1 makes the kernel |x - y|, whose mean over the unit square pair is known
    expected = (2 + math.sqrt(2) + 5 * math.log(1 + math.sqrt(2))) / 15
    assert cell_kernel_constant(2, 3.0) == pytest.approx(expected, rel=1e-8)


def test_hardy_constant_of_constant_potential(norm_service, grid2, constant_potential):
    # sup ∫c|f|²/∫|∇f|² over mean-zero f is c/(2π/L)²
    report = norm_service.hardy_constant_estimate(constant_potential(grid2, 0.5))
    assert report.value == pytest.approx(0.5, rel=1e-6)


def test_hardy_constant_of_zero_potential(norm_service, grid2):
    with pytest.raises(DegenerateInputError):
        norm_service.hardy_constant_estimate(MatrixPotentialField.zeros(grid2))


def test_maximal_regularization_dominates(norm_service, potential_service, grid2):
    V = potential_service.sample_potential(PotentialSpec(family="step_scalar", width=1.0), grid2)
    scalar = ScalarField(grid=grid2, samples=norm_service.magnitude(V))
    W = norm_service.maximal_regularize(scalar, 2.0)
    assert np.all(W.samples.real >= np.abs(scalar.samples) - 1e-14)
    with pytest.raises(ParameterError):
        norm_service.maximal_regularize(scalar, 1.0)


def test_ks_combined_norm():
    assert ks_combined_norm(2.0, 8.0, 3.0) == pytest.approx(8.0)


def test_power_iteration_on_diagonal():
    d = np.array([3.0, 1.0, 0.5])
    result = power_iter(lambda x: d * x, lambda y: d * y, np.ones(3, dtype=complex), tol=1e-12)
    assert result.converged
    assert result.sigma == pytest.approx(3.0, rel=1e-10)
