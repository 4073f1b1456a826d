import cmath
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import DegenerateInputError, DomainError, NearSingularError, ParameterError
from src.models.fields import MatrixPotentialField, VectorField
from src.models.grid import LameParams
from src.models.potential import PotentialSpec
from src.services.enclosure import hls_factor_d3
from src.services.lame import (
    diagonalize_symbol,
    green_kernel_3d,
    is_embedded,
    lame_symbol,
    matrix_polar_factors,
    reference_basis_d3,
)


def test_symbol_eigenvalues(params):
    xi = np.array([1.0, 2.0, 2.0])
    symbol = lame_symbol(xi, params)
    assert_allclose(np.linalg.eigvalsh(symbol.L.real), [9.0, 9.0, 27.0])


@pytest.mark.parametrize("lam,mu", [(1.0, 1.0), (-1.0, 1.0), (3.0, 0.5)])
def test_diagonalization(lam, mu, rng):
    params = LameParams(lam=lam, mu=mu)
    xi = rng.uniform(0.5, 2.0, 3)
    symbol = diagonalize_symbol(xi, params)
    scale = params.p_modulus * xi @ xi
    assert symbol.conjugation_defect() <= 1e-12 * scale
    assert symbol.conjugation_defect(symbol.P_reference) <= 1e-10 * scale
    assert_allclose(symbol.P.T @ symbol.P, np.eye(3), atol=1e-14)


def test_reference_basis_determinant(rng):
    xi = rng.standard_normal(3)
    assert np.linalg.det(reference_basis_d3(xi)) == pytest.approx(xi[0] * xi @ xi)


def test_reference_basis_singular_plane(params):
    symbol = diagonalize_symbol([0.0, 1.0, 2.0], params)
    assert symbol.reference_singular
    assert symbol.P_reference is None
    assert symbol.conjugation_defect() <= 1e-12


def test_symbol_at_origin(params):
    with pytest.raises(DegenerateInputError):
        diagonalize_symbol([0.0, 0.0], params)


def test_green_kernel():
    assert green_kernel_3d(2.0, 0) == pytest.approx(1 / (8 * math.pi))
    assert green_kernel_3d(1.0, -4.0) == pytest.approx(math.exp(-2.0) / (4 * math.pi))
    for zeta in (-1 + 2j, 3 - 0.5j, 1j):
        assert abs(green_kernel_3d(0.7, zeta)) <= green_kernel_3d(0.7, 0).real
        assert cmath.sqrt(-zeta).real >= 0
    with pytest.raises(DomainError):
        green_kernel_3d(0.0, -1.0)
    with pytest.raises(DomainError):
        green_kernel_3d(1.0, 2.0)


def test_is_embedded():
    assert is_embedded(0j) and is_embedded(2.5 + 0j)
    assert not is_embedded(-1 + 0j) and not is_embedded(1 + 1e-9j)


@pytest.mark.parametrize("z", [-1.0, -1 + 0.5j, 0.5 + 0.1j, 2 - 3j])
def test_resolvent_inverts_lame_operator(lame_service, params, random_vector, grid3, z):
    g = random_vector(grid3)
    u = lame_service.free_resolvent_apply(g, z, params)
    assert (lame_service.lame_apply(u, params, z) - g).l2_norm() <= 1e-10 * g.l2_norm()


def test_resolvent_near_symbol_value(lame_service, params, random_vector, grid2):
    # μ|ξ|² = 1 at ξ = (1, 0)
    with pytest.raises(NearSingularError) as e:
        lame_service.free_resolvent_apply(random_vector(grid2), 1.0, params)
    assert np.dot(e.value.xi, e.value.xi) == pytest.approx(1.0)


def test_lame_kills_constants(lame_service, params, grid2):
    u = VectorField(grid=grid2, samples=np.ones(grid2.shape + (2,)))
    assert lame_service.lame_apply(u, params).l2_norm() <= 1e-12


def test_polar_factors(rng, small_grid):
    shape = small_grid.shape + (2, 2)
    V = MatrixPotentialField(grid=small_grid, samples=rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    factors = matrix_polar_factors(V)
    assert_allclose(factors.V_half @ factors.absV_sqrt, V.samples, atol=1e-12)
    absV = factors.absV_sqrt @ factors.absV_sqrt
    assert_allclose(absV, np.conj(np.swapaxes(absV, -1, -2)), atol=1e-12)
    assert_allclose(factors.sign @ absV, V.samples, atol=1e-12)


def test_polar_factors_of_rank_one(small_grid):
    V = MatrixPotentialField(grid=small_grid, samples=np.broadcast_to(np.array([[0.0, 2.0], [0.0, 0.0]]), (4, 4, 2, 2)))
    factors = matrix_polar_factors(V)
    assert_allclose(factors.V_half @ factors.absV_sqrt, V.samples, atol=1e-14)
    assert_allclose(factors.sign[0, 0], [[0.0, 1.0], [0.0, 0.0]], atol=1e-14)


def test_bs_norm_of_constant_potential(lame_service, params, grid2, constant_potential):
    # K_z = c (-Δ* - z)^{-1}, whose norm at z = -1 is c/dist(-1, [0, ∞))
    report = lame_service.bs_norm_estimate(-1.0, constant_potential(grid2, 0.3), params)
    assert report.estimate == pytest.approx(0.3, rel=1e-6)


def test_bs_norm_below_explicit_bound(lame_service, norm_service, potential_service, params, grid3):
    V = potential_service.sample_potential(PotentialSpec(amplitude=0.1), grid3)
    bound = hls_factor_d3(params) * norm_service.lp_norm(V, 1.5).value
    report = lame_service.bs_norm_estimate(-1 + 1j, V, params, bounds={"lebesgue": bound})
    assert report.within_bounds["lebesgue"]
    assert report.estimate <= V.sup_norm() * (1 + 1e-6)


def test_bs_norm_embedded_needs_epsilon(lame_service, params, grid2, constant_potential):
    V = constant_potential(grid2, 0.1)
    with pytest.raises(ParameterError):
        lame_service.bs_norm_estimate(0.5, V, params)
    with pytest.raises(ParameterError):
        lame_service.bs_norm_estimate(0.5, V, params, epsilon=-0.1)
    report = lame_service.bs_norm_estimate(0.5, V, params, epsilon=0.1)
    assert report.epsilon == 0.1


def test_epsilon_extrapolation_off_spectrum(lame_service, potential_service, params, grid2):
    V = potential_service.sample_potential(PotentialSpec(amplitude=0.2), grid2)
    report = lame_service.epsilon_extrapolation(-1.0, V, params, epsilons=[0.1, 0.05, 0.025])
    assert report.monotone
    assert len(report.differences) == 3
    assert report.differences[-1] < report.differences[0]


def test_epsilon_extrapolation_embedded(lame_service, potential_service, params, grid2):
    V = potential_service.sample_potential(PotentialSpec(amplitude=0.2), grid2)
    report = lame_service.epsilon_extrapolation(0.5, V, params, epsilons=[0.1, 0.05, 0.025, 0.0125])
    assert report.monotone
    assert len(report.differences) == 3
    assert report.limit_estimate >= 0


def test_epsilon_schedule_must_decrease(lame_service, params, grid2, constant_potential):
    with pytest.raises(ParameterError):
        lame_service.epsilon_extrapolation(0.5, constant_potential(grid2, 0.1), params, epsilons=[0.1, 0.2])


def test_eigencheck_on_exact_eigenpair(lame_service, params, grid2, constant_potential):
    c = 0.3 * cmath.exp(1j * math.pi / 4)
    V = constant_potential(grid2, c)
    u = VectorField(grid=grid2, samples=np.broadcast_to([1.0, 0.0], grid2.shape + (2,)))
    assert lame_service.birman_schwinger_eigencheck(c, u, V, params) <= 1e-12


def test_eigencheck_without_overlap(lame_service, params, grid2):
    u = VectorField(grid=grid2, samples=np.ones(grid2.shape + (2,)))
    assert lame_service.birman_schwinger_eigencheck(-1.0, u, MatrixPotentialField.zeros(grid2), params) is None
