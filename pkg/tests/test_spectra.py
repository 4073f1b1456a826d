import cmath
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.config.settings import settings
from src.errors import (
    DomainError,
    FieldShapeError,
    GeometryError,
    InputError,
    ParameterError,
    QuantizationError,
    SizeError,
    SolverError,
    UnsupportedDimensionError,
)
from src.models.enclosure import EnclosureSpec
from src.models.fields import MatrixPotentialField, VectorField
from src.models.grid import Grid, LameParams
from src.models.potential import PotentialSpec
from src.repositories.cache import SpectrumCache
from src.services.spectra import (
    ABSENCE_VIOLATION,
    CONTAINED,
    ESSENTIAL,
    OUTSIDE_DISK,
    DiscreteHamiltonian,
    SpectraService,
    is_hermitian,
    j_conjugate,
    symmetry_defects,
)
from src.services.verification import free_symbol_values


@pytest.fixture
def random_potential(potential_service):
    def make(grid: Grid, seed: int = 0) -> MatrixPotentialField:
        spec = PotentialSpec(family="matrix_dense_random", pointwise_random=True, seed=seed, amplitude=0.5)
        return potential_service.sample_potential(spec, grid)
    return make


def test_free_spectrum_matches_symbol(spectra_service, params, small_grid):
    H = spectra_service.assemble_hamiltonian(MatrixPotentialField.zeros(small_grid), params, small_grid)
    report = spectra_service.eigenvalues(H)
    assert H.dimension == 32
    assert report.hermitian
    assert_allclose(np.sort(report.eigenvalues.real), free_symbol_values(small_grid, params), atol=1e-10)
    assert np.max(report.residuals) <= 1e-10


def test_dense_matches_matrix_free(spectra_service, params, small_grid, random_potential, random_vector):
    V = random_potential(small_grid)
    H = spectra_service.assemble_hamiltonian(V, params, small_grid)
    u = random_vector(small_grid)
    scale = np.max(np.abs(H.dense))
    assert_allclose(H.dense @ u.flat(), H.apply(u).flat(), atol=1e-11 * scale)


def test_batch_apply_matches_single(params, small_grid, random_potential, rng):
    H = DiscreteHamiltonian(small_grid, params, random_potential(small_grid))
    X = rng.standard_normal((H.dimension, 3)) + 1j * rng.standard_normal((H.dimension, 3))
    batch = H.apply_batch(X)
    for k in range(3):
        u = VectorField(grid=small_grid, samples=X[:, k].reshape(small_grid.shape + (2,)))
        assert_allclose(batch[:, k], H.apply(u).flat(), atol=1e-12)


def test_hamiltonian_grid_mismatch(params, grid2, small_grid):
    with pytest.raises(FieldShapeError):
        DiscreteHamiltonian(grid2, params, MatrixPotentialField.zeros(small_grid))


def test_real_symmetric_potential_gives_hermitian_matrix(spectra_service, params, small_grid, potential_service):
    V = potential_service.sample_potential(PotentialSpec(amplitude=0.5), small_grid)
    H = spectra_service.assemble_hamiltonian(V, params, small_grid)
    assert is_hermitian(H.dense)
    report = spectra_service.eigenvalues(H)
    assert report.hermitian
    assert np.all(report.eigenvalues.imag == 0)


@pytest.mark.parametrize("matrix,hermitian", [
    (np.array([[2.0, 1.0], [1.0, 2.0]]), True),
    (np.array([[1.0, 2.0], [0.0, 3.0]]), False),
])
def test_solve_dense_two_by_two(spectra_service, matrix, hermitian):
    w, U, residuals, is_herm = spectra_service.solve_dense(matrix.astype(complex))
    assert is_herm is hermitian
    assert_allclose(w, [1.0, 3.0], atol=1e-12)
    assert np.max(residuals) <= 1e-12


def test_solve_dense_sorts_by_real_then_imaginary(spectra_service):
    w, *_ = spectra_service.solve_dense(np.diag([1 + 1j, 1 - 1j, -2 + 0j]))
    assert_allclose(w, [-2, 1 - 1j, 1 + 1j])


def test_residual_tolerance_overrides_setting(spectra_service, rng):
    matrix = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    _, _, residuals, _ = spectra_service.solve_dense(matrix)
    assert np.max(residuals) > 0
    with pytest.raises(SolverError):
        spectra_service.solve_dense(matrix, residual_tol=1e-30)


def test_spectrum_cache(tmp_path):
    service = SpectraService(cache=SpectrumCache(tmp_path))
    matrix = np.array([[1.0, 1.0], [0.0, 2.0]], dtype=complex)
    first = service.solve_dense(matrix)[0]
    assert len(list(tmp_path.glob("*.npz"))) == 1
    second = service.solve_dense(matrix)[0]
    assert_allclose(first, second)
    assert_allclose(first, [1.0, 2.0], atol=1e-12)


def test_dense_cap(params, small_grid):
    capped = settings.model_copy(update={"spectra": settings.spectra.model_copy(update={"DENSE_CAP": 10})})
    service = SpectraService(settings=capped)
    with pytest.raises(SizeError):
        service.assemble_hamiltonian(MatrixPotentialField.zeros(small_grid), params, small_grid)


def test_zero_potential_is_all_essential(spectra_service, enclosure_service, params, small_grid):
    H = spectra_service.assemble_hamiltonian(MatrixPotentialField.zeros(small_grid), params, small_grid)
    spec = EnclosureSpec(gamma=0.5, d=2, params=params, constant_mode="configured")
    report = spectra_service.spectrum_report(H, enclosure_service.enclosure_disk(spec, 0.0))
    assert report.violations == 0
    assert set(report.verdicts) == {ESSENTIAL}
    assert all(value is None for value in report.eigencheck)


def test_small_potential_stays_in_tube(spectra_service, enclosure_service, params, small_grid, potential_service):
    V = potential_service.sample_potential(PotentialSpec(family="complex_rotation", phase=1.0, amplitude=0.2), small_grid)
    H = spectra_service.assemble_hamiltonian(V, params, small_grid)
    spec = EnclosureSpec(gamma=0.5, d=2, params=params, constant_mode="configured")
    report = spectra_service.spectrum_report(H, enclosure_service.enclosure_disk(spec, 1e-3))
    assert report.essential_margin == pytest.approx(10 * 0.2 / 4)
    assert set(report.verdicts) == {ESSENTIAL}


def test_containment_verdicts(spectra_service, enclosure_service, params, small_grid, constant_potential):
    H = spectra_service.assemble_hamiltonian(constant_potential(small_grid, 2j), params, small_grid)
    report = spectra_service.eigenvalues(H)

    disk = enclosure_service.enclosure_disk(
        EnclosureSpec(gamma=0.5, d=2, params=params, constant_mode="configured", configured_constant=1e-3), 1.0,
    )
    outside = spectra_service.containment_check(report, disk, essential_margin=0.1)
    assert set(outside.verdicts) == {OUTSIDE_DISK}
    assert outside.violations == 32

    wide = disk.model_copy(update={"radius": 1e6})
    assert set(spectra_service.containment_check(report, wide, essential_margin=0.1).verdicts) == {CONTAINED}

    spec3 = EnclosureSpec(gamma=0.0, d=3, params=params)
    absence = enclosure_service.enclosure_disk(spec3, 1e-3).model_copy(update={"d": 2})
    verdicts = spectra_service.containment_check(report, absence, essential_margin=0.1).verdicts
    assert set(verdicts) == {ABSENCE_VIOLATION}


def test_containment_rejects_mismatched_disk(spectra_service, enclosure_service, params, small_grid):
    report = spectra_service.eigenvalues(
        spectra_service.assemble_hamiltonian(MatrixPotentialField.zeros(small_grid), params, small_grid)
    )
    other = LameParams(lam=2.0, mu=1.0)
    disk = enclosure_service.enclosure_disk(EnclosureSpec(gamma=0.5, d=2, params=other, constant_mode="configured"), 0.1)
    with pytest.raises(InputError):
        spectra_service.containment_check(report, disk)


def test_eigencheck_on_shifted_free_operator(spectra_service, enclosure_service, params, small_grid, constant_potential):
    c = 0.3 * cmath.exp(1j * math.pi / 4)
    H = spectra_service.assemble_hamiltonian(constant_potential(small_grid, c), params, small_grid)
    disk = enclosure_service.enclosure_disk(EnclosureSpec(gamma=0.5, d=2, params=params, constant_mode="configured"), 1.0)
    report = spectra_service.spectrum_report(H, disk, essential_margin=0.01)
    assert ESSENTIAL not in report.verdicts
    assert max(report.eigencheck) <= 1e-8


def test_containment_scan_zero_potential(spectra_service, params, small_grid):
    spec = EnclosureSpec(gamma=0.5, d=2, params=params, constant_mode="configured")
    rows = spectra_service.containment_scan(MatrixPotentialField.zeros(small_grid), params, small_grid, spec, 0.0)
    assert [row["violations"] for row in rows] == [0] * 5
    with pytest.raises(ParameterError):
        spectra_service.containment_scan(MatrixPotentialField.zeros(small_grid), params, small_grid, spec, 0.0, ts=[2.0])


def test_admissible_levels(spectra_service, params, grid3):
    assert_allclose(spectra_service.admissible_levels("S", params, grid3), [1.0, 4.0, 9.0])
    assert_allclose(spectra_service.admissible_levels("P", params, grid3), [3.0, 12.0, 27.0])


@pytest.mark.parametrize("mode,z", [("S", 1.0), ("S", 9.0), ("P", 12.0)])
def test_plane_wave_solves_free_equation(spectra_service, params, grid3, mode, z):
    result = spectra_service.plane_wave(z, mode, 0, params, grid3)
    assert result.residual <= 1e-12
    assert result.max_modulus_error <= 1e-13
    if mode == "S":
        assert result.divergence_norm <= 1e-12
        assert result.polarization == (0.0, 1.0, 0.0)
    else:
        assert result.polarization == (1.0, 0.0, 0.0)


def test_plane_wave_custom_polarization(spectra_service, params, grid3):
    e = (0.0, 0.6, 0.8)
    result = spectra_service.plane_wave(4.0, "S", 0, params, grid3, polarization=e)
    assert result.residual <= 1e-12
    with pytest.raises(ParameterError):
        spectra_service.plane_wave(4.0, "S", 0, params, grid3, polarization=(1.0, 0.0, 0.0))


def test_plane_wave_quantization(spectra_service, params, grid3):
    with pytest.raises(QuantizationError) as e:
        spectra_service.plane_wave(1.5, "S", 0, params, grid3)
    assert_allclose(e.value.nearest, [1.0, 4.0])
    with pytest.raises(QuantizationError):
        spectra_service.plane_wave(16.0, "S", 0, params, grid3)


def test_plane_wave_domain(spectra_service, params, grid3):
    with pytest.raises(DomainError):
        spectra_service.plane_wave(0.0, "S", 0, params, grid3)
    with pytest.raises(ParameterError):
        spectra_service.plane_wave(1.0, "S", 3, params, grid3)
    with pytest.raises(UnsupportedDimensionError):
        spectra_service.plane_wave(1.0, "S", 0, params, Grid(d=1, n=8, L=2 * math.pi))


def test_weyl_sequence_residuals_decay(spectra_service, params):
    grid = Grid(d=2, n=128, L=2 * math.pi)
    report = spectra_service.weyl_residual(1.0, 8, params, grid)
    assert report.scales == [1, 2, 4, 8]
    assert report.monotone
    assert report.total_decay >= 4
    assert_allclose(report.norms, 1.0, rtol=1e-10)


def test_weyl_bump_must_fit(spectra_service, params, grid2):
    with pytest.raises(GeometryError):
        spectra_service.weyl_residual(1.0, 16, params, grid2)


def test_j_conjugation_of_random_potentials(spectra_service, params, small_grid, random_potential):
    for seed in range(3):
        report = spectra_service.adjoint_symmetry_check(random_potential(small_grid, seed), params, small_grid)
        assert report.passed, report


def test_j_conjugate_swaps_pointwise_blocks():
    M = np.arange(16, dtype=complex).reshape(4, 4) * 1j
    J = j_conjugate(M, 2)
    assert J[0, 1] == np.conj(M[1, 0])
    assert J[0, 2] == np.conj(M[0, 2])


def test_symmetry_defects_detect_a_wrong_adjoint(spectra_service, params, small_grid, random_potential):
    V = random_potential(small_grid, seed=1)
    H = spectra_service.assemble_hamiltonian(V, params, small_grid).dense
    H_adjoint = spectra_service.assemble_hamiltonian(V.conjugate_transpose(), params, small_grid).dense
    assert max(symmetry_defects(H, H_adjoint, small_grid.d)) <= 1e-11

    # H(V) is not H(V̄ᵗ) for a complex non-symmetric V
    adjoint_defect, j_defect = symmetry_defects(H, H, small_grid.d)
    assert adjoint_defect > 1e-3
    assert j_defect > 1e-3


def test_j_defect_flags_a_kernel_that_is_not_even():
    M = np.zeros((4, 4), dtype=complex)
    M[0, 3] = 1.0
    assert max(symmetry_defects(M, M.conj().T, 2)) == pytest.approx(1.0)
