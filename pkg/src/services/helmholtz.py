import logging
import math
from typing import Optional

import numpy as np

from src.config.settings import settings as default_settings
from src.errors import DomainError, UnsupportedDimensionError
from src.models.fields import ScalarField, VectorField
from src.models.grid import Grid
from src.models.operators import HelmholtzPair
from src.schemas import OrthogonalityReport, WeightedRieszReport
from src.services.norms import WeightedNormService
from src.utils import spectral
from src.utils.linalg import power_iter, random_start

logger = logging.getLogger(__name__)


def riesz_constant(p: float) -> float:
    """Unweighted L^p norm of a Riesz transform, cot(π/(2 max{p, p'}))."""
    if not 1 < p < math.inf:
        raise DomainError(f"p must lie in (1, inf), got {p}")
    p_max = max(p, p / (p - 1))
    return 1 / math.tan(math.pi / (2 * p_max))


def riesz_multiplier(grid: Grid, j: int) -> np.ndarray:
    """-iξ_j/|ξ|, zero at ξ = 0."""
    if not 0 <= j < grid.d:
        raise DomainError(f"axis {j} outside 0..{grid.d - 1}")
    return -1j * grid.wavevectors[..., j] * spectral.inverse_norm_multiplier(grid, 1)


def longitudinal_coefficients(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    """Fourier coefficients of π_P: ξ(ξ·û)/|ξ|², zero at ξ = 0."""
    xi = grid.wavevectors
    inv_xi2 = spectral.inverse_norm_multiplier(grid, 2)
    projection = np.einsum("...k,...k->...", xi, coefficients) * inv_xi2
    return xi * projection[..., None]


class HelmholtzService:
    """Riesz transforms and the S/P (transversal/longitudinal) splitting of vector fields."""

    def __init__(self, norm_service: Optional[WeightedNormService] = None, settings=None):
        self.settings = settings or default_settings
        self.norm_service = norm_service or WeightedNormService(settings=self.settings)

    def riesz_apply(self, f: ScalarField, j: int) -> ScalarField:
        grid = f.grid
        return f.with_samples(spectral.apply_multiplier(f.samples, grid, riesz_multiplier(grid, j)))

    def split_coefficients(self, coefficients: np.ndarray, grid: Grid):
        """(û_S, û_P) with the constant mode kept in û_S."""
        longitudinal = longitudinal_coefficients(coefficients, grid)
        return coefficients - longitudinal, longitudinal

    def helmholtz_split(self, u: VectorField) -> HelmholtzPair:
        grid = u.grid
        if grid.d < 2:
            raise UnsupportedDimensionError("the S/P splitting needs d >= 2; in d = 1 the Lamé operator is scalar")
        transversal, longitudinal = self.split_coefficients(spectral.forward(u.samples, grid), grid)
        return HelmholtzPair(
            u_S=u.with_samples(spectral.inverse(transversal, grid)),
            u_P=u.with_samples(spectral.inverse(longitudinal, grid)),
        )

    def gradient(self, phi: ScalarField) -> VectorField:
        grid = phi.grid
        coefficients = spectral.forward(phi.samples, grid)
        return VectorField(grid=grid, samples=spectral.inverse(1j * grid.wavevectors * coefficients[..., None], grid))

    def divergence(self, u: VectorField) -> ScalarField:
        grid = u.grid
        coefficients = spectral.forward(u.samples, grid)
        div = np.einsum("...k,...k->...", 1j * grid.wavevectors, coefficients)
        return ScalarField(grid=grid, samples=spectral.inverse(div, grid))

    def curl2d(self, psi: ScalarField) -> VectorField:
        """(-∂₂ψ, ∂₁ψ), divergence-free by construction."""
        if psi.grid.d != 2:
            raise UnsupportedDimensionError("curl2d is defined for d = 2")
        grad = self.gradient(psi).samples
        return VectorField(grid=psi.grid, samples=np.stack([-grad[..., 1], grad[..., 0]], axis=-1))

    def laplacian(self, u: VectorField) -> VectorField:
        return u.with_samples(spectral.apply_multiplier(u.samples, u.grid, -u.grid.wavenumber_squared))

    def orthogonality_report(self, g: VectorField, p: float) -> OrthogonalityReport:
        c_p = riesz_constant(p)
        constant = 1 + 2 * g.grid.d * c_p ** 2
        pair = self.helmholtz_split(g)
        s_norm, p_norm, g_norm = pair.u_S.lp_norm(p), pair.u_P.lp_norm(p), g.lp_norm(p)
        lhs, rhs = s_norm + p_norm, constant * g_norm
        holds = lhs <= rhs * (1 + 1e-12)
        if not holds:
            logger.warning(f"Almost-orthogonality violated at p={p:g}: {lhs:.6e} > {rhs:.6e}")
        return OrthogonalityReport(
            p=p, c_p=c_p, constant=constant, g_norm=g_norm, s_norm=s_norm, p_norm=p_norm,
            lhs=lhs, rhs=rhs, holds=holds,
        )

    def weighted_riesz_norm_estimate(
            self,
            w: ScalarField,
            j: int,
            tol: Optional[float] = None,
            max_iter: Optional[int] = None,
            seed: Optional[int] = None,
    ) -> WeightedRieszReport:
        """Empirical ‖R_j‖ on L²(w dx), as the norm of w^{1/2} R_j w^{-1/2} on L²."""
        weight = np.real(w.samples)
        if np.any(np.abs(np.imag(w.samples)) > 0) or np.any(weight <= 0):
            raise DomainError("weight must be real and strictly positive")
        tol = tol or self.settings.tolerance.POWER_ITERATION_TOL
        max_iter = max_iter or self.settings.tolerance.POWER_ITERATION_MAX_ITER
        seed = self.settings.runtime.DEFAULT_SEED if seed is None else seed

        grid = w.grid
        multiplier = riesz_multiplier(grid, j)
        root = np.sqrt(weight)

        def apply(g: np.ndarray) -> np.ndarray:
            return root * spectral.apply_multiplier(g / root, grid, multiplier)

        def apply_adjoint(y: np.ndarray) -> np.ndarray:
            return spectral.apply_multiplier(root * y, grid, np.conj(multiplier)) / root

        result = power_iter(
            apply, apply_adjoint, random_start(grid.shape, seed),
            max_iter=max_iter, tol=tol, label=f"weighted Riesz R_{j}",
        )
        q2 = self.norm_service.a_p_constant(w, 2.0).value
        configured = self.settings.constants.RIESZ_C
        return WeightedRieszReport(
            axis=j, estimate=result.sigma, iterations=result.iterations, converged=result.converged,
            q2=q2, ratio=result.sigma / q2, configured_constant=configured,
            within_configured_bound=result.sigma <= configured * q2,
        )
