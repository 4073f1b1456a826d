import cmath
import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.linalg

from src.config.settings import settings as default_settings
from src.errors import DegenerateInputError, DomainError, NearSingularError, ParameterError
from src.models.fields import MatrixPotentialField, VectorField
from src.models.grid import Grid, LameParams
from src.models.operators import PolarFactors, SymbolMatrices
from src.schemas import BSNormReport, EpsilonExtrapolationReport
from src.services.helmholtz import longitudinal_coefficients
from src.utils import spectral
from src.utils.linalg import power_iter, random_start

logger = logging.getLogger(__name__)


def is_embedded(z: complex) -> bool:
    """z on the free spectrum [0, ∞)."""
    return z.imag == 0 and z.real >= 0


def green_kernel_3d(r: float, zeta: complex) -> complex:
    """e^{-√(-ζ) r}/(4πr) on the principal branch (Re √(-ζ) ≥ 0)."""
    zeta = complex(zeta)
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    if zeta.imag == 0 and zeta.real > 0:
        raise DomainError(f"zeta={zeta} lies on (0, inf), where the kernel is not defined")
    root = cmath.sqrt(-zeta)
    return cmath.exp(-root * r) / (4 * math.pi * r)


def lame_symbol(xi: Sequence[float], params: LameParams) -> SymbolMatrices:
    xi = np.asarray(xi, dtype=float)
    L = params.mu * np.dot(xi, xi) * np.eye(len(xi)) + (params.lam + params.mu) * np.outer(xi, xi)
    return SymbolMatrices(xi=xi, L=L)


def apply_lame_symbol(coefficients: np.ndarray, grid: Grid, params: LameParams, z: complex = 0.0) -> np.ndarray:
    """(L(ξ) - z)û on Fourier coefficients of shape (..., *grid.shape, d)."""
    xi = grid.wavevectors
    xi2 = grid.wavenumber_squared[..., None]
    div = np.einsum("...k,...k->...", xi, coefficients)[..., None]
    return (params.mu * xi2 - z) * coefficients + (params.lam + params.mu) * xi * div


def reference_basis_d3(xi: np.ndarray) -> np.ndarray:
    """Closed-form eigenbasis of L(ξ) in d = 3; its determinant is ξ₁|ξ|²."""
    x1, x2, x3 = xi
    return np.array([[-x2, -x3, x1], [x1, 0.0, x2], [0.0, x1, x3]])


def diagonalize_symbol(xi: Sequence[float], params: LameParams) -> SymbolMatrices:
    """Orthonormal eigenbasis of L(ξ): a basis of ξ^⊥ first, ξ/|ξ| last."""
    xi = np.asarray(xi, dtype=float)
    norm = float(np.linalg.norm(xi))
    if norm == 0:
        raise DegenerateInputError("the symbol is zero at xi = 0 and has no distinguished eigenbasis")
    symbol = lame_symbol(xi, params)
    d = len(xi)
    transversal = scipy.linalg.null_space(xi[None, :])
    P = np.column_stack([transversal, xi / norm])
    D = np.diag([params.mu * norm ** 2] * (d - 1) + [params.p_modulus * norm ** 2])

    reference, singular = None, False
    if d == 3:
        if abs(xi[0]) > 1e-12 * norm:
            reference = reference_basis_d3(xi)
        else:
            singular = True
            logger.warning(f"closed-form basis is singular at xi={xi.tolist()} (xi_1 = 0); using the orthonormal basis only")
    return SymbolMatrices(xi=xi, L=symbol.L, P=P, D=D, P_reference=reference, reference_singular=singular)


def matrix_polar_factors(V: MatrixPotentialField, rank_tol: Optional[float] = None) -> PolarFactors:
    """|V|^{1/2}, V_{1/2} and sgn(V) at every point from V = U Σ W^H.

    |V|^{1/2} = W Σ^{1/2} W^H, sgn(V) = U_r W_r^H on the range (zero on the kernel),
    and V_{1/2} = sgn(V)|V|^{1/2} = U Σ^{1/2} W^H, so that V_{1/2}·|V|^{1/2} = V.
    """
    rank_tol = default_settings.tolerance.POLAR_RANK_TOL if rank_tol is None else rank_tol
    U, s, Wh = np.linalg.svd(V.samples)
    W = np.conj(np.swapaxes(Wh, -1, -2))
    root = np.sqrt(s)
    absV_sqrt = np.einsum("...jk,...k,...kl->...jl", W, root, Wh)
    V_half = np.einsum("...jk,...k,...kl->...jl", U, root, Wh)
    on_range = (s > rank_tol * s[..., :1]) & (s > 0)
    sign = np.einsum("...jk,...k,...kl->...jl", U, on_range.astype(float), Wh)
    return PolarFactors(grid=V.grid, absV_sqrt=absV_sqrt, V_half=V_half, sign=sign)


class LameOperatorService:
    """Free Lamé resolvent and the Birman–Schwinger operator on the torus."""

    def __init__(self, settings=None):
        self.settings = settings or default_settings

    def symbol_values(self, grid: Grid, params: LameParams):
        """(μ|ξ|², (λ+2μ)|ξ|²) over the frequency lattice."""
        xi2 = grid.wavenumber_squared
        return params.mu * xi2, params.p_modulus * xi2

    def lame_apply(self, u: VectorField, params: LameParams, z: complex = 0.0) -> VectorField:
        """(-Δ* - z)u = -μΔu - (λ+μ)∇div u - z u, spectrally."""
        grid = u.grid
        coefficients = spectral.forward(u.samples, grid)
        return u.with_samples(spectral.inverse(apply_lame_symbol(coefficients, grid, params, z), grid))

    def _resolvent_multipliers(self, grid: Grid, z: complex, params: LameParams):
        s_values, p_values = self.symbol_values(grid, params)
        tol = self.settings.tolerance.RESOLVENT_SINGULAR_TOL * max(1.0, abs(z))
        for values, branch in ((s_values, "transversal"), (p_values, "longitudinal")):
            gap = np.abs(values - z)
            flat = int(np.argmin(gap))
            if gap.flat[flat] <= tol:
                index = np.unravel_index(flat, grid.shape)
                xi = grid.wavevectors[index].tolist()
                logger.error(f"z={z} hits the {branch} symbol value {values.flat[flat]:.6e}")
                raise NearSingularError(f"z={z} is within {tol:g} of a {branch} symbol value", xi=xi)
        return 1 / (s_values - z), 1 / (p_values - z)

    def resolvent_coefficients(self, coefficients: np.ndarray, grid: Grid, z: complex, params: LameParams) -> np.ndarray:
        s_mult, p_mult = self._resolvent_multipliers(grid, z, params)
        longitudinal = longitudinal_coefficients(coefficients, grid)
        transversal = coefficients - longitudinal
        return s_mult[..., None] * transversal + p_mult[..., None] * longitudinal

    def free_resolvent_apply(self, g: VectorField, z: complex, params: LameParams) -> VectorField:
        grid = g.grid
        coefficients = spectral.forward(g.samples, grid)
        return g.with_samples(spectral.inverse(self.resolvent_coefficients(coefficients, grid, complex(z), params), grid))

    def _resolvent_array(self, samples: np.ndarray, grid: Grid, z: complex, params: LameParams) -> np.ndarray:
        coefficients = spectral.forward(samples, grid)
        return spectral.inverse(self.resolvent_coefficients(coefficients, grid, z, params), grid)

    def birman_schwinger_apply(
            self,
            phi: VectorField,
            z: complex,
            V: MatrixPotentialField,
            params: LameParams,
            factors: Optional[PolarFactors] = None,
    ) -> VectorField:
        """K_z φ = |V|^{1/2}(-Δ* - z)^{-1} V_{1/2} φ."""
        factors = factors or matrix_polar_factors(V)
        inner = self._resolvent_array(factors.apply_half(phi.samples), phi.grid, complex(z), params)
        return phi.with_samples(factors.apply_abs_sqrt(inner))

    def _shifted(self, z: complex, epsilon: Optional[float]) -> complex:
        z = complex(z)
        if epsilon is not None:
            if epsilon <= 0:
                raise ParameterError(f"epsilon must be positive, got {epsilon}")
            return z + 1j * epsilon
        if is_embedded(z):
            raise ParameterError(f"z={z} lies on [0, inf); pass an epsilon shift")
        return z

    def bs_norm_estimate(
            self,
            z: complex,
            V: MatrixPotentialField,
            params: LameParams,
            tol: Optional[float] = None,
            epsilon: Optional[float] = None,
            bounds: Optional[Dict[str, float]] = None,
            bound_provenance: Optional[Dict[str, str]] = None,
            seed: Optional[int] = None,
    ) -> BSNormReport:
        """‖K_z‖ by power iteration on K_z^H K_z, compared against the supplied theoretical bounds."""
        tol = tol or self.settings.tolerance.POWER_ITERATION_TOL
        if tol <= 0:
            raise ParameterError("tol must be positive")
        seed = self.settings.runtime.DEFAULT_SEED if seed is None else seed
        shifted = self._shifted(z, epsilon)
        grid = V.grid
        factors = matrix_polar_factors(V)
        self._resolvent_multipliers(grid, shifted, params)

        def apply(x: np.ndarray) -> np.ndarray:
            return factors.apply_abs_sqrt(self._resolvent_array(factors.apply_half(x), grid, shifted, params))

        def apply_adjoint(y: np.ndarray) -> np.ndarray:
            inner = self._resolvent_array(factors.apply_abs_sqrt(y), grid, shifted.conjugate(), params)
            return factors.apply_half_adjoint(inner)

        result = power_iter(
            apply, apply_adjoint, random_start(grid.shape + (grid.d,), seed),
            max_iter=self.settings.tolerance.POWER_ITERATION_MAX_ITER, tol=tol,
            label=f"Birman-Schwinger K_z at z={shifted:.4g}",
        )
        bounds = dict(bounds or {})
        return BSNormReport(
            z=complex(z), epsilon=epsilon, estimate=result.sigma, iterations=result.iterations,
            bounds=bounds, bound_provenance=dict(bound_provenance or {}),
            within_bounds={name: result.sigma <= value * (1 + tol) for name, value in bounds.items()},
        )

    def epsilon_extrapolation(
            self,
            zeta: complex,
            V: MatrixPotentialField,
            params: LameParams,
            epsilons: Optional[Sequence[float]] = None,
            tol: Optional[float] = None,
            seed: Optional[int] = None,
    ) -> EpsilonExtrapolationReport:
        """Track K_{ζ+iε} as ε decreases along ``epsilons``.

        For ζ off [0, ∞) the differences are taken against K_ζφ itself; for
        embedded ζ, between consecutive shifts.
        """
        epsilons = list(epsilons or self.settings.runtime.EPSILON_SCHEDULE)
        if any(e <= 0 for e in epsilons) or any(b >= a for a, b in zip(epsilons, epsilons[1:])):
            raise ParameterError("epsilons must be positive and strictly decreasing")
        zeta = complex(zeta)
        seed = self.settings.runtime.DEFAULT_SEED if seed is None else seed
        grid = V.grid
        factors = matrix_polar_factors(V)
        phi = VectorField(grid=grid, samples=random_start(grid.shape + (grid.d,), seed + 1))

        estimates, images = [], []
        for eps in epsilons:
            estimates.append(self.bs_norm_estimate(zeta, V, params, tol=tol, epsilon=eps, seed=seed).estimate)
            images.append(self.birman_schwinger_apply(phi, zeta + 1j * eps, V, params, factors).samples)

        if is_embedded(zeta):
            differences = [float(np.linalg.norm(a - b)) for a, b in zip(images, images[1:])]
        else:
            limit = self.birman_schwinger_apply(phi, zeta, V, params, factors).samples
            differences = [float(np.linalg.norm(image - limit)) for image in images]
        scale = math.sqrt(grid.cell_volume)
        differences = [diff * scale for diff in differences]
        monotone = all(b <= a for a, b in zip(differences, differences[1:]))
        # first-order extrapolation in ε for a halving schedule
        limit_estimate = 2 * estimates[-1] - estimates[-2] if len(estimates) > 1 else estimates[-1]
        if not monotone:
            logger.warning(f"epsilon sequence at zeta={zeta} is not monotone: {differences}")
        return EpsilonExtrapolationReport(
            zeta=zeta, epsilons=epsilons, estimates=estimates, differences=differences,
            monotone=monotone, limit_estimate=max(limit_estimate, 0.0),
        )

    def birman_schwinger_eigencheck(
            self, z: complex, u: VectorField, V: MatrixPotentialField, params: LameParams,
            factors: Optional[PolarFactors] = None,
    ) -> Optional[float]:
        """‖K_zφ + φ‖/‖φ‖ with φ = |V|^{1/2}u; zero for an exact eigenpair (z, u) of -Δ* + V."""
        factors = factors or matrix_polar_factors(V)
        phi = u.with_samples(factors.apply_abs_sqrt(u.samples))
        phi_norm = np.linalg.norm(phi.samples)
        if phi_norm == 0:
            return None
        image = self.birman_schwinger_apply(phi, z, V, params, factors)
        return float(np.linalg.norm(image.samples + phi.samples) / phi_norm)
