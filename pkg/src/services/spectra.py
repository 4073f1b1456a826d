import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.config.settings import settings as default_settings
from src.errors import (
    DomainError,
    FieldShapeError,
    GeometryError,
    InputError,
    NearSingularError,
    ParameterError,
    QuantizationError,
    SizeError,
    SolverError,
    UnsupportedDimensionError,
)
from src.models.enclosure import EnclosureDisk, EnclosureSpec
from src.models.fields import MatrixPotentialField, VectorField
from src.models.grid import Grid, LameParams
from src.repositories.cache import SpectrumCache
from src.schemas import AdjointSymmetryReport, PlaneWaveResult, SpectrumReport, WeylReport
from src.services.enclosure import EnclosureService
from src.services.helmholtz import HelmholtzService
from src.services.lame import LameOperatorService, apply_lame_symbol, is_embedded, matrix_polar_factors
from src.utils import spectral

logger = logging.getLogger(__name__)

ESSENTIAL = "essential-like"
CONTAINED = "contained"
OUTSIDE_DISK = "outside-disk"
ABSENCE_VIOLATION = "absence-violation"
UNCONSTRAINED = "unconstrained"


class DiscreteHamiltonian:
    """-Δ* + V on a torus grid: spectral symbol plus pointwise matrix multiplication.

    Vectors are flattened C-order from ``grid.shape + (d,)``, so entry
    ``point * d + component``.
    """

    def __init__(self, grid: Grid, params: LameParams, V: MatrixPotentialField, dense: Optional[np.ndarray] = None):
        if V.grid != grid:
            raise FieldShapeError("potential grid does not match the Hamiltonian grid")
        self.grid = grid
        self.params = params
        self.V = V
        self.dense = dense

    @property
    def dimension(self) -> int:
        return self.grid.d * self.grid.size

    def apply(self, u: VectorField) -> VectorField:
        coefficients = spectral.forward(u.samples, self.grid)
        free = spectral.inverse(apply_lame_symbol(coefficients, self.grid, self.params), self.grid)
        return u.with_samples(free + np.einsum("...jk,...k->...j", self.V.samples, u.samples))

    def apply_batch(self, X: np.ndarray) -> np.ndarray:
        """H applied to the columns of a (dimension, k) array."""
        grid, k = self.grid, X.shape[1]
        U = X.T.reshape((k,) + grid.shape + (grid.d,))
        coefficients = spectral.forward(U, grid, batch=1)
        free = spectral.inverse(apply_lame_symbol(coefficients, grid, self.params), grid, batch=1)
        out = free + np.einsum("...jk,b...k->b...j", self.V.samples, U)
        return out.reshape(k, -1).T

    def to_dense(self, chunk: int = 512) -> np.ndarray:
        """Dense matrix assembled column block by column block from unit vectors."""
        if self.dense is not None:
            return self.dense
        dim = self.dimension
        H = np.empty((dim, dim), dtype=np.complex128)
        for start in range(0, dim, chunk):
            stop = min(start + chunk, dim)
            E = np.zeros((dim, stop - start), dtype=np.complex128)
            E[np.arange(start, stop), np.arange(stop - start)] = 1.0
            H[:, start:stop] = self.apply_batch(E)
        self.dense = H
        return H


def is_hermitian(matrix: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(float(np.max(np.abs(matrix))), 1.0)
    return bool(np.max(np.abs(matrix - matrix.conj().T)) <= tol * scale)


def j_conjugate(matrix: np.ndarray, d: int) -> np.ndarray:
    """J M J for J = pointwise complex conjugation composed with the component transpose action."""
    points = matrix.shape[0] // d
    blocks = np.conj(matrix).reshape(points, d, points, d)
    return np.swapaxes(blocks, 1, 3).reshape(matrix.shape)


def symmetry_defects(H: np.ndarray, H_adjoint_potential: np.ndarray, d: int) -> Tuple[float, float]:
    """Relative max defects of H* and J H J against the dense H(V̄ᵗ)."""
    scale = max(float(np.max(np.abs(H))), 1.0)
    adjoint_defect = float(np.max(np.abs(H.conj().T - H_adjoint_potential))) / scale
    j_defect = float(np.max(np.abs(j_conjugate(H, d) - H_adjoint_potential))) / scale
    return adjoint_defect, j_defect


class SpectraService:
    def __init__(
            self,
            lame_service: Optional[LameOperatorService] = None,
            helmholtz_service: Optional[HelmholtzService] = None,
            enclosure_service: Optional[EnclosureService] = None,
            cache: Optional[SpectrumCache] = None,
            settings=None,
    ):
        self.settings = settings or default_settings
        self.lame_service = lame_service or LameOperatorService(settings=self.settings)
        self.helmholtz_service = helmholtz_service or HelmholtzService(settings=self.settings)
        self.enclosure_service = enclosure_service or EnclosureService(settings=self.settings)
        cache_dir = self.settings.runtime.LAME_SPECTRA_CACHE
        self.cache = cache if cache is not None else (SpectrumCache(Path(cache_dir)) if cache_dir else None)

    # Dense spectra

    def assemble_hamiltonian(
            self, V: MatrixPotentialField, params: LameParams, grid: Grid, dense: bool = True,
    ) -> DiscreteHamiltonian:
        H = DiscreteHamiltonian(grid, params, V)
        if dense:
            cap = self.settings.spectra.DENSE_CAP
            if H.dimension > cap:
                raise SizeError(
                    f"dense matrix of dimension {H.dimension} exceeds the cap {cap}; "
                    "use matrix-free diagnostics (bsnorm, residuals) at this size"
                )
            H.to_dense(self.settings.spectra.DENSE_CHUNK)
            logger.info(f"Assembled dense Hamiltonian of dimension {H.dimension}")
        return H

    def solve_dense(
            self, matrix: np.ndarray, residual_tol: Optional[float] = None,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
        """(eigenvalues, eigenvectors, residuals, hermitian), sorted by (Re, Im).

        Residuals are ‖Mu - zu‖/‖u‖ and must stay below residual_tol·‖M‖_F (default RESIDUAL_TOL).
        """
        residual_tol = self.settings.tolerance.RESIDUAL_TOL if residual_tol is None else residual_tol
        hermitian = is_hermitian(matrix)
        cached = self.cache.get(matrix) if self.cache is not None else None
        if cached is not None:
            w, U = cached
        else:
            try:
                if hermitian:
                    w, U = scipy.linalg.eigh(matrix)
                else:
                    w, U = scipy.linalg.eig(matrix)
            except (np.linalg.LinAlgError, ValueError) as e:
                logger.error(f"Dense eigensolver failed on a matrix of dimension {matrix.shape[0]}: {e}")
                raise SolverError("dense eigensolver did not converge", log=[str(e)]) from e
            if self.cache is not None:
                self.cache.put(matrix, w, U)

        w = np.asarray(w, dtype=np.complex128)
        order = np.lexsort((w.imag, w.real))
        w, U = w[order], U[:, order]
        residuals = np.linalg.norm(matrix @ U - U * w, axis=0) / np.linalg.norm(U, axis=0)
        scale = np.linalg.norm(matrix)
        worst = float(residuals.max()) if residuals.size else 0.0
        if worst > residual_tol * max(scale, 1.0):
            raise SolverError(
                f"eigenpair residual {worst:.3e} exceeds {residual_tol:g}*||H||",
                log=[f"max residual {worst:.6e}", f"||H||_F {scale:.6e}"],
            )
        return w, U, residuals, hermitian

    def _report_settings(self, H: DiscreteHamiltonian) -> Dict[str, float]:
        grid = H.grid
        return {
            "d": grid.d, "n": grid.n, "L": grid.L, "lambda": H.params.lam, "mu": H.params.mu,
            "sup_norm": H.V.sup_norm(), "dense_cap": self.settings.spectra.DENSE_CAP,
        }

    def eigenvalues(self, H: DiscreteHamiltonian) -> SpectrumReport:
        matrix = H.to_dense(self.settings.spectra.DENSE_CHUNK)
        w, _, residuals, hermitian = self.solve_dense(matrix)
        return SpectrumReport(
            eigenvalues=w, residuals=residuals, matrix_norm=float(np.linalg.norm(matrix)),
            hermitian=hermitian, settings=self._report_settings(H),
        )

    # Containment

    def default_essential_margin(self, sup_norm: float, n: int, eigenvalues: np.ndarray) -> float:
        spectra = self.settings.spectra
        floor = spectra.ESSENTIAL_MARGIN_FLOOR * float(np.max(np.abs(eigenvalues), initial=0.0))
        return max(spectra.ESSENTIAL_MARGIN_FACTOR * sup_norm / n, floor)

    def containment_check(
            self,
            report: SpectrumReport,
            disk: EnclosureDisk,
            essential_margin: Optional[float] = None,
            inflation: Optional[float] = None,
    ) -> SpectrumReport:
        """Classify every eigenvalue as essential-like, contained or violating."""
        meta = report.settings
        if meta.get("d") != disk.d or meta.get("lambda") != disk.params.lam or meta.get("mu") != disk.params.mu:
            raise InputError(
                f"spectrum (d={meta.get('d')}, lambda={meta.get('lambda')}, mu={meta.get('mu')}) and disk "
                f"(d={disk.d}, lambda={disk.params.lam}, mu={disk.params.mu}) disagree"
            )
        inflation = self.settings.spectra.CONTAINMENT_INFLATION if inflation is None else inflation
        w = report.eigenvalues
        if essential_margin is None:
            essential_margin = self.default_essential_margin(meta.get("sup_norm", 0.0), meta.get("n", 1), w)

        essential = (np.abs(w.imag) <= essential_margin) & (w.real >= -essential_margin)
        verdicts: List[str] = []
        for z, ess in zip(w, essential):
            if ess:
                verdicts.append(ESSENTIAL)
            elif disk.radius is not None:
                verdicts.append(CONTAINED if abs(z) <= disk.radius * (1 + inflation) else OUTSIDE_DISK)
            elif disk.absence_satisfied:
                verdicts.append(ABSENCE_VIOLATION)
            else:
                verdicts.append(UNCONSTRAINED)
        violations = sum(v in (OUTSIDE_DISK, ABSENCE_VIOLATION) for v in verdicts)
        if violations:
            logger.warning(f"{violations} eigenvalues violate the {disk.bound_kind} enclosure")
        return report.model_copy(update={
            "disk": disk, "verdicts": verdicts, "essential_margin": essential_margin,
            "inflation": inflation, "violations": violations,
        })

    def eigencheck(
            self, H: DiscreteHamiltonian, eigenvalues: np.ndarray, vectors: np.ndarray, verdicts: Sequence[str],
    ) -> List[Optional[float]]:
        """Birman–Schwinger residual ‖K_zφ + φ‖/‖φ‖ for non-essential eigenvalues off [0, ∞)."""
        factors = matrix_polar_factors(H.V)
        out: List[Optional[float]] = []
        for i, (z, verdict) in enumerate(zip(eigenvalues, verdicts)):
            if verdict == ESSENTIAL or is_embedded(complex(z)):
                out.append(None)
                continue
            u = VectorField(grid=H.grid, samples=vectors[:, i].reshape(H.grid.shape + (H.grid.d,)))
            try:
                out.append(self.lame_service.birman_schwinger_eigencheck(complex(z), u, H.V, H.params, factors))
            except NearSingularError:
                out.append(None)
        return out

    def spectrum_report(
            self,
            H: DiscreteHamiltonian,
            disk: Optional[EnclosureDisk] = None,
            essential_margin: Optional[float] = None,
            inflation: Optional[float] = None,
            residual_tol: Optional[float] = None,
    ) -> SpectrumReport:
        """Eigenvalues, containment verdicts and Birman–Schwinger cross-checks in one pass."""
        matrix = H.to_dense(self.settings.spectra.DENSE_CHUNK)
        w, U, residuals, hermitian = self.solve_dense(matrix, residual_tol)
        report = SpectrumReport(
            eigenvalues=w, residuals=residuals, matrix_norm=float(np.linalg.norm(matrix)),
            hermitian=hermitian, settings=self._report_settings(H),
        )
        if disk is None:
            return report
        report = self.containment_check(report, disk, essential_margin, inflation)
        return report.model_copy(update={"eigencheck": self.eigencheck(H, w, U, report.verdicts)})

    def containment_scan(
            self,
            V: MatrixPotentialField,
            params: LameParams,
            grid: Grid,
            spec: EnclosureSpec,
            norm_value: float,
            ts: Iterable[float] = (0.2, 0.4, 0.6, 0.8, 1.0),
    ) -> List[Dict[str, float]]:
        """Violation counts for tV; the norms in use are homogeneous of degree one in t."""
        rows = []
        for t in ts:
            if not 0 < t <= 1:
                raise ParameterError(f"scan factors must lie in (0, 1], got {t}")
            H = self.assemble_hamiltonian(V.scaled(t), params, grid)
            disk = self.enclosure_service.enclosure_disk(spec, t * norm_value)
            report = self.containment_check(self.eigenvalues(H), disk)
            rows.append({"t": t, "violations": report.violations, "eigenvalues": len(report.eigenvalues)})
        return rows

    # Free eigenfunctions and singular sequences

    def wave_speed(self, mode: str, params: LameParams) -> float:
        if mode == "S":
            return params.mu
        if mode == "P":
            return params.p_modulus
        raise ParameterError(f"mode must be 'S' or 'P', got {mode!r}")

    def admissible_levels(self, mode: str, params: LameParams, grid: Grid, count: int = 3) -> List[float]:
        """The lowest `count` values c(2πm/L)², m = 1, 2, ..., below the Nyquist mode."""
        c = self.wave_speed(mode, params)
        top = grid.n // 2 - 1
        return [c * (2 * math.pi * m / grid.L) ** 2 for m in range(1, min(count, top) + 1)]

    def _polarization(self, mode: str, axis: int, d: int, polarization: Optional[Sequence[float]]) -> np.ndarray:
        if not 0 <= axis < d:
            raise ParameterError(f"axis {axis} outside 0..{d - 1}")
        if mode == "P":
            return np.eye(d)[axis]
        if d < 2:
            raise UnsupportedDimensionError("transversal plane waves need d >= 2")
        if polarization is None:
            return np.eye(d)[(axis + 1) % d]
        e = np.asarray(polarization, dtype=float)
        if e.shape != (d,) or abs(np.linalg.norm(e) - 1) > 1e-12 or abs(e[axis]) > 1e-12:
            raise ParameterError("S polarization must be a unit vector orthogonal to the propagation axis")
        return e

    def plane_wave(
            self,
            z: float,
            mode: str,
            axis: int,
            params: LameParams,
            grid: Grid,
            polarization: Optional[Sequence[float]] = None,
    ) -> PlaneWaveResult:
        """e^{iκx_axis}e_pol with κ = √(z/c), c = μ (S) or λ+2μ (P)."""
        if z <= 0:
            raise DomainError(f"plane waves need z > 0, got {z}")
        c = self.wave_speed(mode, params)
        e_pol = self._polarization(mode, axis, grid.d, polarization)
        kappa = math.sqrt(z / c)
        m = kappa * grid.L / (2 * math.pi)
        m_int = round(m)
        if abs(m - m_int) > 1e-9 * max(1.0, m) or not 1 <= m_int < grid.n // 2:
            candidates = sorted({min(max(k, 1), grid.n // 2 - 1) for k in (math.floor(m), math.ceil(m))})
            nearest = [c * (2 * math.pi * k / grid.L) ** 2 for k in candidates]
            raise QuantizationError(
                f"kappa = sqrt(z/c) = {kappa:.6g} is not a lattice wavenumber 2*pi*m/L with 1 <= m < n/2",
                nearest=nearest,
            )
        kappa = 2 * math.pi * m_int / grid.L

        phase = np.exp(1j * kappa * grid.coordinates[..., axis])
        u = VectorField(grid=grid, samples=phase[..., None] * e_pol)
        image = self.lame_service.lame_apply(u, params, z)
        residual = image.l2_norm() / u.l2_norm()
        divergence = self.helmholtz_service.divergence(u).l2_norm()
        return PlaneWaveResult(
            field=u, z=z, kappa=kappa, mode=mode, axis=axis, polarization=tuple(float(x) for x in e_pol),
            residual=residual, divergence_norm=divergence,
            max_modulus_error=float(np.max(np.abs(np.linalg.norm(u.samples, axis=-1) - 1))),
        )

    def weyl_bump(self, grid: Grid, radius: float) -> np.ndarray:
        """exp(-1/(1 - |y|²)) with y = (x - center)/radius, zero outside the unit ball."""
        y2 = np.sum(spectral.torus_displacement(grid) ** 2, axis=-1) / radius ** 2
        bump = np.zeros_like(y2)
        inside = y2 < 1
        bump[inside] = np.exp(-1 / (1 - y2[inside]))
        return bump

    def weyl_residual(
            self,
            z: float,
            n_scale: int,
            params: LameParams,
            grid: Grid,
            mode: str = "S",
            axis: int = 0,
    ) -> WeylReport:
        """‖(-Δ* - z)φ_n‖ for φ_n = (scaled bump)·(plane wave), normalized, n = 1, 2, 4, ..., n_scale."""
        if n_scale < 1:
            raise ParameterError(f"n_scale must be at least 1, got {n_scale}")
        base_radius = self.settings.spectra.WEYL_BUMP_FRACTION * grid.L
        if n_scale * base_radius > grid.L / 2:
            raise GeometryError(
                f"bump radius {n_scale * base_radius:.4g} at n={n_scale} exceeds half the torus side {grid.L / 2:.4g}"
            )
        wave = self.plane_wave(z, mode, axis, params, grid).field
        scales, residuals, norms = [], [], []
        n = 1
        while n <= n_scale:
            bump = self.weyl_bump(grid, n * base_radius)
            phi = wave.with_samples(bump[..., None] * wave.samples)
            phi = phi.scaled(1 / phi.l2_norm())
            scales.append(n)
            norms.append(phi.l2_norm())
            residuals.append(self.lame_service.lame_apply(phi, params, z).l2_norm())
            n *= 2
        ratios = [b / a for a, b in zip(residuals, residuals[1:])]
        monotone = all(r < 1 for r in ratios)
        total = residuals[0] / residuals[-1] if residuals[-1] > 0 else math.inf
        logger.info(f"Weyl residuals at z={z:g}: {', '.join(f'{r:.3e}' for r in residuals)}")
        return WeylReport(
            z=z, scales=scales, residuals=residuals, norms=norms, ratios=ratios, monotone=monotone,
            total_decay=total,
        )

    # Adjoint structure

    def adjoint_symmetry_check(
            self, V: MatrixPotentialField, params: LameParams, grid: Grid, tol: float = 1e-11,
    ) -> AdjointSymmetryReport:
        """H(V)* = H(V̄ᵗ) and J H(V) J = H(V)*, both measured against an independently assembled H(V̄ᵗ)."""
        H = self.assemble_hamiltonian(V, params, grid).dense
        H_adjoint_potential = self.assemble_hamiltonian(V.conjugate_transpose(), params, grid).dense
        adjoint_defect, j_defect = symmetry_defects(H, H_adjoint_potential, grid.d)
        passed = adjoint_defect <= tol and j_defect <= tol
        if not passed:
            logger.warning(f"Adjoint symmetry defects {adjoint_defect:.3e}, {j_defect:.3e} exceed {tol:g}")
        return AdjointSymmetryReport(
            adjoint_defect=adjoint_defect, j_symmetry_defect=j_defect, tol=tol, passed=passed,
        )
