"""Acceptance suites: seeded, deterministic property and oracle checks.

Every suite returns a SuiteResult whose payload holds no timings, so two runs
with the same seed serialize to identical reports.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.spatial.distance import cdist
from tqdm import tqdm

from src.config.settings import settings as default_settings
from src.models.enclosure import EnclosureSpec
from src.models.fields import MatrixPotentialField, ScalarField, VectorField
from src.models.grid import Grid, LameParams
from src.models.potential import PotentialSpec
from src.schemas import SuiteResult
from src.services.enclosure import EnclosureService, hls_factor_d3
from src.services.helmholtz import HelmholtzService
from src.services.lame import LameOperatorService, diagonalize_symbol, green_kernel_3d
from src.services.norms import WeightedNormService, _blocks, _levels
from src.services.potentials import PotentialService
from src.services.spectra import ESSENTIAL, SpectraService
from src.utils import spectral

logger = logging.getLogger(__name__)

SUITES = (
    "free-spectrum", "helmholtz", "symbol", "resolvent", "planewave",
    "birman-schwinger", "containment", "norms", "j-symmetry", "weyl",
)

LAME_PAIRS = ((1.0, 1.0), (-1.0, 1.0), (0.5, 2.0), (3.0, 0.5), (-0.5, 1.5))


def free_symbol_values(grid: Grid, params: LameParams) -> np.ndarray:
    """μ|ξ|² with multiplicity d-1 and (λ+2μ)|ξ|² once per ξ; d zeros at ξ = 0."""
    xi2 = grid.wavenumber_squared.ravel()
    values = np.concatenate([np.repeat(params.mu * xi2, grid.d - 1), params.p_modulus * xi2])
    return np.sort(values)


def kerman_sawyer_oracle(values: np.ndarray, grid: Grid, alpha: float, max_level: int) -> float:
    """Dense double sum over each dyadic cube with the diagonal dropped."""
    d, best = grid.d, 0.0
    for level in _levels(grid, max_level):
        m = grid.n // 2 ** level
        local = np.array(list(itertools.product(range(m), repeat=d)), dtype=float) * grid.h
        distances = cdist(local, local)
        np.fill_diagonal(distances, np.inf)
        kernel = distances ** (alpha - d)
        for block in _blocks(values, d, level):
            w = block.ravel()
            mass = w.sum() * grid.cell_volume
            if mass > 0:
                best = max(best, float(w @ kernel @ w) * grid.cell_volume ** 2 / mass)
    return best


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


class VerificationService:
    def __init__(
            self,
            norm_service: Optional[WeightedNormService] = None,
            helmholtz_service: Optional[HelmholtzService] = None,
            lame_service: Optional[LameOperatorService] = None,
            enclosure_service: Optional[EnclosureService] = None,
            spectra_service: Optional[SpectraService] = None,
            potential_service: Optional[PotentialService] = None,
            settings=None,
    ):
        self.settings = settings or default_settings
        self.norm_service = norm_service or WeightedNormService(settings=self.settings)
        self.helmholtz_service = helmholtz_service or HelmholtzService(self.norm_service, settings=self.settings)
        self.lame_service = lame_service or LameOperatorService(settings=self.settings)
        self.enclosure_service = enclosure_service or EnclosureService(settings=self.settings)
        self.spectra_service = spectra_service or SpectraService(
            self.lame_service, self.helmholtz_service, self.enclosure_service, settings=self.settings,
        )
        self.potential_service = potential_service or PotentialService()

    def suites(self) -> Dict[str, Callable[..., SuiteResult]]:
        return {
            "free-spectrum": self.free_spectrum_suite,
            "helmholtz": self.helmholtz_suite,
            "symbol": self.symbol_suite,
            "resolvent": self.resolvent_suite,
            "planewave": self.planewave_suite,
            "birman-schwinger": self.birman_schwinger_suite,
            "containment": self.containment_suite,
            "norms": self.norms_suite,
            "j-symmetry": self.j_symmetry_suite,
            "weyl": self.weyl_suite,
        }

    def run(
            self,
            suite: str,
            grid: Grid,
            params: LameParams,
            seed: int = 0,
            threads: int = 1,
    ) -> List[SuiteResult]:
        """Run one suite or all of them; results come back in suite order."""
        names = list(SUITES) if suite == "all" else [suite]
        table = self.suites()
        unknown = [name for name in names if name not in table]
        if unknown:
            raise ValueError(f"unknown suite(s) {unknown}")

        def job(name: str) -> SuiteResult:
            logger.info(f"Running suite {name}")
            result = table[name](grid=grid, params=params, seed=seed)
            logger.info(f"Suite {name}: {'passed' if result.passed else 'FAILED'}")
            return result

        if threads > 1 and len(names) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(tqdm(pool.map(job, names), total=len(names), desc="suites"))
        else:
            results = [job(name) for name in tqdm(names, desc="suites", disable=len(names) == 1)]
        return results

    @staticmethod
    def _result(name: str, checks: Dict[str, bool], details: Dict) -> SuiteResult:
        return SuiteResult(name=name, passed=all(checks.values()), checks=checks, details=details)

    # Suites

    def free_spectrum_suite(self, grid: Grid, params: LameParams, seed: int = 0) -> SuiteResult:
        V = MatrixPotentialField.zeros(grid)
        H = self.spectra_service.assemble_hamiltonian(V, params, grid)
        report = self.spectra_service.eigenvalues(H)
        expected = free_symbol_values(grid, params)
        computed = np.sort(report.eigenvalues.real)
        scale = max(float(expected.max()), 1.0)
        error = float(np.max(np.abs(computed - expected)))
        imag = float(np.max(np.abs(report.eigenvalues.imag)))

        all_essential = True
        if grid.d >= 2:
            spec = EnclosureSpec(bound_kind="lebesgue", gamma=0.5, d=grid.d, params=params, constant_mode="configured")
            contained = self.spectra_service.containment_check(report, self.enclosure_service.enclosure_disk(spec, 0.0))
            all_essential = contained.violations == 0 and all(v == ESSENTIAL for v in contained.verdicts)
        checks = {
            "symbol_values": error <= 1e-9 * scale,
            "real_spectrum": imag <= 1e-9 * scale,
            "residuals": float(np.max(report.residuals.real)) <= 1e-9 * scale,
            "all_essential": all_essential,
        }
        return self._result("free-spectrum", checks, {
            "dimension": H.dimension, "max_symbol_error": error, "max_imaginary_part": imag,
        })

    def helmholtz_suite(self, grid: Grid, params: LameParams, seed: int = 0, count: int = 50) -> SuiteResult:
        rng = np.random.default_rng(seed)
        configs = list(itertools.product((2, 3), (8, 16)))
        pythagoras, idempotence, identity, commutation, orthogonality = 0.0, 0.0, 0.0, 0.0, True
        for k in range(count):
            d, n = configs[k % len(configs)]
            g = Grid(d=d, n=n, L=grid.L)
            shape = g.shape + (d,)
            u = VectorField(grid=g, samples=rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            pair = self.helmholtz_service.helmholtz_split(u)
            total = u.l2_norm() ** 2
            pythagoras = max(pythagoras, _relative(pair.u_S.l2_norm() ** 2 + pair.u_P.l2_norm() ** 2, total))

            coefficients = spectral.forward(u.samples, g)
            s_hat, p_hat = self.helmholtz_service.split_coefficients(coefficients, g)
            ss, sp = self.helmholtz_service.split_coefficients(s_hat, g)
            ps, pp = self.helmholtz_service.split_coefficients(p_hat, g)
            scale = np.max(np.abs(coefficients))
            idempotence = max(idempotence, float(max(np.max(np.abs(ss - s_hat)), np.max(np.abs(pp - p_hat)),
                                                     np.max(np.abs(sp)), np.max(np.abs(ps))) / scale))
            identity = max(identity, float(np.max(np.abs(s_hat + p_hat - coefficients)) / scale))

            lap = self.helmholtz_service.laplacian(u)
            left = self.helmholtz_service.laplacian(pair.u_S)
            right = self.helmholtz_service.helmholtz_split(lap).u_S
            commutation = max(commutation, (left - right).l2_norm() / lap.l2_norm())
            if k < len(configs):
                for p in (1.5, 2.0, 4.0):
                    orthogonality &= self.helmholtz_service.orthogonality_report(u, p).holds
        checks = {
            "pythagoras": pythagoras <= 1e-12,
            "idempotence": idempotence <= 1e-14,
            "partition_of_identity": identity <= 1e-14,
            "laplacian_commutes": commutation <= 1e-12,
            "almost_orthogonality": bool(orthogonality),
        }
        return self._result("helmholtz", checks, {
            "fields": count, "pythagoras": pythagoras, "idempotence": idempotence,
            "identity": identity, "commutation": commutation,
        })

    def symbol_suite(self, grid: Grid, params: LameParams, seed: int = 0, count: int = 100) -> SuiteResult:
        rng = np.random.default_rng(seed)
        orthonormal, reference, spectrum = 0.0, 0.0, 0.0
        for lam, mu in LAME_PAIRS:
            pair = LameParams(lam=lam, mu=mu)
            for _ in range(count):
                xi = rng.uniform(0.5, 2.0, 3) * rng.choice([-1.0, 1.0], 3)
                symbol = diagonalize_symbol(xi, pair)
                expected = np.sort(np.real(np.diag(symbol.D)))
                scale = max(1.0, float(np.max(np.abs(expected))))
                orthonormal = max(orthonormal, symbol.conjugation_defect() / scale)
                if symbol.P_reference is not None:
                    reference = max(reference, symbol.conjugation_defect(symbol.P_reference) / scale)
                spectrum = max(spectrum, float(np.max(np.abs(np.linalg.eigvalsh(symbol.L.real) - expected))) / scale)
        checks = {
            "orthonormal_basis": orthonormal <= 1e-12,
            "closed_form_basis": reference <= 1e-10,
            "eigenvalues": spectrum <= 1e-12,
        }
        return self._result("symbol", checks, {
            "orthonormal_defect": orthonormal, "closed_form_defect": reference, "eigenvalue_error": spectrum,
        })

    def resolvent_suite(self, grid: Grid, params: LameParams, seed: int = 0) -> SuiteResult:
        rng = np.random.default_rng(seed)
        g_grid = Grid(d=3, n=8, L=2 * math.pi)
        coefficients = np.zeros(g_grid.shape + (3,), dtype=complex)
        band = np.all(np.abs(g_grid.wavevectors) <= 2.0, axis=-1)
        noise = rng.standard_normal(coefficients.shape) + 1j * rng.standard_normal(coefficients.shape)
        coefficients[band] = noise[band]
        g = VectorField(grid=g_grid, samples=spectral.inverse(coefficients, g_grid))

        zs = [complex(-1 - k, 0.5 * k) for k in range(8)]
        zs += [complex(0.3 + 1.7 * k, 1e-3 * (-1) ** k) for k in range(6)]
        zs += [complex(2.0 * math.cos(t), 2.0 * math.sin(t)) for t in np.linspace(0.3, 2 * math.pi - 0.3, 6)]
        worst = 0.0
        for z in zs:
            u = self.lame_service.free_resolvent_apply(g, z, params)
            back = self.lame_service.lame_apply(u, params, z)
            worst = max(worst, (back - g).l2_norm() / g.l2_norm())

        domination = True
        for zeta, r in itertools.product(
                [complex(a, b) for a, b in zip(np.linspace(-5, 5, 10), np.linspace(0.01, 5, 10))],
                np.linspace(0.05, 5, 10),
        ):
            domination &= abs(green_kernel_3d(r, zeta)) <= green_kernel_3d(r, 0).real * (1 + 1e-14)
        checks = {"inverse": worst <= 1e-10, "green_domination": bool(domination)}
        return self._result("resolvent", checks, {"z_count": len(zs), "max_inverse_error": worst})

    def planewave_suite(self, grid: Grid, params: LameParams, seed: int = 0) -> SuiteResult:
        wave_grid = Grid(d=3, n=8, L=grid.L)
        residual, modulus, divergence = 0.0, 0.0, 0.0
        for mode in ("S", "P"):
            for z in self.spectra_service.admissible_levels(mode, params, wave_grid, count=3):
                result = self.spectra_service.plane_wave(z, mode, 2, params, wave_grid)
                residual = max(residual, result.residual)
                modulus = max(modulus, result.max_modulus_error)
                if mode == "S":
                    divergence = max(divergence, result.divergence_norm)
        checks = {"residual": residual <= 1e-12, "unit_modulus": modulus <= 1e-13, "divergence_free": divergence <= 1e-12}
        return self._result("planewave", checks, {
            "max_residual": residual, "max_modulus_error": modulus, "max_divergence": divergence,
        })

    def birman_schwinger_suite(self, grid: Grid, params: LameParams, seed: int = 0) -> SuiteResult:
        bs_grid = Grid(d=3, n=8, L=grid.L)
        spec = EnclosureSpec(bound_kind="lebesgue", gamma=0.0, d=3, params=params)
        shifts = [(complex(-1, 0), None), (complex(-1, 1), None), (complex(0.5, 0), 0.1)]
        within, rows = True, []
        for amplitude in (0.01, 0.05, 0.1, 0.5, 1.0):
            V = self.potential_service.sample_potential(PotentialSpec(amplitude=amplitude), bs_grid)
            norms = {"lp": self.norm_service.lp_norm(V, 1.5)}
            for z, eps in shifts:
                bounds, provenance = self.enclosure_service.bs_bounds(z, spec, norms, kinds=("lebesgue",))
                report = self.lame_service.bs_norm_estimate(
                    z, V, params, epsilon=eps, bounds=bounds, bound_provenance=provenance, seed=seed,
                )
                within &= all(report.within_bounds.values())
                rows.append({"amplitude": amplitude, "z": [z.real, z.imag], "estimate": report.estimate,
                             "bound": bounds["lebesgue"]})

        V = self.potential_service.sample_potential(PotentialSpec(amplitude=0.1), bs_grid)
        extrapolation = self.lame_service.epsilon_extrapolation(complex(0.5, 0), V, params, seed=seed)
        checks = {"below_explicit_bound": bool(within), "epsilon_monotone": extrapolation.monotone}
        return self._result("birman-schwinger", checks, {
            "estimates": rows, "epsilon_differences": extrapolation.differences,
            "limit_estimate": extrapolation.limit_estimate,
        })

    def containment_potential(self, grid: Grid, params: LameParams, fraction: float = 0.5) -> MatrixPotentialField:
        """Complex Gaussian with ‖V‖_{L^{3/2}} at `fraction` of the d = 3 Lebesgue absence threshold."""
        spec = PotentialSpec(family="complex_rotation", phase=math.pi / 4, amplitude=1.0)
        unit = self.potential_service.sample_potential(spec, grid)
        threshold = 1 / hls_factor_d3(params)
        return unit.scaled(fraction * threshold / self.norm_service.lp_norm(unit, 1.5).value)

    def containment_suite(self, grid: Grid, params: LameParams, seed: int = 0) -> SuiteResult:
        checks, details = {}, {}
        for d, gamma in ((2, 0.5), (3, 0.0)):
            c_grid = Grid(d=d, n=8, L=grid.L)
            V = self.containment_potential(c_grid, params)
            norm = self.norm_service.lp_norm(V, gamma + d / 2).value
            spec = EnclosureSpec(bound_kind="lebesgue", gamma=gamma, d=d, params=params,
                                 constant_mode="explicit_d3" if d == 3 else "configured")
            disk = self.enclosure_service.enclosure_disk(spec, norm)
            H = self.spectra_service.assemble_hamiltonian(V, params, c_grid)
            report = self.spectra_service.spectrum_report(H, disk)
            outside_tube = sum(v != ESSENTIAL for v in report.verdicts)
            checks[f"d{d}_tube"] = outside_tube == 0
            checks[f"d{d}_violations"] = report.violations == 0
            details[f"d{d}"] = {
                "dimension": H.dimension, "norm": norm, "outside_tube": outside_tube,
                "violations": report.violations, "essential_margin": report.essential_margin,
            }
        return self._result("containment", checks, details)

    def norms_suite(self, grid: Grid, params: LameParams, seed: int = 0) -> SuiteResult:
        rng = np.random.default_rng(seed)
        ks_grid = Grid(d=2, n=16, L=grid.L)
        alpha = 1.0
        W = ScalarField(grid=ks_grid, samples=rng.uniform(0.0, 1.0, ks_grid.shape))
        ks = self.norm_service.kerman_sawyer_norm(W, alpha)
        oracle = kerman_sawyer_oracle(W.samples.real, ks_grid, alpha, ks.params["max_level"])
        bound = ks.diagnostics["diagonal_correction_bound"]
        ks_ok = oracle * (1 - 1e-12) <= ks.value <= (oracle + bound) * (1 + 1e-12)

        a, b = 1.0, 9.0
        ap_grid = Grid(d=2, n=8, L=grid.L)
        weight = np.where(np.arange(ap_grid.n)[:, None] < ap_grid.n // 2, a, b) * np.ones(ap_grid.shape)
        q2 = self.norm_service.a_p_constant(ScalarField(grid=ap_grid, samples=weight), 2.0).value
        q2_expected = (a + b) / 2 * (1 / a + 1 / b) / 2

        mc_grid = Grid(d=2, n=32, L=grid.L)
        V = self.potential_service.sample_potential(PotentialSpec(amplitude=1.0, width=0.8), mc_grid)
        radii = (4 * mc_grid.h, 8 * mc_grid.h)
        mc = self.norm_service.morrey_campanato_norm(V, 1.0, 1.0, radii=radii).value
        lebesgue = self.norm_service.lp_norm(V, 2.0).value
        chain = self.norm_service.holder_chain_factor(2, 1.0, 1.0) * lebesgue
        checks = {
            "kerman_sawyer_oracle": bool(ks_ok),
            "a2_two_valued": abs(q2 - q2_expected) <= 1e-10,
            "holder_chain": mc <= chain * 1.02,
        }
        return self._result("norms", checks, {
            "kerman_sawyer": ks.value, "oracle": oracle, "diagonal_correction_bound": bound,
            "a2": q2, "a2_expected": q2_expected, "morrey_campanato": mc, "holder_chain_bound": chain,
        })

    def j_symmetry_suite(self, grid: Grid, params: LameParams, seed: int = 0, count: int = 20) -> SuiteResult:
        j_grid = Grid(d=3, n=4, L=grid.L)
        worst_adjoint, worst_j, passed = 0.0, 0.0, True
        for k in range(count):
            spec = PotentialSpec(family="matrix_dense_random", pointwise_random=True, seed=seed + k)
            V = self.potential_service.sample_potential(spec, j_grid)
            report = self.spectra_service.adjoint_symmetry_check(V, params, j_grid)
            worst_adjoint = max(worst_adjoint, report.adjoint_defect)
            worst_j = max(worst_j, report.j_symmetry_defect)
            passed &= report.passed
        return self._result("j-symmetry", {"adjoint_and_j_symmetry": bool(passed)}, {
            "potentials": count, "max_adjoint_defect": worst_adjoint, "max_j_defect": worst_j,
        })

    def weyl_suite(self, grid: Grid, params: LameParams, seed: int = 0) -> SuiteResult:
        w_grid = Grid(d=2, n=128, L=grid.L)
        z = self.spectra_service.admissible_levels("S", params, w_grid, count=1)[0]
        report = self.spectra_service.weyl_residual(z, 8, params, w_grid)
        checks = {
            "monotone": report.monotone,
            "first_ratio": report.ratios[0] <= 0.75,
            "total_decay": report.total_decay >= 8,
            "normalized": all(abs(n - 1) <= 1e-10 for n in report.norms),
        }
        return self._result("weyl", checks, report.model_dump())
