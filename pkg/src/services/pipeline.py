import logging
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.errors import (
    FieldFormatError,
    FieldIOError,
    FieldShapeError,
    GeometryError,
    ImproperlyConfigured,
    InputError,
    LameSpectraError,
    NumericalError,
    ParameterError,
    SizeError,
)
from src.models.enclosure import EnclosureDisk, EnclosureSpec
from src.models.fields import MatrixPotentialField, ScalarField
from src.models.grid import Grid, make_grid
from src.repositories.fields import FieldRepository
from src.repositories.reports import ReportRepository
from src.schemas import NormReport, RunConfig
from src.services.enclosure import EnclosureService
from src.services.lame import LameOperatorService, is_embedded
from src.services.norms import WeightedNormService, ks_combined_norm
from src.services.potentials import PotentialService
from src.services.spectra import SpectraService
from src.services.verification import VerificationService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

USAGE_ERRORS = (
    ParameterError, ImproperlyConfigured, InputError, SizeError, GeometryError,
    FieldIOError, FieldFormatError, FieldShapeError, ValueError,
)


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, USAGE_ERRORS):
        return EXIT_USAGE
    return EXIT_NUMERICAL


@contextmanager
def stage(module: str, operation: str):
    """Tag failures with the module and operation that raised them."""
    try:
        yield
    except LameSpectraError as e:
        e.add_note(f"in {module}.{operation}")
        logger.error(f"{module}.{operation} failed: {e}")
        raise


class PipelineService:
    """Batch orchestration behind the ``lame-spectra`` commands."""

    def __init__(
            self,
            norm_service: Optional[WeightedNormService] = None,
            enclosure_service: Optional[EnclosureService] = None,
            lame_service: Optional[LameOperatorService] = None,
            spectra_service: Optional[SpectraService] = None,
            potential_service: Optional[PotentialService] = None,
            verification_service: Optional[VerificationService] = None,
            field_repository: Optional[FieldRepository] = None,
    ):
        self.norm_service = norm_service or WeightedNormService()
        self.enclosure_service = enclosure_service or EnclosureService()
        self.lame_service = lame_service or LameOperatorService()
        self.spectra_service = spectra_service or SpectraService(
            self.lame_service, enclosure_service=self.enclosure_service,
        )
        self.field_repository = field_repository or FieldRepository()
        self.potential_service = potential_service or PotentialService(self.field_repository)
        self.verification_service = verification_service or VerificationService(
            norm_service=self.norm_service, lame_service=self.lame_service,
            enclosure_service=self.enclosure_service, spectra_service=self.spectra_service,
            potential_service=self.potential_service,
        )

    def execute(self, config: RunConfig) -> int:
        """Run one command, write its reports and return the process exit code."""
        handlers = {
            "norms": self.run_norms,
            "enclose": self.run_enclose,
            "bsnorm": self.run_bsnorm,
            "spectrum": self.run_spectrum,
            "verify": self.run_verify,
            "planewave": self.run_planewave,
        }
        repository = ReportRepository(config.output_dir)
        try:
            payload, code = handlers[config.command](config, repository)
        except (LameSpectraError, ValueError) as e:
            code = exit_code_for(e)
            where = "; ".join(getattr(e, "__notes__", []))
            logger.error(f"{config.command} aborted with exit code {code}: {e} {where}".rstrip())
            return code
        payload = {"command": config.command, "config": config.to_report(), "exit_code": code, **payload}
        repository.save_report(f"{config.command}.json", payload, metadata=self._metadata())
        return code

    @staticmethod
    def _metadata() -> Dict[str, Any]:
        return {"created_at": datetime.now(timezone.utc).isoformat()}

    # Shared stages

    def _grid(self, config: RunConfig) -> Grid:
        with stage("field_core", "make_grid"):
            return make_grid(config.grid.d, config.grid.n, config.grid.L)

    def _potential(self, config: RunConfig, grid: Grid) -> MatrixPotentialField:
        with stage("field_core", "sample_potential"):
            return self.potential_service.sample_potential(config.potential, grid)

    def _spec(self, config: RunConfig, d: int) -> EnclosureSpec:
        bound = config.bound
        with stage("enclosure", "EnclosureSpec"):
            spec = EnclosureSpec(
                bound_kind=bound.kind, gamma=bound.gamma, d=d, p=bound.p, alpha=bound.alpha,
                params=config.lame, constant_mode=bound.constant_mode,
                configured_constant=config.constants.configured_constant,
            )
            return spec.check_admissible()

    def _enclosure_for(self, config: RunConfig) -> EnclosureService:
        """An enclosure service on a settings copy carrying the run's configured constants."""
        current = self.enclosure_service.settings
        constants = current.constants.model_copy(update={
            "C_F": config.constants.c_F, "C_KS": config.constants.c_KS, "RIESZ_C": config.constants.riesz_C,
        })
        return EnclosureService(settings=current.model_copy(update={"constants": constants}))

    def _magnitude(self, V: MatrixPotentialField) -> ScalarField:
        return ScalarField(grid=V.grid, samples=self.norm_service.magnitude(V))

    @staticmethod
    def _is_weight(magnitude: ScalarField) -> bool:
        return bool(np.all(magnitude.samples.real > 0))

    def _norms_for(self, spec: EnclosureSpec, V: MatrixPotentialField) -> Dict[str, NormReport]:
        """The norms the chosen bound consumes."""
        norms: Dict[str, NormReport] = {}
        if spec.bound_kind == "lebesgue":
            with stage("weighted_norms", "lp_norm"):
                norms["lp"] = self.norm_service.lp_norm(V, spec.lebesgue_p)
            return norms
        magnitude = self._magnitude(V)
        if spec.bound_kind == "morrey_campanato":
            with stage("weighted_norms", "morrey_campanato_norm"):
                norms["morrey_campanato"] = self.norm_service.morrey_campanato_norm(V, spec.derived_alpha, spec.p)
            if spec.uses_explicit_constant and self._is_weight(magnitude):
                with stage("weighted_norms", "a_p_constant"):
                    norms["a_p"] = self.norm_service.a_p_constant(magnitude, 2.0)
            return norms
        with stage("weighted_norms", "a_p_constant"):
            norms["a_p"] = self.norm_service.a_p_constant(magnitude, 2.0)
        with stage("weighted_norms", "kerman_sawyer_norm"):
            powered = magnitude.with_samples(np.abs(magnitude.samples) ** spec.derived_beta)
            norms["kerman_sawyer"] = self.norm_service.kerman_sawyer_norm(powered, spec.derived_alpha)
        return norms

    @staticmethod
    def _q2(norms: Dict[str, NormReport]) -> Optional[float]:
        return norms["a_p"].value if "a_p" in norms else None

    def _enclosure_norm(self, spec: EnclosureSpec, norms: Dict[str, NormReport]) -> float:
        if spec.bound_kind == "lebesgue":
            return norms["lp"].value
        if spec.bound_kind == "morrey_campanato":
            return norms["morrey_campanato"].value
        ks = norms["kerman_sawyer"].value
        if spec.uses_explicit_constant:
            return ks
        return ks_combined_norm(norms["a_p"].value, ks, spec.derived_beta)

    def _disk(
            self, config: RunConfig, grid: Grid, V: MatrixPotentialField, enclosure: EnclosureService,
    ) -> Tuple[EnclosureDisk, Dict[str, NormReport]]:
        spec = self._spec(config, grid.d)
        norms = self._norms_for(spec, V)
        with stage("enclosure", "enclosure_disk"):
            return enclosure.enclosure_disk(spec, self._enclosure_norm(spec, norms), q2=self._q2(norms)), norms

    # Commands

    def run_norms(self, config: RunConfig, repository: ReportRepository) -> Tuple[Dict[str, Any], int]:
        grid = self._grid(config)
        V = self._potential(config, grid)
        gamma, d = config.bound.gamma, grid.d
        magnitude = self._magnitude(V)
        reports: Dict[str, Any] = {}
        skipped: Dict[str, str] = {}

        def attempt(name: str, module_op: str, compute):
            try:
                with stage("weighted_norms", module_op):
                    reports[name] = compute()
            except (ParameterError, InputError) as e:
                skipped[name] = str(e)

        attempt("lp", "lp_norm", lambda: self.norm_service.lp_norm(V, gamma + d / 2))
        if d == 3:
            attempt("lp_3_2", "lp_norm", lambda: self.norm_service.lp_norm(V, 1.5))
        alpha = 2 * d / (2 * gamma + d)
        p = config.bound.p or 1.0
        attempt("morrey_campanato", "morrey_campanato_norm",
                lambda: self.norm_service.morrey_campanato_norm(V, alpha, p))
        if d >= 2 and self._is_weight(magnitude):
            beta = (d + 2 * gamma) * (d - 1) / (2 * (d - 2 * gamma))
            alpha_ks = 2 * d * beta / (2 * gamma + d)
            attempt("a_2", "a_p_constant", lambda: self.norm_service.a_p_constant(magnitude, 2.0))
            attempt("kerman_sawyer", "kerman_sawyer_norm", lambda: self.norm_service.kerman_sawyer_norm(
                magnitude.with_samples(magnitude.samples.real ** beta), alpha_ks))
        if not V.is_zero():
            attempt("hardy", "hardy_constant_estimate",
                    lambda: self.norm_service.hardy_constant_estimate(V, seed=config.seed))
        return {"norms": reports, "skipped": skipped}, EXIT_OK

    def run_enclose(self, config: RunConfig, repository: ReportRepository) -> Tuple[Dict[str, Any], int]:
        enclosure = self._enclosure_for(config)
        grid = self._grid(config)
        V = self._potential(config, grid)
        disk, norms = self._disk(config, grid, V, enclosure)
        payload: Dict[str, Any] = {"disk": disk, "norms": norms}
        if disk.is_absence:
            verdict = "absence condition satisfied" if disk.absence_satisfied else "absence condition NOT satisfied"
            payload["threshold"] = enclosure.absence_threshold(self._spec(config, grid.d), q2=disk.q2)
        else:
            verdict = f"eigenvalues enclosed in |z| <= {disk.radius:.6g}"
            with stage("enclosure", "disk_boundary"):
                repository.save_series("disk_boundary.csv", enclosure.disk_boundary(disk))
        logger.info(verdict)
        payload["verdict"] = verdict
        if grid.d == 3:
            payload["stability"] = self._stability(config, V, enclosure)
        return payload, EXIT_OK

    def _weighted_riesz(
            self, config: RunConfig, V: MatrixPotentialField, enclosure: EnclosureService,
    ) -> Tuple[float, str]:
        """c_V for the d = 3 stability conditions and where it came from."""
        magnitude = self._magnitude(V)
        if not self._is_weight(magnitude):
            logger.warning("|V| vanishes somewhere, so Q2(|V|) is undefined; c_V falls back to the configured C")
            return config.constants.riesz_C, "C (|V| is not an A_2 weight)"
        if config.constants.riesz_source == "empirical":
            with stage("helmholtz", "weighted_riesz_norm_estimate"):
                reports = [
                    self.spectra_service.helmholtz_service.weighted_riesz_norm_estimate(magnitude, j, seed=config.seed)
                    for j in range(V.grid.d)
                ]
            return max(r.estimate for r in reports), "empirical max_j ||R_j|| on L2(|V| dx)"
        with stage("weighted_norms", "a_p_constant"):
            q2 = self.norm_service.a_p_constant(magnitude, 2.0).value
        return enclosure.weighted_riesz_constant("kerman_sawyer", q2)

    def _stability(self, config: RunConfig, V: MatrixPotentialField, enclosure: EnclosureService) -> List[Any]:
        c_V, source = self._weighted_riesz(config, V, enclosure)
        inputs: Dict[str, float] = {"c_V": c_V, "c_F": config.constants.c_F}
        with stage("weighted_norms", "lp_norm"):
            inputs["lp_norm"] = self.norm_service.lp_norm(V, 1.5).value
        with stage("weighted_norms", "morrey_campanato_norm"):
            inputs["mc_norm"] = self.norm_service.morrey_campanato_norm(V, 2.0, config.bound.p or 1.0).value
        if not V.is_zero():
            with stage("weighted_norms", "hardy_constant_estimate"):
                inputs["a"] = self.norm_service.hardy_constant_estimate(V, seed=config.seed).value
        else:
            inputs["a"] = 0.0
        reports = []
        for condition in ("fkv", "mc", "lp"):
            with stage("enclosure", "stability_check_d3"):
                reports.append(enclosure.stability_check_d3(condition, inputs, config.lame, c_V_source=source))
        with stage("enclosure", "sectoriality_check"):
            reports.append(enclosure.sectoriality_check(inputs["a"], config.lame))
        return reports

    def run_bsnorm(self, config: RunConfig, repository: ReportRepository) -> Tuple[Dict[str, Any], int]:
        enclosure = self._enclosure_for(config)
        grid = self._grid(config)
        V = self._potential(config, grid)
        spec = self._spec(config, grid.d)
        norms = self._norms_for(spec, V)
        estimates, extrapolations, rows = [], [], []
        violated = False
        for re, im in config.z_values:
            z = complex(re, im)
            with stage("enclosure", "bs_bound_value"):
                bounds, provenance = enclosure.bs_bounds(z, spec, norms, kinds=(spec.bound_kind,))
            if is_embedded(z):
                with stage("lame_operator", "epsilon_extrapolation"):
                    series = self.lame_service.epsilon_extrapolation(
                        z, V, config.lame, config.epsilons, tol=config.tolerances.power_iteration, seed=config.seed,
                    )
                extrapolations.append(series)
                rows += [{"z_re": re, "z_im": im, "epsilon": e, "estimate": s, "difference": diff}
                         for e, s, diff in zip(series.epsilons, series.estimates, series.differences + [None])]
                epsilon = config.epsilons[-1]
            else:
                epsilon = None
            with stage("lame_operator", "bs_norm_estimate"):
                report = self.lame_service.bs_norm_estimate(
                    z, V, config.lame, tol=config.tolerances.power_iteration, epsilon=epsilon,
                    bounds=bounds, bound_provenance=provenance, seed=config.seed,
                )
            estimates.append(report)
            proven = [k for k, v in provenance.items() if not v.startswith("configured")]
            violated |= any(not report.within_bounds[k] for k in proven)
        if rows:
            repository.save_series("epsilon_extrapolation.csv", rows)
        return {"estimates": estimates, "extrapolations": extrapolations, "norms": norms}, \
            EXIT_VIOLATION if violated else EXIT_OK

    def run_spectrum(self, config: RunConfig, repository: ReportRepository) -> Tuple[Dict[str, Any], int]:
        enclosure = self._enclosure_for(config)
        grid = self._grid(config)
        V = self._potential(config, grid)
        disk, norms = self._disk(config, grid, V, enclosure)
        with stage("spectra", "assemble_hamiltonian"):
            H = self.spectra_service.assemble_hamiltonian(V, config.lame, grid)
        with stage("spectra", "eigenvalues"):
            report = self.spectra_service.spectrum_report(
                H, disk, essential_margin=config.tolerances.essential_margin,
                inflation=config.tolerances.containment_inflation, residual_tol=config.tolerances.residual,
            )
        repository.save_series("eigenvalues.csv", report.as_rows())
        if disk.radius is not None:
            repository.save_series("disk_boundary.csv", enclosure.disk_boundary(disk))
        code = EXIT_VIOLATION if report.violations else EXIT_OK
        return {"spectrum": report, "norms": norms}, code

    def run_verify(self, config: RunConfig, repository: ReportRepository) -> Tuple[Dict[str, Any], int]:
        grid = self._grid(config)
        with stage("spectra", f"verify[{config.suite}]"):
            results = self.verification_service.run(
                config.suite, grid, config.lame, seed=config.seed, threads=config.threads,
            )
        failed = [r.name for r in results if not r.passed]
        if failed:
            logger.warning(f"Failed suites: {', '.join(failed)}")
        return {"suites": results, "failed": failed}, EXIT_VIOLATION if failed else EXIT_OK

    def run_planewave(self, config: RunConfig, repository: ReportRepository) -> Tuple[Dict[str, Any], int]:
        grid = self._grid(config)
        z = config.wave_z
        if z is None:
            z = self.spectra_service.admissible_levels(config.wave_mode, config.lame, grid, count=1)[0]
        with stage("spectra", "plane_wave"):
            result = self.spectra_service.plane_wave(z, config.wave_mode, config.wave_axis, config.lame, grid)
        with stage("field_core", "save_field"):
            path = self.field_repository.save_field(result.field, repository.path_for("planewave.lfd"))
        ok = result.residual <= 1e-12 and result.max_modulus_error <= 1e-13
        if config.wave_mode == "S":
            ok &= result.divergence_norm <= 1e-12
        summary = result.to_report(exclude={"field"})
        summary["field_path"] = path.name
        payload: Dict[str, Any] = {"planewave": summary}
        if config.weyl_scale > 0 and (grid.d >= 2 or config.wave_mode == "P"):
            with stage("spectra", "weyl_residual"):
                payload["weyl"] = self.spectra_service.weyl_residual(
                    z, config.weyl_scale, config.lame, grid, mode=config.wave_mode, axis=config.wave_axis,
                )
        return payload, EXIT_OK if ok else EXIT_VIOLATION
