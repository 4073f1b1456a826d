import logging
import math
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.config.settings import settings as default_settings
from src.errors import AdmissibilityError, DegenerateInputError, ImproperlyConfigured, InputError, ParameterError
from src.models.enclosure import BoundKind, EnclosureDisk, EnclosureSpec
from src.models.grid import LameParams
from src.schemas import NormReport, StabilityReport
from src.services.norms import ks_combined_norm

logger = logging.getLogger(__name__)

# cot(π/12) = 2 + √3
COT_PI_12 = 2 + math.sqrt(3)
COT2_PI_12 = 7 + 4 * math.sqrt(3)

EXPLICIT = "explicit (d = 3, gamma = 0)"
CONFIGURED = "configured, not proven"
SPECTRUM_CLAIM = "sigma(-Delta* + V) = sigma_c(-Delta* + V) = [0, inf)"

NormInput = Union[NormReport, float]


def hls_factor_d3(params: LameParams) -> float:
    """2^{4/3}(1 + 6cot²(π/12))/(3π^{4/3}min{μ, λ+2μ}), the d = 3 Lebesgue Birman–Schwinger constant."""
    return 2 ** (4 / 3) * (1 + 6 * COT2_PI_12) / (3 * math.pi ** (4 / 3) * params.min_modulus)


def _value(norm: NormInput) -> float:
    return float(norm.value if isinstance(norm, NormReport) else norm)


class EnclosureService:
    """Enclosure radii, absence thresholds and theoretical Birman–Schwinger right sides."""

    def __init__(self, settings=None):
        self.settings = settings or default_settings

    def explicit_constant_d3(
            self,
            kind: BoundKind,
            params: LameParams,
            c_V: Optional[float] = None,
            c_F: Optional[float] = None,
            c_KS: Optional[float] = None,
    ) -> float:
        if kind == "lebesgue":
            return hls_factor_d3(params) ** 1.5
        if c_V is None:
            raise ImproperlyConfigured(f"{kind} constant needs the weighted Riesz constant C")
        aux = c_F if kind == "morrey_campanato" else c_KS
        if aux is None:
            name = "c_F" if kind == "morrey_campanato" else "c_KS"
            raise ImproperlyConfigured(f"{kind} constant needs {name}")
        return (aux * (1 + 6 * c_V ** 2) / params.min_modulus) ** 1.5

    def weighted_riesz_constant(self, kind: BoundKind, q2: Optional[float] = None) -> Tuple[float, str]:
        """c_V = C·Q₂(|V|) bounding the Riesz transforms on L²(|V| dx); plain C when Q₂ is not supplied.

        The Kerman–Sawyer bound has no V-independent weight constant, so Q₂ is required there.
        """
        C = self.settings.constants.RIESZ_C
        if q2 is None:
            if kind == "kerman_sawyer":
                raise InputError("kerman_sawyer explicit constant needs the A_2 constant Q2(|V|)")
            return C, "C"
        if not math.isfinite(q2) or q2 <= 0:
            raise ParameterError(f"A_2 constant must be finite and positive, got {q2}")
        return C * q2, "C*Q2(|V|)"

    def constant_for(self, spec: EnclosureSpec, q2: Optional[float] = None) -> Tuple[float, str]:
        """(constant, provenance) used by enclosure_disk; ``q2`` is Q₂(|V|) for the explicit d = 3 weighted bounds."""
        if not spec.uses_explicit_constant:
            return spec.configured_constant, CONFIGURED
        if spec.bound_kind == "lebesgue":
            return self.explicit_constant_d3("lebesgue", spec.params), EXPLICIT
        constants = self.settings.constants
        c_V, source = self.weighted_riesz_constant(spec.bound_kind, q2)
        value = self.explicit_constant_d3(
            spec.bound_kind, spec.params, c_V=c_V, c_F=constants.C_F, c_KS=constants.C_KS,
        )
        aux = "c_F" if spec.bound_kind == "morrey_campanato" else "c_KS"
        return value, f"{EXPLICIT} with configured {aux} and c_V = {source}"

    def enclosure_disk(self, spec: EnclosureSpec, norm_value: float, q2: Optional[float] = None) -> EnclosureDisk:
        spec.check_admissible()
        if norm_value < 0 or not math.isfinite(norm_value):
            raise ParameterError(f"norm_value must be finite and nonnegative, got {norm_value}")
        constant, provenance = self.constant_for(spec, q2)
        scaled = constant * norm_value ** spec.exponent
        disk = EnclosureDisk(
            bound_kind=spec.bound_kind, gamma=spec.gamma, d=spec.d, params=spec.params,
            constant_used=constant, constant_provenance=provenance, norm_value=norm_value, q2=q2,
        )
        if spec.gamma > 0:
            disk = disk.model_copy(update={"radius": scaled ** (1 / spec.gamma)})
            logger.info(f"{spec.bound_kind} enclosure radius {disk.radius:.6e} (constant {constant:.6e})")
        else:
            disk = disk.model_copy(update={"absence_satisfied": scaled < 1})
            logger.info(
                f"{spec.bound_kind} absence condition {'satisfied' if scaled < 1 else 'NOT satisfied'}: "
                f"{constant:.6e}*{norm_value:.6e}^{spec.exponent:g} = {scaled:.6e}"
            )
        return disk

    def absence_threshold(self, spec: EnclosureSpec, q2: Optional[float] = None) -> float:
        """Largest norm for which the γ = 0 absence predicate holds (exclusive)."""
        constant, _ = self.constant_for(spec, q2)
        return constant ** (-1 / spec.exponent)

    def _require(self, norms: Mapping[str, NormInput], key: str, kind: str) -> NormInput:
        if key not in norms or norms[key] is None:
            raise InputError(f"{kind} Birman-Schwinger bound needs the {key} norm")
        return norms[key]

    def bs_bound_with_provenance(
            self, kind: BoundKind, z: complex, spec: EnclosureSpec, norms: Mapping[str, NormInput],
    ) -> Tuple[float, str]:
        """Right side of ‖K_z‖ ≤ ... for one bound kind.

        ``norms`` maps ``lp``, ``morrey_campanato``, ``kerman_sawyer`` and ``a_p`` (Q₂(|V|))
        to reports or plain values. ``a_p`` is optional for the Morrey–Campanato bound.
        """
        spec = spec.model_copy(update={"bound_kind": kind}).check_admissible()
        constants = self.settings.constants
        params, d, gamma = spec.params, spec.d, spec.gamma
        q2 = _value(norms["a_p"]) if norms.get("a_p") is not None else None

        if kind == "lebesgue":
            norm = self._require(norms, "lp", kind)
            if isinstance(norm, NormReport) and abs(norm.params.get("p", spec.lebesgue_p) - spec.lebesgue_p) > 1e-12:
                raise InputError(f"lebesgue bound needs the L^{spec.lebesgue_p:g} norm, got p={norm.params['p']}")
            norm_value = _value(norm)
        elif kind == "morrey_campanato":
            norm_value = _value(self._require(norms, "morrey_campanato", kind))
        else:
            q2 = _value(self._require(norms, "a_p", kind))
            ks = _value(self._require(norms, "kerman_sawyer", kind))
            norm_value = ks if spec.uses_explicit_constant else ks_combined_norm(q2, ks, spec.derived_beta)

        if spec.uses_explicit_constant:
            if kind == "lebesgue":
                return hls_factor_d3(params) * norm_value, EXPLICIT
            c_V, source = self.weighted_riesz_constant(kind, q2)
            aux = constants.C_F if kind == "morrey_campanato" else constants.C_KS
            name = "c_F" if kind == "morrey_campanato" else "c_KS"
            return aux * (1 + 6 * c_V ** 2) / params.min_modulus * norm_value, \
                f"{EXPLICIT} with configured {name} and c_V = {source}"

        if norm_value == 0:
            return 0.0, CONFIGURED
        modulus = abs(complex(z))
        if gamma > 0 and modulus == 0:
            return math.inf, CONFIGURED
        decay = modulus ** (-2 * gamma / (2 * gamma + d)) if gamma > 0 else 1.0
        return spec.configured_constant * decay * norm_value, CONFIGURED

    def bs_bound_value(
            self, kind: BoundKind, z: complex, spec: EnclosureSpec, norms: Mapping[str, NormInput],
    ) -> float:
        return self.bs_bound_with_provenance(kind, z, spec, norms)[0]

    def bs_bounds(
            self, z: complex, spec: EnclosureSpec, norms: Mapping[str, NormInput],
            kinds: Iterable[BoundKind] = ("lebesgue", "morrey_campanato", "kerman_sawyer"),
    ) -> Tuple[Dict[str, float], Dict[str, str]]:
        """Every bound whose norms are available; kinds without their norms or outside their admissible range are skipped."""
        values, provenance = {}, {}
        for kind in kinds:
            try:
                values[kind], provenance[kind] = self.bs_bound_with_provenance(kind, z, spec, norms)
            except (InputError, AdmissibilityError) as e:
                logger.info(f"Skipping {kind} bound: {e}")
        return values, provenance

    def stability_check_d3(
            self, condition: str, inputs: Mapping[str, float], params: LameParams, c_V_source: Optional[str] = None,
    ) -> StabilityReport:
        """Smallness conditions under which σ(-Δ* + V) = [0, ∞) in d = 3.

        fkv needs ``a`` (Hardy-type constant) and ``c_V``; mc needs
        ``mc_norm`` and ``c_V`` (``c_F`` defaults to the configured value);
        lp needs ``lp_norm``. ``c_V_source`` records where c_V came from.
        """
        def need(*keys):
            missing = [k for k in keys if inputs.get(k) is None]
            if missing:
                raise InputError(f"stability condition {condition} needs {', '.join(missing)}")

        m = params.min_modulus
        if condition == "fkv":
            need("a", "c_V")
            value, threshold = inputs["a"], m / (1 + 6 * inputs["c_V"] ** 2)
        elif condition == "mc":
            need("mc_norm", "c_V")
            c_F = inputs.get("c_F", self.settings.constants.C_F)
            value, threshold = c_F * (1 + 6 * inputs["c_V"] ** 2) * inputs["mc_norm"] / m, 1.0
        elif condition == "lp":
            need("lp_norm")
            value, threshold = hls_factor_d3(params) * inputs["lp_norm"], 1.0
        else:
            raise ParameterError(f"unknown stability condition {condition!r}")

        satisfied = value < threshold
        sectorial = inputs["a"] < m if inputs.get("a") is not None else None
        return StabilityReport(
            condition=condition, satisfied=satisfied, value=value, threshold=threshold,
            margin=threshold - value, inputs={k: float(v) for k, v in inputs.items() if v is not None},
            c_V_source=c_V_source if condition in ("fkv", "mc") else None,
            sectorial=sectorial, claim=SPECTRUM_CLAIM if satisfied else None,
        )

    def sectoriality_check(self, a: float, params: LameParams) -> StabilityReport:
        """h₀ + v is closed and sectorial when the Hardy-type constant a < min{μ, λ+2μ}."""
        if a < 0:
            raise ParameterError(f"Hardy-type constant must be nonnegative, got {a}")
        m = params.min_modulus
        return StabilityReport(
            condition="sectorial", satisfied=a < m, value=a, threshold=m, margin=m - a,
            inputs={"a": a}, sectorial=a < m,
        )

    def disk_boundary(self, disk: EnclosureDisk, samples: Optional[int] = None) -> pd.DataFrame:
        """Boundary points of the enclosure disk; empty for an absence predicate."""
        samples = samples or self.settings.spectra.DISK_BOUNDARY_SAMPLES
        if disk.radius is None:
            return pd.DataFrame(columns=["angle", "re", "im"])
        angle = 2 * np.pi * np.arange(samples) / samples
        return pd.DataFrame({"angle": angle, "re": disk.radius * np.cos(angle), "im": disk.radius * np.sin(angle)})

    def empirical_constant(self, eigenvalues: Iterable[complex], norm_value: float, gamma: float, d: int) -> float:
        """Smallest C with |z|^γ ≤ C‖V‖^{γ+d/2} over the given eigenvalues."""
        eigenvalues = np.asarray(list(eigenvalues), dtype=complex)
        if eigenvalues.size == 0:
            return 0.0
        if norm_value <= 0:
            raise DegenerateInputError("empirical constant needs a positive potential norm")
        return float(np.max(np.abs(eigenvalues) ** gamma) / norm_value ** (gamma + d / 2))
