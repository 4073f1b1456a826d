from typing import Literal, Optional

from pydantic import Field

from src.config.settings import settings
from src.errors import AdmissibilityError
from src.models.base import BaseModel
from src.models.grid import LameParams

BoundKind = Literal["lebesgue", "morrey_campanato", "kerman_sawyer"]
ConstantMode = Literal["explicit_d3", "configured"]


class EnclosureSpec(BaseModel):
    """Exponents and constants of one eigenvalue enclosure.

    ``alpha``, ``beta`` and (for ``lebesgue``) ``p`` are derived from γ and d
    when omitted; when supplied they must match.
    """

    bound_kind: BoundKind = "lebesgue"
    gamma: float = Field(ge=0)
    d: int = Field(ge=1, le=3)
    p: Optional[float] = Field(default=None, description="Integrability exponent (Morrey–Campanato)")
    alpha: Optional[float] = None
    beta: Optional[float] = None
    params: LameParams
    constant_mode: ConstantMode = "explicit_d3"
    configured_constant: float = Field(default=settings.constants.CONFIGURED_CONSTANT, gt=0)

    @property
    def exponent(self) -> float:
        """γ + d/2, the power of the norm in the enclosure."""
        return self.gamma + self.d / 2

    @property
    def lebesgue_p(self) -> float:
        return self.exponent

    @property
    def derived_beta(self) -> float:
        g, d = self.gamma, self.d
        return (d + 2 * g) * (d - 1) / (2 * (d - 2 * g))

    @property
    def derived_alpha(self) -> float:
        g, d = self.gamma, self.d
        if self.bound_kind == "kerman_sawyer":
            return 2 * d * self.derived_beta / (2 * g + d)
        return 2 * d / (2 * g + d)

    @property
    def uses_explicit_constant(self) -> bool:
        return self.constant_mode == "explicit_d3" and self.d == 3 and self.gamma == 0

    def check_admissible(self) -> "EnclosureSpec":
        """Raise AdmissibilityError naming the first violated constraint."""
        g, d = self.gamma, self.d
        if d < 2:
            raise AdmissibilityError("d >= 2")
        if self.bound_kind == "kerman_sawyer":
            if d == 2 and not 1 / 3 <= g < 1 / 2:
                raise AdmissibilityError("1/3 <= gamma < 1/2 if d = 2")
            if d >= 3 and not 0 <= g < 1 / 2:
                raise AdmissibilityError("0 <= gamma < 1/2 if d >= 3")
        else:
            if d == 2 and not 0 < g <= 1 / 2:
                raise AdmissibilityError("0 < gamma <= 1/2 if d = 2 (gamma != 0 if d = 2)")
            if d >= 3 and not 0 <= g <= 1 / 2:
                raise AdmissibilityError("0 <= gamma <= 1/2 if d >= 3")

        if self.bound_kind == "lebesgue" and self.p is not None and abs(self.p - self.lebesgue_p) > 1e-12:
            raise AdmissibilityError("p = gamma + d/2 for the Lebesgue bound")
        if self.bound_kind == "morrey_campanato":
            if self.p is None:
                raise AdmissibilityError("p is required for the Morrey-Campanato bound")
            lower = (d - 1) * (2 * g + d) / (2 * (d - 2 * g))
            if not lower < self.p <= self.exponent:
                raise AdmissibilityError(
                    f"(d-1)(2 gamma + d)/(2(d - 2 gamma)) < p <= gamma + d/2, i.e. {lower:g} < p <= {self.exponent:g}"
                )
        if self.bound_kind == "kerman_sawyer" and self.beta is not None and abs(self.beta - self.derived_beta) > 1e-12:
            raise AdmissibilityError("beta = (d + 2 gamma)(d - 1)/(2(d - 2 gamma))")
        if self.alpha is not None and abs(self.alpha - self.derived_alpha) > 1e-12:
            relation = "2 d beta/(2 gamma + d)" if self.bound_kind == "kerman_sawyer" else "2d/(2 gamma + d)"
            raise AdmissibilityError(f"alpha = {relation}")
        return self


class EnclosureDisk(BaseModel):
    """{z : |z|^γ ≤ C‖V‖^{γ+d/2}}, or for γ = 0 the absence predicate C‖V‖^{d/2} < 1."""

    bound_kind: BoundKind
    gamma: float
    d: int
    params: LameParams
    constant_used: float
    constant_provenance: str
    norm_value: float = Field(ge=0)
    q2: Optional[float] = Field(default=None, description="A_2 constant of |V| behind c_V = C*Q2(|V|)")
    radius: Optional[float] = Field(default=None, ge=0)
    absence_satisfied: Optional[bool] = None

    @property
    def is_absence(self) -> bool:
        return self.gamma == 0
