from typing import List, Literal, Optional

from pydantic import Field, model_validator

from src.models.base import BaseModel

PotentialFamily = Literal[
    "gaussian_scalar",
    "step_scalar",
    "inverse_square_regularized",
    "complex_rotation",
    "matrix_dense_random",
    "file",
]

RealFamily = Literal["gaussian_scalar", "step_scalar", "inverse_square_regularized"]


class PotentialSpec(BaseModel):
    """Recipe for a built-in potential family, or a potential stored on disk."""

    family: PotentialFamily = "gaussian_scalar"
    amplitude: float = Field(default=1.0, description="Amplitude A")
    width: float = Field(default=1.0, gt=0, description="Width σ (gaussian) or half side (step)")
    epsilon: Optional[float] = Field(default=None, description="Regularization ε of the inverse-square family")
    phase: float = Field(default=0.0, description="Rotation angle θ of complex_rotation, in radians")
    base_family: RealFamily = Field(
        default="gaussian_scalar", description="Real family rotated by complex_rotation"
    )
    center: Optional[List[float]] = Field(default=None, description="Center x₀; defaults to the torus center")
    pointwise_random: bool = Field(
        default=False, description="matrix_dense_random: draw an independent matrix at every point"
    )
    seed: int = Field(default=0, ge=0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check_family_params(self) -> "PotentialSpec":
        uses_epsilon = self.family == "inverse_square_regularized" or (
            self.family == "complex_rotation" and self.base_family == "inverse_square_regularized"
        )
        if uses_epsilon and (self.epsilon is None or self.epsilon <= 0):
            raise ValueError("inverse_square_regularized requires epsilon > 0")
        if self.family == "file" and not self.path:
            raise ValueError("file family requires a path")
        return self

    def scaled(self, factor: float) -> "PotentialSpec":
        return self.model_copy(update={"amplitude": self.amplitude * factor})
