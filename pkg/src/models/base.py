from typing import Any

import numpy as np
from pydantic import BaseModel as _BaseModel, ConfigDict


def jsonable(value: Any) -> Any:
    """Convert numpy arrays, numpy scalars and complex numbers into JSON-ready values.

    Complex numbers become ``[re, im]`` pairs.
    """
    if isinstance(value, _BaseModel):
        return jsonable(value.model_dump(by_alias=True))
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, float) and not np.isfinite(value):
        return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "value") and hasattr(value, "name"):  # enums
        return jsonable(value.value)
    return value


def frozen_array(values: Any, dtype=np.complex128) -> np.ndarray:
    """Contiguous read-only copy of ``values``."""
    array = np.array(values, dtype=dtype, copy=True, order="C")
    array.setflags(write=False)
    return array


class BaseModel(_BaseModel):
    """Immutable domain model; array-valued fields are frozen on construction."""

    model_config = ConfigDict(
        from_attributes=True,
        populate_by_name=True,
        extra='ignore',
        frozen=True,
        arbitrary_types_allowed=True,
    )

    def to_report(self, **kwargs) -> dict:
        """Dump to plain JSON-compatible python values."""
        by_alias = kwargs.pop("by_alias", True)
        return jsonable(self.model_dump(by_alias=by_alias, **kwargs))
