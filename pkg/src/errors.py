from typing import Any, List, Optional, Sequence


class LameSpectraError(Exception):
    pass


class ImproperlyConfigured(LameSpectraError):
    pass


class ParameterError(LameSpectraError, ValueError):
    pass


class DomainError(ParameterError):
    """ Input outside the mathematical domain of an operation """


class DegenerateInputError(ParameterError):
    pass


class UnsupportedDimensionError(ParameterError):
    pass


class InputError(LameSpectraError):
    """ Required inputs missing or mutually inconsistent """


class SizeError(LameSpectraError):
    pass


class GeometryError(LameSpectraError):
    pass


class AdmissibilityError(ParameterError):
    """ Exponent combination outside the range where an enclosure is proven """

    def __init__(self, constraint: str, message: Optional[str] = None):
        self.constraint = constraint
        super().__init__(message or f"inadmissible parameters: {constraint}")


class QuantizationError(ParameterError):
    """ Spectral parameter whose wavenumber is not on the grid lattice """

    def __init__(self, message: str, nearest: Sequence[float]):
        self.nearest = list(nearest)
        super().__init__(f"{message}; nearest admissible z: {self.nearest}")


class FieldIOError(LameSpectraError, OSError):
    pass


class FieldFormatError(LameSpectraError):
    """ Corrupt or truncated field file """

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class FieldShapeError(LameSpectraError):
    pass


class NumericalError(LameSpectraError):
    pass


class NearSingularError(NumericalError):
    def __init__(self, message: str, xi: Any):
        self.xi = xi
        super().__init__(f"{message} at xi={xi}")


class ConvergenceError(NumericalError):
    def __init__(self, message: str, iterations: int, last_iterate: Any = None):
        self.iterations = iterations
        self.last_iterate = last_iterate
        super().__init__(f"{message} after {iterations} iterations")


class SolverError(NumericalError):
    def __init__(self, message: str, log: Optional[List[str]] = None):
        self.log = log or []
        super().__init__(message)
