"""
Errors Module

Exception hierarchy shared by every wavepp subsystem.
"""

from typing import List, Optional


class WaveppError(Exception):
    """Base class for all wavepp failures."""


class UnsupportedElementError(WaveppError):
    """Requested element family, degree or quadrature is not available."""


class MeshError(WaveppError):
    """Mesh is degenerate, non-conforming or cannot be built."""


class InvertedElementError(MeshError):
    """An element map has a non-positive Jacobian determinant."""

    def __init__(self, element: int, det: float):
        self.element = element
        self.det = det
        super().__init__(f"element {element} is inverted (jacobian det {det:.3e})")


class MeshFormatError(MeshError):
    """Malformed mesh file."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{where}{message}")


class SpaceError(WaveppError):
    """Discrete space or operator construction failed."""


class SolverError(WaveppError):
    """Linear algebra failure."""


class ConvergenceError(SolverError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        self.residual_history = residual_history or []
        super().__init__(message)


class InstabilityError(WaveppError):
    """Time loop produced non-finite values."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite wave field at time step {step}")


class ProblemError(WaveppError):
    """Unknown benchmark or missing analytic data."""


class ConfigError(WaveppError):
    """Invalid run configuration."""


class StageError(WaveppError):
    """Failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
