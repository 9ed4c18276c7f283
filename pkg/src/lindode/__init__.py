"""Classical laboratory for solving linear ODEs through Lindbladian dilation."""

__version__ = "0.1.0"

from .errors import (
    CheckFailed,
    InputError,
    IntegrationError,
    NotPSDError,
    NotSemiDissipativeError,
    SpectrumError,
)
from .odecore import OdeProblem, TimeDependentMatrix, reference_solve
from .lindblad import LindbladSpec, propagate
from .ndme import inhomogeneous_solve, solve_homogeneous

__all__ = [
    "CheckFailed",
    "InputError",
    "IntegrationError",
    "LindbladSpec",
    "NotPSDError",
    "NotSemiDissipativeError",
    "OdeProblem",
    "SpectrumError",
    "TimeDependentMatrix",
    "inhomogeneous_solve",
    "propagate",
    "reference_solve",
    "solve_homogeneous",
]
