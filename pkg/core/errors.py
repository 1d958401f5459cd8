"""
ERRORS - Fehlerhierarchie
One root exception for the toolkit, one subclass per module.

The CLI maps every ToolkitError to exit code 2.
"""

from typing import Optional


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit"""


class AlgebraError(ToolkitError):
    """Exact-kernel failure (degenerate polynomial input, singular solve)"""


class ResonanceError(AlgebraError):
    """Sylvester operator AX - XB is not invertible"""

    def __init__(self, message: str = "resonant Sylvester operator", order: Optional[int] = None):
        if order is not None:
            message = f"{message} at order {order}"
        super().__init__(message)
        self.order = order


class GeometryError(ToolkitError):
    """Invalid atlas, cocycle or surface classification request"""


class HiggsFieldError(ToolkitError):
    """Invalid Higgs field data or gauge"""


class NormalFormError(ToolkitError):
    """Reduction to a normal form failed"""


class SpectralError(ToolkitError):
    """Spectral curve, divisor or reconstruction failure"""


class DynamicsError(ToolkitError):
    """Phase-space model or integrator failure"""


class SceneError(ToolkitError):
    """Scene file could not be parsed; location names the offending field"""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
