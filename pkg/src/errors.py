"""Exception hierarchy shared by every milp-inverse component"""

from typing import Optional


class MilpInverseError(Exception):
    """Base class for all errors raised by milp-inverse"""


class NetworkError(MilpInverseError):
    """Invalid network structure or evaluation request"""


class DimensionError(NetworkError):
    """Vector or matrix dimensions do not line up"""

    def __init__(self, message: str, layer: Optional[int] = None):
        self.layer = layer
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)


class NetworkFormatError(NetworkError):
    """Network file does not match the documented schema"""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class ModelError(MilpInverseError):
    """Malformed MILP model (bad index, non-finite coefficient, bad bounds)"""


class LpNumericalError(MilpInverseError):
    """Simplex could not produce a trustworthy basic solution"""


class InvalidIncumbentError(MilpInverseError):
    """An incumbent hint failed feasibility or integrality validation"""


class ProblemError(MilpInverseError):
    """Invalid inverse problem definition"""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class InfeasibleProblemError(ProblemError):
    """Design constraints admit no point (empty box or contradictory constraints)"""


class EncodingError(MilpInverseError):
    """Network, bounds and problem cannot be encoded together"""


class BoundsError(MilpInverseError):
    """Bound computation failed or produced an inconsistent table"""


class OracleLimitError(MilpInverseError):
    """Brute-force reference asked to enumerate more than it allows"""


class ConfigError(MilpInverseError):
    """Configuration file or override is invalid"""
