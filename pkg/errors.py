"""
Exception hierarchy for isospec

Every error carries the process exit code the CLI reports for it.
"""

from typing import Any, Dict, List, Optional


class IsospecError(Exception):
    """Base class for all library errors"""

    exit_code = 1


class ContractViolationError(IsospecError):
    """An operation was called outside its precondition"""

    exit_code = 1


class ConfigError(IsospecError):
    """Invalid run configuration"""

    exit_code = 1


class DomainError(IsospecError):
    """Argument outside the mathematical domain (e.g. x not in [0,1])"""

    exit_code = 1


class PotentialFormatError(IsospecError):
    """Malformed potential or transform-spec file"""

    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, location: Optional[str] = None):
        where = ", ".join(part for part in (path, location) if part)
        super().__init__(f"{message} ({where})" if where else message)
        self.path = path
        self.location = location


class NotAnEigenvalueError(IsospecError):
    """No eigenvalue found where one was expected"""

    exit_code = 3

    def __init__(self, message: str, guess: float, bracket: Optional[tuple] = None):
        super().__init__(message)
        self.guess = guess
        self.bracket = bracket


class PartialSpectrumError(IsospecError):
    """Some eigenvalue clusters could not be refined"""

    exit_code = 3

    def __init__(self, message: str, partial: Any, failed: List[Dict[str, Any]]):
        super().__init__(message)
        self.partial = partial
        self.failed = failed


class InternalConsistencyError(IsospecError):
    """A quantity the theory guarantees to be regular came out singular"""

    exit_code = 3


class NearPoleError(IsospecError):
    """Weyl function requested too close to an eigenvalue"""

    exit_code = 3

    def __init__(self, message: str, nearest: Optional[float] = None):
        super().__init__(message)
        self.nearest = nearest


class ContourGeometryError(IsospecError):
    """Residue contour reaches another eigenvalue's exclusion zone"""

    exit_code = 3


class NumericalConditioningError(IsospecError):
    """I + S_alpha(x) A became numerically singular"""

    exit_code = 3

    def __init__(self, message: str, x: float, condition: float):
        super().__init__(message)
        self.x = x
        self.condition = condition


class RejectedTargetError(IsospecError):
    """Target residue matrix violates an admissibility condition"""

    exit_code = 4

    def __init__(self, message: str, condition: str, margins: Optional[Dict[str, float]] = None):
        super().__init__(message)
        self.condition = condition
        self.margins = margins or {}


class CompositionError(IsospecError):
    """A stage of a composed transform failed"""

    exit_code = 4

    def __init__(self, message: str, stage: int):
        super().__init__(message)
        self.stage = stage


class VerificationFailedError(IsospecError):
    """At least one non-skipped check failed"""

    exit_code = 5


class UsageError(IsospecError):
    """Bad command-line usage"""

    exit_code = 1


class InvalidNormingError(IsospecError):
    """Norming matrix is not Hermitian positive definite"""

    exit_code = 4
