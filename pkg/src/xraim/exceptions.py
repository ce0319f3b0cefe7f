"""
Exception hierarchy for the extended RAIM toolkit.

Library code raises these; the CLI maps them onto exit codes.
"""

from typing import Optional


class XraimError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(XraimError, ValueError):
    """An argument is outside the domain of an operation (non-finite, out of range, ...)."""


class FormatError(XraimError):
    """An input file does not follow its declared schema."""


class RowError(FormatError):
    """A single CSV row failed validation."""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class SingularGeometryError(XraimError):
    """Anchor geometry does not constrain the solution (rank-deficient design matrix)."""


class ConvergenceError(XraimError):
    """An iterative solver did not converge within its iteration budget."""

    def __init__(self, message: str, iterations: Optional[int] = None):
        self.iterations = iterations
        super().__init__(message)


class InsufficientDataError(XraimError):
    """Not enough measurements or entries to run an operation."""


class NoDataError(XraimError):
    """No estimates at all were available for a decision."""


class InconsistentSubsetError(XraimError):
    """An overdetermined subset fails its residual test, so its anchors disagree."""
