"""Domain exceptions for the parity bounds toolkit."""

from typing import Optional


class ParityBoundsException(Exception):
    """Base exception for the parity bounds toolkit."""


class ValidationError(ParityBoundsException, ValueError):
    """Raised when an input violates a precondition or type invariant."""


class CapacityError(ParityBoundsException):
    """Raised when a tensor dimension would exceed the configured cap."""

    def __init__(self, requested: int, cap: int):
        super().__init__(f"Tensor dimension {requested} exceeds the configured cap {cap}")
        self.requested = requested
        self.cap = cap


class NumericError(ParityBoundsException):
    """Raised when a numerical routine fails or a cross-check does not hold."""

    def __init__(self, message: str, iterations: Optional[int] = None):
        super().__init__(message)
        self.iterations = iterations


class SupportViolationError(NumericError):
    """Raised when a relative entropy would be infinite beyond tolerance."""


class SpecParseError(ValidationError):
    """Raised when a problem specification document is not well-formed JSON."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UsageError(ParityBoundsException):
    """Raised when a subcommand is invoked with missing or invalid inputs."""
