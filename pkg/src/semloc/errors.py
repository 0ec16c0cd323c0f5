"""Exception types shared across the package."""


class SemlocError(Exception):
    """Base class for errors raised by this package."""


class FormatError(SemlocError):
    """Malformed file content; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(FormatError):
    """Well-formed input that violates a semantic constraint."""


class ParameterError(SemlocError):
    """Out-of-range or inconsistent configuration value."""


class HorizonError(SemlocError):
    """Pixel at or above the horizon row has no ground-plane image."""


class LayoutMismatchError(SemlocError):
    """Descriptors built under different pooling layouts cannot be compared."""
