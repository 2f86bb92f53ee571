"""Exception types raised by the package."""


class MixedMrfError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MixedMrfError, ValueError):
    """A value or natural parameter lies outside its family's domain."""


class EvaluationError(MixedMrfError, ValueError):
    """An objective/derivative evaluation hit an undefined point."""


class SingularBlockError(MixedMrfError, RuntimeError):
    """A per-block Newton system could not be solved, even after jitter."""

    def __init__(self, j: int, message: str | None = None):
        self.j = j
        super().__init__(message or f"singular Newton system for block {j}")


class DivergenceError(MixedMrfError, RuntimeError):
    """The optimizer produced a non-finite iterate or objective."""


class SamplingError(MixedMrfError, RuntimeError):
    """A conditional draw was requested outside the family's domain."""


class ConstraintViolationError(MixedMrfError, ValueError):
    """A parameter matrix violates the well-definedness constraints."""

    def __init__(self, report, message: str | None = None):
        self.report = report
        if message is None:
            ids = ", ".join(v.constraint_id for v in report.violations)
            message = f"parameter matrix violates constraints: {ids}"
        super().__init__(message)


class DataFormatError(MixedMrfError, ValueError):
    """A file being read does not conform to the expected format."""


class ParameterError(MixedMrfError, ValueError):
    """An argument is out of its documented range."""
