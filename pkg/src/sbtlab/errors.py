"""Exception types. Each maps onto one CLI exit code."""


class SbtLabError(Exception):
    exit_code = 3


class InputError(SbtLabError, ValueError):
    """Bad user input or configuration."""
    exit_code = 1


class GeometryInvalidError(SbtLabError):
    """The requested fiber geometry violates a structural requirement."""
    exit_code = 2


class DomainError(SbtLabError, ValueError):
    """Evaluation requested outside the region where a quantity is defined."""
    exit_code = 1


class SingularEvaluationError(SbtLabError, ZeroDivisionError):
    exit_code = 3


class NumericalFailure(SbtLabError, RuntimeError):
    exit_code = 3
