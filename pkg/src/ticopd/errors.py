"""Shared exception types."""


class InvalidConfigError(ValueError):
    """A configuration value violates a precondition (bad sizes, ranges, kinds)."""


class InvalidInputError(ValueError):
    """A runtime input is inconsistent with the object it is applied to."""


class AssumptionViolationError(RuntimeError):
    """A structural assumption needed for convergence does not hold numerically."""
