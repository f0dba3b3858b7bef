"""
Exception hierarchy for the box-free construction experiments.

Library modules raise these; only cli.py turns them into exit codes.
"""


class BoxFreeError(Exception):
    """Base class for every error raised by this package"""


class FieldError(BoxFreeError, ValueError):
    """Invalid field parameters, zero inversion, or operands from different fields"""


class DimensionMismatchError(BoxFreeError, ValueError):
    """Arity or vector-length mismatch"""


class DegenerateInputError(BoxFreeError, ValueError):
    """Equal points, dependent basis vectors, or a collinear pair"""


class BudgetExceededError(BoxFreeError):
    """An enumeration would exceed the configured budget"""


class VerificationError(BoxFreeError):
    """A cross-check or the box-freeness check failed"""


class UsageError(BoxFreeError):
    """Invalid command-line arguments"""


class ParameterError(BoxFreeError, ValueError):
    """Parameters outside the admitted range (d < 2, r < 1, zero trials, ...)"""
