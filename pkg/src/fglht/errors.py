"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`FglhtError`; the CLI maps the subclasses to exit codes.
"""


class FglhtError(Exception):
    """Base class for package errors."""

    exit_code = 1


class InputError(FglhtError, ValueError):
    """Malformed or inconsistent input (shapes, non-finite values, ranges)."""

    exit_code = 2


class DataFormatError(InputError):
    """A data file has the wrong shape or an unparsable cell."""


class DataNotFoundError(FglhtError, FileNotFoundError):
    """The response data file is missing."""

    exit_code = 3


class DegreesOfFreedomError(InputError):
    """Residual degrees of freedom ``n - k`` are not positive."""


class EstimabilityError(InputError):
    """The hypothesis ``C beta(t) = c(t)`` is not testable for the design."""


class RankError(FglhtError, ArithmeticError):
    """The middle matrix ``C (X'X)^+ C'`` is singular."""

    exit_code = 4


class DegenerateVarianceError(FglhtError, ArithmeticError):
    """A pointwise variance estimate is zero where a ratio needs it."""

    exit_code = 4


class NumericError(FglhtError, ArithmeticError):
    """A linear-algebra routine failed."""

    exit_code = 4


class ConfigError(InputError):
    """A scenario configuration does not match the expected schema."""
