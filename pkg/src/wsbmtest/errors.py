"""Exception hierarchy shared across the package.

Each class carries the process exit code used by the CLI.
"""


class WsbmError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(WsbmError, ValueError):
    """Malformed input: bad files, inconsistent model parameters, broken invariants."""

    exit_code = 4


class DomainError(WsbmError, ValueError):
    """Arguments outside the mathematical domain of an operation."""

    exit_code = 4


class DimensionError(DomainError):
    """Shape or size mismatch between operands."""

    exit_code = 5


class UnsupportedLawError(DomainError):
    """Operation not defined for this weight-law kind."""

    exit_code = 4


class InsufficientDataError(WsbmError):
    """Not enough observed edges to estimate the required moments."""

    exit_code = 6


class ClusteringError(WsbmError):
    """Spectral clustering could not produce a valid assignment."""

    exit_code = 6


class DegenerateTestError(WsbmError):
    """The null distribution is degenerate (zero variance); the test cannot be calibrated."""

    exit_code = 6
