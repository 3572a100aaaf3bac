"""Exception types shared across the package.

The CLI maps these onto process exit codes: `InputFormatError` exits with 2,
`NumericalError` with 3.
"""


class InputFormatError(ValueError):
    """Raised when an input file or directory does not match its expected layout."""


class NumericalError(RuntimeError):
    """Raised when a numerical operation cannot be completed (e.g. a covariance
    matrix that stays singular after ridge repair)."""
