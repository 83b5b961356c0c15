"""Exception types shared across the package.

The CLI maps these onto exit codes, so every error raised by library code
should derive from one of them.
"""


class DressformError(Exception):
    """Base class for all package errors."""


class InputError(DressformError, ValueError):
    """Malformed or inconsistent input (shapes, counts, names, file content)."""


class DegenerateError(DressformError, ArithmeticError):
    """Numerically degenerate configuration (zero bones, collinear points, ...)."""
