"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: usage errors exit 2 (argparse),
DataError exits 3, NumericalError exits 4.
"""


class MjdcastError(Exception):
    """Base class for all package errors."""


class DataError(MjdcastError):
    """Malformed, inconsistent, or out-of-contract input data."""


class NumericalError(MjdcastError):
    """Numerical failure: non-finite values, diverged optimization, etc."""
