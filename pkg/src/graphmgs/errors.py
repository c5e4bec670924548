"""Shared exception types, mapped to CLI exit codes."""


class DataError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 2)."""


class NumericError(RuntimeError):
    """Numerical failure: non-convergence, NaN loss, undefined statistic (CLI exit code 3)."""
