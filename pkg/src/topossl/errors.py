"""Error taxonomy shared by the library and the CLI.

Exit codes: 2 config, 3 data, 4 numeric. The CLI maps exceptions to codes
via the ``exit_code`` attribute, so library code should raise these rather
than bare ValueError when the failure belongs to one of the classes.
"""


class ToposslError(Exception):
    exit_code = 1


class ConfigError(ToposslError):
    """Bad or inconsistent configuration (unknown key, invalid value)."""

    exit_code = 2


class DataError(ToposslError):
    """Malformed or mismatched input data or artifacts."""

    exit_code = 3


class NumericError(ToposslError):
    """Numeric degeneracy or divergence (NaN loss, zero value range)."""

    exit_code = 4
