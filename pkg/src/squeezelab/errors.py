"""Exception types shared across the package.

ConfigError maps to CLI exit code 2, NumericalError to exit code 3.
"""


class SqueezelabError(Exception):
    pass


class ConfigError(SqueezelabError):
    """Bad user input: malformed config, invalid argument, unknown target."""


class NumericalError(SqueezelabError):
    """Runtime numerical failure: norm drift, non-convergence, NaNs."""


class DataError(SqueezelabError):
    """Malformed or insufficient data fed to an estimator or parser."""
