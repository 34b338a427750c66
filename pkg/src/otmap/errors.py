"""Exception types shared across the package.

The CLI maps these onto distinct exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class OtmapError(Exception):
    """Base class for package-specific failures."""


class ConfigError(OtmapError):
    """Malformed or inconsistent configuration."""


class DataError(OtmapError):
    """Missing or ill-formed input data."""


class NumericError(OtmapError):
    """Non-finite values encountered where finite ones are required."""
