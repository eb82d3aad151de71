"""Error types shared across the package.

The split matters for the command line tool, which maps error categories to
exit codes: configuration problems exit 1, data problems exit 2, anything
else exits 3.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad option values, unknown keys, bad flags."""


class DataError(ValueError):
    """Invalid data: malformed files, inconsistent shapes, bad labels."""
