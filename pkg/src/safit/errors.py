"""Exception types shared across the package.

All inherit ValueError so callers that do not care about the distinction can
catch one type; the CLI maps each to a distinct error code on stderr.
"""


class ConfigError(ValueError):
    """Invalid parameter or configuration value."""


class DataError(ValueError):
    """Malformed or inconsistent dataset content."""


class WarpError(ValueError):
    """Degenerate projective transform (point at or beyond the horizon)."""
