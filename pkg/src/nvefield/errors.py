class ConfigError(ValueError):
    """Invalid or unparseable configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Malformed input data (CLI exit code 3)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to produce a trustworthy answer (exit code 4)."""


class PeaksUnresolvedError(NumericalError):
    """Fewer than two positive-contrast peaks clear the prominence floor."""
