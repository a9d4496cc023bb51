"""Exception types shared across the package."""


class PhaseGridError(Exception):
    """Base class for all phasegrid errors."""


class ConfigError(PhaseGridError):
    """Invalid hyperparameter configuration (non-positive scales, bad laws, ...)."""


class MetricError(PhaseGridError):
    """A diagnostic is undefined for the given input (zero vectors, zero norms)."""


class IdxFormatError(PhaseGridError):
    """Malformed IDX file: bad magic, truncated payload, or count mismatch."""


class SweepError(PhaseGridError):
    """A sweep produced no usable runs (e.g. everything diverged)."""
