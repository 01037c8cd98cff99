"""Exception types shared across the tracking toolkit."""


class ConfigError(ValueError):
    """A configuration value violates its documented constraints."""


class InputValidationError(ValueError):
    """Malformed input data (non-finite coordinates, bad frame ordering, ...)."""


class SingletonClusterError(ValueError):
    """Sample covariance requested for a single-member cluster."""


class DegenerateInnovationError(RuntimeError):
    """Innovation covariance is singular or too ill-conditioned to invert."""


class NumericalError(RuntimeError):
    """A filter computation produced non-finite values."""


class StateMachineError(RuntimeError):
    """A track operation was applied in an incompatible track status."""


class AlignmentError(ValueError):
    """Estimate and ground-truth sequences cover different frame ids."""
