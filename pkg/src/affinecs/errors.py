"""Exception types shared across the package."""


class AffineCSError(Exception):
    """Base class for all package errors."""


class ParameterError(AffineCSError, ValueError):
    """A parameter violates a documented domain restriction."""


class InadmissibleError(ParameterError):
    """Requested a quantity that only exists for admissible fiducial vectors
    (decay rate > 1/2 on the one-parameter family)."""


class NumericError(AffineCSError, RuntimeError):
    """A numerical routine failed to reach its accuracy target.

    Carries a ``diagnostics`` dict with whatever the routine knew at the
    point of failure (cutoffs, error estimates, iteration counts).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(AffineCSError, ValueError):
    """A grid/evolution configuration is unusable (too coarse, missing
    margin around requested labels, or violating the step-size bound)."""
