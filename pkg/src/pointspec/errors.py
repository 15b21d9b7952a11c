"""Exception types shared across the package."""


class PointSpecError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PointSpecError):
    """A point lies outside the model domain."""


class PoleProximityError(PointSpecError):
    """Secular-function evaluation requested too close to a nonzero-weight pole."""


class PrecisionError(PointSpecError):
    """A requested precision target cannot be met within resource limits."""


class MarginError(PointSpecError):
    """The truncation cutoff is too low relative to the evaluation energy.

    Callers should enlarge the enumerated spectrum and retry.
    """


class ResourceLimitError(PointSpecError):
    """An enumeration or allocation would exceed a configured maximum."""


class DiagonalDivergenceError(PointSpecError):
    """Green's function requested on the diagonal where it diverges (2D/3D)."""


class NearEigenvalueError(PointSpecError):
    """Resolvent requested at an energy too close to a perturbed eigenvalue."""


class SolverError(PointSpecError):
    """Internal consistency failure in the root solver (missing sign change)."""


class ConfigError(PointSpecError):
    """Run configuration is missing fields or holds invalid values."""
