"""Exception hierarchy shared by all modules."""


class MaxRegionError(Exception):
    """Base class for toolkit errors."""


class DomainError(MaxRegionError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class DegenerateMatrixError(MaxRegionError, ValueError):
    """An anisotropy matrix is singular, infinite or otherwise unusable."""


class NumericalDomainError(MaxRegionError, ArithmeticError):
    """A computation produced a non-finite intermediate value."""


class IllConditionedCovarianceError(MaxRegionError, ArithmeticError):
    """Covariance factorization failed even at the largest jitter."""


class SimulationBudgetError(MaxRegionError, RuntimeError):
    """The approximate sampler did not reach its accuracy within the budget."""


class DegenerateColumnError(MaxRegionError, ValueError):
    """A location has constant data, so ranks carry no information."""


class NoPairsError(MaxRegionError, ValueError):
    """The pair selection for a likelihood is empty."""


class ClusterTooSmallError(MaxRegionError, ValueError):
    """A cluster has fewer than two members."""


class FitFailureError(MaxRegionError, RuntimeError):
    """No optimizer start produced a finite likelihood."""


class MissingFitError(MaxRegionError, KeyError):
    """A cluster touched by a comparison has no fit result."""


class ClusteringMismatchError(MaxRegionError, ValueError):
    """Two clusterings do not share the same location universe."""


class ConfigError(MaxRegionError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending path."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class UnsupportedLayoutError(MaxRegionError, ValueError):
    """Values cannot be drawn as a rectangular raster."""
