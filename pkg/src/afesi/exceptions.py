"""Exception types raised across the package."""


class AfesiError(Exception):
    """Base class for all errors raised by afesi."""


class SingularDesign(AfesiError):
    """A design matrix is (numerically) rank deficient."""


class InvalidVariance(AfesiError, ValueError):
    """A variance that must be positive was not."""


class InvalidDirection(AfesiError, ValueError):
    """The test direction is degenerate (zero vector)."""


class IndexOutOfRange(AfesiError, IndexError):
    pass


class EmptyGeneration(AfesiError):
    """The search produced no generated feature."""


class TraceMismatch(AfesiError):
    """A recorded comparison does not hold at the point it was recorded for."""


class ZeroTruncationMass(AfesiError):
    """The truncation set carries no probability mass."""


class IngestError(AfesiError, ValueError):
    """A CSV input could not be turned into a numeric dataset."""
