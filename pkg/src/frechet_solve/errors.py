"""Exception types shared across the package."""


class LevelRangeError(IndexError):
    """A seminorm level lies outside the truncated family."""


class SpaceMismatchError(TypeError):
    """Operands belong to different model spaces."""


class EmptySupportError(ValueError):
    """A level vector with empty support was used where supp s != {} is required."""


class DomainError(ValueError):
    """A point left the domain on which a map or estimate is declared."""


class PreconditionError(ValueError):
    pass


class StepFailure(RuntimeError):
    """The orbit could not accept a step after the maximal number of halvings."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NumericalFailure(RuntimeError):
    pass


class RadiusError(ValueError):
    """A verification radius violates 0 < r < m_U(x)."""
