"""Exception and warning types shared across the package."""


class YoungLabError(Exception):
    """Base class for all package errors."""


class RejectedTriple(YoungLabError, ValueError):
    """Exponent triple failed validation.

    ``reason`` is ``"identity"`` when the reciprocal sum is not 2 and
    ``"range"`` when some exponent is outside (1, inf).
    """

    def __init__(self, reason, message):
        super().__init__(message)
        self.reason = reason


class DomainError(YoungLabError, ValueError):
    pass


class NonFinite(YoungLabError, ValueError):
    pass


class GridMismatch(YoungLabError, ValueError):
    pass


class ZeroFunction(YoungLabError, ValueError):
    pass


class EmptySet(YoungLabError, ValueError):
    pass


class UnsortedThresholds(YoungLabError, ValueError):
    pass


class NegativeInput(YoungLabError, ValueError):
    pass


class NotUnitNorm(YoungLabError, ValueError):
    pass


class OptimizationFailure(YoungLabError, RuntimeError):
    pass


class InsufficientRichPoints(YoungLabError, RuntimeError):
    pass


class ZeroSamples(YoungLabError, ValueError):
    pass


class DegenerateCoefficients(YoungLabError, ValueError):
    pass


class GridTooCoarse(YoungLabError, ValueError):
    pass


class DegenerateSecondMoment(YoungLabError, ValueError):
    pass


class PhaseUndefined(YoungLabError, ValueError):
    pass


class TooLarge(YoungLabError, ValueError):
    """Oracle cost guard tripped."""


class EmptySearchBox(YoungLabError, ValueError):
    pass


class BoundaryMassWarning(UserWarning):
    """Function does not decay at the box boundary; convolution may be truncated."""


class GridResolutionLoss(UserWarning):
    """Rescaling moved features below the grid resolution."""
