class ImdynError(Exception):
    """Base class for every error raised by the interval map toolkit."""


class MapDefinitionError(ImdynError, ValueError):
    """The map document or the branch data does not describe a valid interval map."""


class MapSyntaxError(MapDefinitionError):
    pass


class ContinuityError(MapDefinitionError):
    pass


class ImageEscapesDomainError(MapDefinitionError):
    pass


class ZeroSlopeError(MapDefinitionError):
    pass


class DomainError(ImdynError, ValueError):
    """A point lies outside the domain of the map."""


class TauDomainError(DomainError):
    """The involution around a turning point is not defined at the point."""


class PreconditionError(ImdynError, ValueError):
    pass


class BudgetExceededError(ImdynError):
    def __init__(self, requested: int, budget: int):
        super().__init__(f'Enumeration of {requested} words exceeds the budget of {budget}')
        self.requested = requested
        self.budget = budget


class ArithmeticModeError(ImdynError):
    """An exact-only operation was asked to work on a float map."""


class NonIsolatedPeriodicPointsError(ImdynError):
    """An iterate of the map fixes a whole interval."""


class NonHyperbolicOrbitError(ImdynError):
    def __init__(self, orbit):
        super().__init__(f'Non-hyperbolic periodic orbit of period {len(orbit.points)} '
                         f'through {orbit.points[0]} avoids the excluded set')
        self.orbit = orbit


class CertificateError(ImdynError):
    """A sample violates the derivative bound it was submitted with."""


class UnresolvedError(ImdynError):
    """The requested object could not be resolved within the horizon."""


class AnalysisRefusal(ImdynError):
    """The analysis declines to run; the reason is kept for the report."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason
