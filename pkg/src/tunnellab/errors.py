"""Exception hierarchy shared by the physics modules.

Every physics failure derives from :class:`PhysicsDomainError`, which the CLI
maps to exit status 3.
"""


class PhysicsDomainError(ValueError):
    """Input outside the domain where an operation is defined."""


class NoTurningPointError(PhysicsDomainError):
    pass


class ForbiddenRegionError(PhysicsDomainError):
    pass


class NotReflectedError(PhysicsDomainError):
    pass


class UndefinedPhaseError(PhysicsDomainError):
    pass


class GridTooCoarseError(PhysicsDomainError):
    pass


class PlacementError(PhysicsDomainError):
    pass


class StabilityError(PhysicsDomainError):
    pass


class DomainTooSmallError(PhysicsDomainError):
    pass


class IncompleteScatteringError(PhysicsDomainError):
    pass


class PrematureSplitError(PhysicsDomainError):
    pass


class IllConditionedError(PhysicsDomainError):
    pass


class NoCrossingError(PhysicsDomainError):
    pass
