"""Stationary and time-dependent scattering off smooth plateau barriers."""
from .errors import PhysicsDomainError
from .potential import (
    NATURAL_UNITS,
    BarrierSpec,
    TransitionProfile,
    UnitSystem,
    evaluate_potential,
    profile_value,
    turning_point,
)

__version__ = "0.1.0"

__all__ = [
    "NATURAL_UNITS",
    "BarrierSpec",
    "PhysicsDomainError",
    "TransitionProfile",
    "UnitSystem",
    "evaluate_potential",
    "profile_value",
    "turning_point",
    "__version__",
]
