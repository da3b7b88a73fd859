"""Unit system and the smooth plateau barrier family.

The barrier has height ``v0`` on ``|x| < a`` and ramps down to zero over a
transition region of width ``b`` on each side, following a monotone profile
``h`` with ``h(0) = 1`` and ``h(b) = 0``::

    V(x) = v0                 |x| < a
           v0 * h(|x| - a)    a <= |x| <= a + b
           0                  otherwise
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import NoTurningPointError, PhysicsDomainError


@dataclass(frozen=True)
class UnitSystem:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise PhysicsDomainError(
                f"hbar and mass must be positive, got hbar={self.hbar}, mass={self.mass}"
            )

    def wavenumber(self, E):
        """Free wavenumber ``sqrt(2 m E) / hbar``."""
        return np.sqrt(2.0 * self.mass * np.asarray(E, dtype=float)) / self.hbar

    def speed(self, E):
        return np.sqrt(2.0 * np.asarray(E, dtype=float) / self.mass)

    def wavelength(self, E):
        return 2.0 * math.pi / self.wavenumber(E)

    def energy(self, k):
        return (self.hbar * np.asarray(k, dtype=float)) ** 2 / (2.0 * self.mass)


NATURAL_UNITS = UnitSystem()


class TransitionProfile(str, enum.Enum):
    """Shape of the switch-on region, by smoothness class.

    ``linear`` is C0, ``smoothstep3`` and ``cosine`` are C1,
    ``smoothstep5`` is C2.
    """

    LINEAR = "linear"
    SMOOTHSTEP3 = "smoothstep3"
    SMOOTHSTEP5 = "smoothstep5"
    COSINE = "cosine"


def _rise(profile: TransitionProfile, u):
    """The rising step ``1 - h`` in normalized coordinate ``u = s/b``."""
    if profile is TransitionProfile.LINEAR:
        return u
    if profile is TransitionProfile.SMOOTHSTEP3:
        return u * u * (3.0 - 2.0 * u)
    if profile is TransitionProfile.SMOOTHSTEP5:
        return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    if profile is TransitionProfile.COSINE:
        return 0.5 * (1.0 - np.cos(np.pi * u))
    raise ValueError(f"unknown profile {profile!r}")


def _profile_unchecked(profile: TransitionProfile, s, b):
    u = np.clip(np.asarray(s, dtype=float) / b, 0.0, 1.0)
    return 1.0 - _rise(profile, u)


def profile_value(profile: TransitionProfile | str, s, b: float):
    """Evaluate the transition profile ``h(s)`` on ``0 <= s <= b``.

    Raises
    ------
    PhysicsDomainError
        If ``b <= 0`` or any ``s`` lies outside ``[0, b]``.
    """
    profile = TransitionProfile(profile)
    if not b > 0:
        raise PhysicsDomainError(f"profile width b must be positive, got {b}")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0.0) or np.any(s_arr > b):
        raise PhysicsDomainError(f"profile argument outside [0, {b}]")
    out = _profile_unchecked(profile, s_arr, b)
    return float(out) if out.ndim == 0 else out


def profile_drop_slope(profile: TransitionProfile | str, s0: float, delta, b: float):
    """Cancellation-free divided difference ``(h(s0) - h(s0 + delta)) / delta``.

    Positive for a strictly decreasing profile. Used near the classical
    turning point, where forming ``h(s0) - h(s0 + delta)`` directly loses all
    significant digits.
    """
    profile = TransitionProfile(profile)
    u0 = s0 / b
    d = np.asarray(delta, dtype=float) / b
    u = u0 + d
    if profile is TransitionProfile.LINEAR:
        slope = np.ones_like(d)
    elif profile is TransitionProfile.SMOOTHSTEP3:
        slope = 3.0 * (u + u0) - 2.0 * (u * u + u * u0 + u0 * u0)
    elif profile is TransitionProfile.SMOOTHSTEP5:
        p2 = u * u + u * u0 + u0 * u0
        p3 = u**3 + u * u * u0 + u * u0 * u0 + u0**3
        p4 = u**4 + u**3 * u0 + u * u * u0 * u0 + u * u0**3 + u0**4
        slope = 10.0 * p2 - 15.0 * p3 + 6.0 * p4
    elif profile is TransitionProfile.COSINE:
        # (cos(pi u0) - cos(pi u)) / 2 = sin(pi (u + u0)/2) sin(pi d/2)
        slope = np.sin(0.5 * np.pi * (u + u0)) * (0.5 * np.pi) * np.sinc(0.5 * d)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return slope / b


@dataclass(frozen=True)
class BarrierSpec:
    v0: float
    a: float
    b: float
    profile: TransitionProfile = field(default=TransitionProfile.LINEAR)

    def __post_init__(self):
        object.__setattr__(self, "profile", TransitionProfile(self.profile))
        if not self.v0 > 0:
            raise PhysicsDomainError(f"v0 must be positive, got {self.v0}")
        if not self.a > 0:
            raise PhysicsDomainError(f"a must be positive, got {self.a}")
        if not self.b >= 0:
            raise PhysicsDomainError(f"b must be non-negative, got {self.b}")

    @property
    def half_support(self) -> float:
        return self.a + self.b

    def to_dict(self) -> dict:
        return {"v0": self.v0, "a": self.a, "b": self.b, "profile": self.profile.value}

    @classmethod
    def from_dict(cls, data: dict) -> "BarrierSpec":
        return cls(
            v0=float(data["v0"]),
            a=float(data["a"]),
            b=float(data["b"]),
            profile=TransitionProfile(data.get("profile", "linear")),
        )

    def replace(self, **changes) -> "BarrierSpec":
        return BarrierSpec(**{**self.to_dict(), **changes})


def evaluate_potential(spec: BarrierSpec, x):
    """Potential energy at ``x`` (scalar or array)."""
    r = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(r)
    out[r < spec.a] = spec.v0
    if spec.b > 0:
        ramp = (r >= spec.a) & (r <= spec.a + spec.b)
        out[ramp] = spec.v0 * _profile_unchecked(spec.profile, r[ramp] - spec.a, spec.b)
    return float(out) if out.ndim == 0 else out


def turning_point(spec: BarrierSpec, E: float) -> float:
    """Depth ``s0`` into the transition region where ``v0 * h(s0) = E``.

    The classical particle coming from the left turns at ``x = -a - s0``.
    A sharp wall (``b = 0``) gives ``s0 = 0``.

    Raises
    ------
    NoTurningPointError
        Unless ``0 < E <= v0``.
    """
    if not (0.0 < E <= spec.v0):
        raise NoTurningPointError(f"no turning point for E={E} with v0={spec.v0}")
    if spec.b == 0 or E == spec.v0:
        return 0.0

    def f(s):
        return spec.v0 * _profile_unchecked(spec.profile, s, spec.b) - E

    s0 = optimize.bisect(f, 0.0, spec.b, xtol=1e-12 * spec.b, rtol=4 * np.finfo(float).eps)
    # one Newton polish; the bisection bracket bounds the step
    slope = spec.v0 * float(profile_drop_slope(spec.profile, s0, 0.0, spec.b))
    if slope > 0:
        step = f(s0) / slope
        if abs(step) <= 1e-12 * spec.b:
            s0 = min(max(s0 + step, 0.0), spec.b)
    return float(s0)
