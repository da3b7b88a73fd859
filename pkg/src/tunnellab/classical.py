"""Classical reflection delay of the plateau barrier and its semiclassical comparison.

A classical particle with ``E < v0`` enters the left transition region,
turns at depth ``s0`` and comes back. Relative to a free particle crossing
the whole support, its delay splits into a transition bracket and a plateau
bracket::

    tau_cl = [2 * int_{s0}^{b} ds / v(s) - 2 b / v] + [0 - 2 a / v]

The integrand has an inverse square-root singularity at the turning point.
It is written in terms of the distance ``delta`` from the turning point with a
cancellation-free divided difference of the profile, and integrated with
tanh-sinh quadrature, which absorbs the endpoint singularity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import tanhsinh

from .delays import onshell_delays
from .errors import ForbiddenRegionError, NotReflectedError, PhysicsDomainError
from .potential import (
    NATURAL_UNITS,
    BarrierSpec,
    UnitSystem,
    _profile_unchecked,
    profile_drop_slope,
    turning_point,
)

TOL_QUAD = 1e-10
SEMICLASSICAL_MAX_LAMBDA_OVER_B = 0.1


@dataclass(frozen=True)
class ClassicalDelayResult:
    E: float
    tau_cl: float
    transition_term: float
    plateau_term: float
    s0: float
    quadrature_error: float = 0.0


@dataclass(frozen=True)
class SemiclassicalRecord:
    E: float
    tau_quantum: float
    tau_classical: float
    lambda_over_b: float
    in_semiclassical_regime: bool

    @property
    def relative_discrepancy(self) -> float:
        return abs(self.tau_quantum - self.tau_classical) / abs(self.tau_classical)


def _check_energy(spec: BarrierSpec, E: float):
    if not E > 0:
        raise PhysicsDomainError(f"energy must be positive, got {E}")
    if E >= spec.v0:
        raise NotReflectedError(f"E={E} >= v0={spec.v0}: the classical particle is not reflected")


def classical_speed(spec: BarrierSpec, E: float, s, units: UnitSystem = NATURAL_UNITS):
    """Speed ``sqrt(2 (E - v0 h(-s)) / m)`` at position ``s`` in ``[-b, -s0]``.

    ``s`` is measured from the plateau edge, negative towards the incoming
    side. The speed vanishes exactly at the turning point ``s = -s0``.
    """
    _check_energy(spec, E)
    s0 = turning_point(spec, E)
    s_arr = np.asarray(s, dtype=float)
    depth = -s_arr
    if np.any(depth < s0) or np.any(depth > spec.b):
        raise ForbiddenRegionError(f"s outside the classically allowed range [-{spec.b}, -{s0}]")
    delta = depth - s0
    if spec.b == 0:
        ke = np.full_like(s_arr, E)
    else:
        residual = E - spec.v0 * _profile_unchecked(spec.profile, s0, spec.b)
        ke = residual + spec.v0 * profile_drop_slope(spec.profile, s0, delta, spec.b) * delta
        ke = np.where(delta == 0.0, 0.0, np.maximum(ke, 0.0))
    out = np.sqrt(2.0 * ke / units.mass)
    return float(out) if out.ndim == 0 else out


def classical_reflection_delay(spec: BarrierSpec, E: float, units: UnitSystem = NATURAL_UNITS) -> ClassicalDelayResult:
    """Classical reflection delay for ``0 < E < v0``.

    Raises
    ------
    NotReflectedError
        If ``E >= v0``.
    PhysicsDomainError
        If ``E <= 0``.
    """
    _check_energy(spec, E)
    v = math.sqrt(2.0 * E / units.mass)
    plateau_term = 0.0 - 2.0 * spec.a / v
    if spec.b == 0:
        return ClassicalDelayResult(E, 0.0 + plateau_term, 0.0, plateau_term, 0.0)

    s0 = turning_point(spec, E)
    span = spec.b - s0
    c = 2.0 * spec.v0 / units.mass

    def inverse_speed(delta):
        return 1.0 / np.sqrt(c * profile_drop_slope(spec.profile, s0, delta, spec.b) * delta)

    res = tanhsinh(inverse_speed, 0.0, span, atol=1e-14, rtol=1e-14, maxlevel=14)
    if not (res.success or res.error <= TOL_QUAD / 4):
        raise PhysicsDomainError(f"transition quadrature did not converge (error {res.error:.2e})")
    transition_term = 2.0 * float(res.integral) - 2.0 * spec.b / v
    return ClassicalDelayResult(
        E=E,
        tau_cl=transition_term + plateau_term,
        transition_term=transition_term,
        plateau_term=plateau_term,
        s0=s0,
        quadrature_error=2.0 * float(res.error),
    )


def semiclassical_comparison(spec: BarrierSpec, E: float, units: UnitSystem = NATURAL_UNITS) -> SemiclassicalRecord:
    """Quantum left-reflection delay next to the classical delay at the same ``E``.

    The comparison is flagged as outside the semiclassical regime unless the
    incoming wavelength is small against the transition width,
    ``lambda / b <= 0.1``; a sharp wall (``b = 0``) never qualifies.
    """
    _check_energy(spec, E)
    lam = float(units.wavelength(E))
    ratio = lam / spec.b if spec.b > 0 else math.inf
    quantum = onshell_delays(spec, E, units)
    classical = classical_reflection_delay(spec, E, units)
    return SemiclassicalRecord(
        E=E,
        tau_quantum=float(quantum.tau_left),
        tau_classical=classical.tau_cl,
        lambda_over_b=ratio,
        in_semiclassical_regime=ratio <= SEMICLASSICAL_MAX_LAMBDA_OVER_B,
    )


def rescaled_for_wavelength_ratio(spec: BarrierSpec, E: float, ratio: float, units: UnitSystem = NATURAL_UNITS) -> BarrierSpec:
    """Scale ``a`` and ``b`` together so that ``lambda / b`` equals ``ratio``."""
    if spec.b == 0:
        raise PhysicsDomainError("cannot rescale a sharp wall to a wavelength ratio")
    b_new = float(units.wavelength(E)) / ratio
    return spec.replace(a=spec.a * b_new / spec.b, b=b_new)
