"""Closed-form reference results used to validate the numerical solvers.

These formulas share no code with the slice solver or the quadrature path,
so agreement between the two is a genuine check.
"""
from __future__ import annotations

import numpy as np

from .potential import UnitSystem, NATURAL_UNITS


def rectangular_amplitudes(v0: float, a: float, E, units: UnitSystem = NATURAL_UNITS):
    """Textbook amplitudes ``(T, L, R)`` of the square barrier on ``[-a, a]``.

    Phases are referenced to plane waves centred on ``x = 0``. Valid above and
    below the barrier top (the interior wavenumber is complex below it).
    """
    E = np.asarray(E, dtype=float)
    k = np.sqrt(2.0 * units.mass * E) / units.hbar
    q = np.sqrt(2.0 * units.mass * (E - v0) + 0j) / units.hbar
    d = 2.0 * a
    den = np.cos(q * d) - 1j * (k * k + q * q) / (2.0 * k * q) * np.sin(q * d)
    shift = np.exp(-1j * k * d)
    T = shift / den
    L = shift * 1j * (q * q - k * k) / (2.0 * k * q) * np.sin(q * d) / den
    return T, L, L.copy()


def rectangular_transmission_probability(v0: float, a: float, E, units: UnitSystem = NATURAL_UNITS):
    """``|T|^2`` of the square barrier from the standard sinh / sin formula."""
    E = np.asarray(E, dtype=float)
    d = 2.0 * a
    below = E < v0
    out = np.empty_like(E)
    kap = np.sqrt(np.abs(2.0 * units.mass * (v0 - E))) / units.hbar
    ratio = v0 * v0 / (4.0 * E * np.abs(v0 - E))
    out[below] = 1.0 / (1.0 + ratio[below] * np.sinh(kap[below] * d) ** 2)
    out[~below] = 1.0 / (1.0 + ratio[~below] * np.sin(kap[~below] * d) ** 2)
    return out


def rectangular_phase_time_saturation(v0: float, E: float, units: UnitSystem = NATURAL_UNITS) -> float:
    """Large-width limit of the edge-to-edge transmission time, ``2 m / (hbar k kappa)``."""
    k = np.sqrt(2.0 * units.mass * E) / units.hbar
    kap = np.sqrt(2.0 * units.mass * (v0 - E)) / units.hbar
    return float(2.0 * units.mass / (units.hbar * k * kap))


def linear_ramp_transition_term(v0: float, b: float, E: float, units: UnitSystem = NATURAL_UNITS) -> float:
    """Transition-region delay for the linear ramp, integrated by hand.

    Under the constant force ``v0 / b`` the particle decelerates to rest in
    time ``m v b / v0`` and comes back, so the bracket is
    ``2 m v b / v0 - 2 b / v``.
    """
    v = np.sqrt(2.0 * E / units.mass)
    return float(2.0 * units.mass * v * b / v0 - 2.0 * b / v)
