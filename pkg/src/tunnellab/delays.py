"""Phase-time delays, the transmission/reflection delay identity, Hartman sweeps.

A delay is ``hbar`` times the energy derivative of an amplitude phase. The
derivative is a 5-point central difference on step ``h`` and ``2h`` combined
by one Richardson step; their disagreement is the error estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridTooCoarseError, PhysicsDomainError
from .potential import BarrierSpec, NATURAL_UNITS, UnitSystem
from .scattering import (
    UNDERFLOW_MODULUS,
    EnergyGrid,
    LayerStack,
    ScatteringAmplitudes,
    SliceDiscretization,
    scattering_batch,
    two_sided_amplitudes,
)

TOL_DELAY = 1e-6
RELATIVE_STEP = 1e-3
REFINEMENTS = 3
_EPS = np.finfo(float).eps
_C5 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


@dataclass(frozen=True)
class PhaseCurve:
    """Unwrapped phases of ``T``, ``L``, ``R`` on an energy grid.

    A reflection phase is ``None`` when the amplitude vanishes somewhere on
    the grid (no reflection, no phase).
    """

    energies: EnergyGrid
    alpha_T: np.ndarray
    alpha_L: np.ndarray | None
    alpha_R: np.ndarray | None
    edge_alpha_T: np.ndarray | None = None

    def shifted(self, offset: float) -> "PhaseCurve":
        def sh(a):
            return None if a is None else a + offset

        return PhaseCurve(self.energies, sh(self.alpha_T), sh(self.alpha_L), sh(self.alpha_R), sh(self.edge_alpha_T))


@dataclass(frozen=True)
class TimeDelaySet:
    E: float
    tau_tr: float
    tau_left: float | None
    tau_right: float | None
    derivative_error_estimate: float
    flags: tuple = ()


@dataclass(frozen=True)
class HartmanRow:
    a: float
    tau_tr: float
    dwell_T_tr: float
    v_eff: float
    v: float
    absT2: float
    derivative_error_estimate: float = float("nan")
    flags: tuple = ()


def _unwrap(phases: np.ndarray, label: str) -> np.ndarray:
    out = np.unwrap(phases)
    if out.size > 1 and np.max(np.abs(np.diff(out))) >= math.pi:
        raise GridTooCoarseError(f"{label}: phase jump >= pi between grid neighbours")
    if out.size > 2 and np.max(np.abs(np.diff(out, 2))) >= math.pi:
        raise GridTooCoarseError(f"{label}: phase slope changes by >= pi between neighbours")
    return out


def unwrap_phases(amps: Sequence[ScatteringAmplitudes]) -> PhaseCurve:
    """Continuous phase curves from amplitude records ordered by energy.

    Raises
    ------
    GridTooCoarseError
        If neighbouring phases cannot be joined unambiguously.
    """
    bad = [a.E for a in amps if not a.ok]
    if bad:
        raise PhysicsDomainError(f"amplitude records with errors at E={bad}")
    grid = EnergyGrid(tuple(a.E for a in amps))
    T = np.array([a.T for a in amps])
    L = np.array([a.L for a in amps])
    R = np.array([a.R for a in amps])

    def phase_or_none(z, label):
        if np.any(np.abs(z) <= UNDERFLOW_MODULUS):
            return None
        return _unwrap(np.angle(z), label)

    edge = np.array([a.edge_phase_T for a in amps])
    shift = np.array([a.edge_shift for a in amps])
    if np.any(np.isnan(edge)) or np.any(np.isnan(shift)):
        # records built by hand: only the x = 0 phase is available
        if np.any(np.abs(T) <= UNDERFLOW_MODULUS):
            raise PhysicsDomainError("transmission amplitude vanishes; no transmission phase")
        edge_alpha = None
        alpha_T = _unwrap(np.angle(T), "T")
    else:
        edge_alpha = _unwrap(edge, "edge T")
        alpha_T = edge_alpha - shift
    return PhaseCurve(grid, alpha_T, phase_or_none(L, "L"), phase_or_none(R, "R"), edge_alpha)


def _richardson(f: np.ndarray, i: int, h: float):
    """Derivative at node ``i`` of uniformly spaced samples ``f`` (spacing ``h``)."""
    n = f.size
    if i - 4 >= 0 and i + 4 < n:
        d1 = np.dot(_C5, f[i - 2:i + 3]) / h
        d2 = np.dot(_C5, f[i - 4:i + 5:2]) / (2.0 * h)
        best = (16.0 * d1 - d2) / 15.0
        scale = np.max(np.abs(f[i - 4:i + 5]))
        err = abs(best - d1) + 4.0 * _EPS * scale / h
        return best, err, ()
    # shifted window near a grid edge: derivative of the interpolating quartic
    if n < 5:
        raise PhysicsDomainError("need at least 5 grid points for a derivative")
    lo = min(max(i - 2, 0), n - 5)
    x = np.arange(lo, lo + 5) - i
    c = np.polyfit(x, f[lo:lo + 5], 4)
    d1 = np.polyval(np.polyder(c), 0.0) / h
    lo3 = min(max(i - 1, 0), n - 3)
    x3 = np.arange(lo3, lo3 + 3) - i
    c3 = np.polyfit(x3, f[lo3:lo3 + 3], 2)
    d_low = np.polyval(np.polyder(c3), 0.0) / h
    scale = np.max(np.abs(f[lo:lo + 5]))
    err = abs(d1 - d_low) + 16.0 * _EPS * scale / h
    return d1, err, ("one_sided",)


def _node_index(grid: EnergyGrid, E: float) -> tuple[int, float]:
    e = grid.array
    i = int(np.argmin(np.abs(e - E)))
    if abs(e[i] - E) > 1e-9 * max(abs(E), 1.0):
        raise PhysicsDomainError(f"E={E} is not a node of the phase grid")
    lo, hi = max(i - 4, 0), min(i + 5, e.size)
    steps = np.diff(e[lo:hi])
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-6 * h:
        raise PhysicsDomainError("phase grid must be uniform around the evaluation node")
    return i, h


def delays_at(curve: PhaseCurve, E: float, units: UnitSystem = NATURAL_UNITS) -> TimeDelaySet:
    """Transmission and reflection delays at grid node ``E``.

    Absent reflection phases give ``None`` delays and an ``absent_*`` flag;
    nodes too close to the grid edge use a shifted stencil and carry the
    ``one_sided`` flag.
    """
    i, h = _node_index(curve.energies, E)
    hb = units.hbar
    flags: list[str] = []
    tau_tr, err, fl = _richardson(curve.alpha_T, i, h)
    flags.extend(fl)
    taus = {}
    for name, alpha in (("left", curve.alpha_L), ("right", curve.alpha_R)):
        if alpha is None:
            taus[name] = None
            flags.append(f"absent_{name}")
            continue
        d, e, _ = _richardson(alpha, i, h)
        taus[name] = hb * d
        err = max(err, e)
    return TimeDelaySet(
        float(curve.energies.energies[i]),
        float(hb * tau_tr),
        None if taus["left"] is None else float(taus["left"]),
        None if taus["right"] is None else float(taus["right"]),
        float(hb * err),
        tuple(dict.fromkeys(flags)),
    )


def stencil_grid(E: float, h: float | None = None) -> EnergyGrid:
    """Nine uniformly spaced energies centred on ``E`` with spacing ``h``."""
    if not E > 0:
        raise PhysicsDomainError(f"energy must be positive, got {E}")
    h = RELATIVE_STEP * E if h is None else min(h, RELATIVE_STEP * E)
    return EnergyGrid(tuple(E + h * np.arange(-4, 5)))


def _with_refinement(E: float, h: float | None, amplitudes) -> TimeDelaySet:
    """Evaluate on a stencil, shrinking the step while the derivative is unresolved.

    Near a reflection zero the reflection phase turns by ``pi`` over a tiny
    energy interval; a smaller stencil resolves it. The step shrinks by 4
    until the error estimate drops below ``TOL_DELAY`` (relative to the
    largest delay); otherwise the best attempt is returned.
    """
    h0 = RELATIVE_STEP * E if h is None else min(h, RELATIVE_STEP * E)
    best = None
    failure = None
    for j in range(REFINEMENTS + 1):
        grid = stencil_grid(E, h0 / 4.0**j)
        try:
            d = delays_at(unwrap_phases(amplitudes(grid)), grid.energies[4])
        except GridTooCoarseError as exc:
            failure = exc
            continue
        if j:
            d = TimeDelaySet(d.E, d.tau_tr, d.tau_left, d.tau_right, d.derivative_error_estimate,
                             d.flags + (f"step_refined_{j}",))
        if best is None or d.derivative_error_estimate < best.derivative_error_estimate:
            best = d
        scale = max([1.0] + [abs(t) for t in (d.tau_tr, d.tau_left, d.tau_right) if t is not None])
        if d.derivative_error_estimate <= TOL_DELAY * scale:
            break
    if best is None:
        raise failure
    return best


def onshell_delays(
    spec: BarrierSpec,
    E: float,
    units: UnitSystem = NATURAL_UNITS,
    disc: SliceDiscretization | None = None,
    h: float | None = None,
) -> TimeDelaySet:
    """Delays of a symmetric barrier at ``E`` from a local stencil of amplitudes."""
    if disc is None:
        disc = SliceDiscretization.default(spec, E * (1.0 + 4.0 * RELATIVE_STEP), units)

    def amplitudes(grid):
        return scattering_batch(spec, grid.array, units, disc)

    return _scaled(_with_refinement(E, h, amplitudes), units)


def two_sided_delays(stack: LayerStack, E: float, units: UnitSystem = NATURAL_UNITS, h: float | None = None) -> TimeDelaySet:
    """Delays of an arbitrary (possibly asymmetric) stack; ``R`` from a mirrored run."""
    return _scaled(_with_refinement(E, h, lambda grid: two_sided_amplitudes(stack, grid.array, units)), units)


def _scaled(d: TimeDelaySet, units: UnitSystem) -> TimeDelaySet:
    if units.hbar == 1.0:
        return d
    hb = units.hbar

    def sc(x):
        return None if x is None else hb * x

    return TimeDelaySet(d.E, hb * d.tau_tr, sc(d.tau_left), sc(d.tau_right), hb * d.derivative_error_estimate, d.flags)


def verify_delay_identity(delays: TimeDelaySet) -> float | None:
    """``tau_tr - (tau_left + tau_right) / 2``; ``None`` if a reflection delay is absent."""
    if delays.tau_left is None or delays.tau_right is None:
        return None
    return delays.tau_tr - 0.5 * (delays.tau_left + delays.tau_right)


def identity_tolerance(delays: TimeDelaySet, tol: float = TOL_DELAY) -> float:
    return max(tol, 3.0 * delays.derivative_error_estimate)


def hartman_row(spec: BarrierSpec, E: float, units: UnitSystem = NATURAL_UNITS,
                disc: SliceDiscretization | None = None) -> HartmanRow:
    """One point of a width sweep.

    The dwell time inside the support is ``hbar`` times the energy derivative
    of the edge-referenced transmission phase, which avoids subtracting two
    large numbers when the barrier is wide. ``tau_tr`` follows by removing
    the free crossing time ``2 (a + b) / v``.
    """
    grid = stencil_grid(E)
    if disc is None:
        disc = SliceDiscretization.default(spec, grid.energies[-1], units)
    amps = scattering_batch(spec, grid.array, units, disc)
    centre = amps[4]
    v = float(units.speed(E))
    width = 2.0 * spec.half_support
    if not np.isfinite(centre.log_abs_T):
        nan = float("nan")
        return HartmanRow(spec.a, nan, nan, nan, v, 0.0, nan, ("underflow",))
    edge = _unwrap(np.array([x.edge_phase_T for x in amps]), "edge T")
    d, err, flags = _richardson(edge, 4, grid.energies[1] - grid.energies[0])
    dwell = units.hbar * d
    return HartmanRow(
        a=spec.a,
        tau_tr=float(dwell - width / v),
        dwell_T_tr=float(dwell),
        v_eff=float(width / dwell),
        v=v,
        absT2=centre.transmission_probability,
        derivative_error_estimate=float(units.hbar * err),
        flags=tuple(flags) + centre.flags,
    )


def hartman_sweep(
    template: BarrierSpec,
    E: float,
    a_values: Sequence[float],
    units: UnitSystem = NATURAL_UNITS,
    disc_slices: int | None = None,
    executor=None,
) -> list[HartmanRow]:
    """Recompute the transmission delay for each plateau half-width in ``a_values``.

    Raises
    ------
    PhysicsDomainError
        Unless ``0 < E < v0`` and ``a_values`` is strictly increasing.
    """
    if not (0.0 < E < template.v0):
        raise PhysicsDomainError(f"Hartman sweep needs 0 < E < v0, got E={E}, v0={template.v0}")
    a_values = [float(a) for a in a_values]
    if any(b <= a for a, b in zip(a_values, a_values[1:])):
        raise PhysicsDomainError("a_values must be strictly increasing")

    def one(a):
        spec = template.replace(a=a)
        disc = None if disc_slices is None else SliceDiscretization.uniform(spec, disc_slices)
        return hartman_row(spec, E, units, disc)

    if executor is None:
        return [one(a) for a in a_values]
    return list(executor.map(one, a_values))
