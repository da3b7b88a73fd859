"""Stationary scattering by slice composition.

The potential support is cut into piecewise-constant layers. Inside each
layer the solutions are exact plane (or evanescent) waves; layers are joined
with the Redheffer star product of 2x2 scattering matrices. Unlike a product
of transfer matrices, every quantity carried through the composition stays
bounded, so opaque barriers keep full relative accuracy.

Transmission magnitudes are carried as a unit-modulus factor times a
separate real log-scale. This keeps the phase of a deeply tunnelling
amplitude exact even when its modulus is far below double precision.

Phase convention: all amplitudes are referenced to plane waves
``exp(+-i k x)`` centred on ``x = 0``. For incidence from the left::

    psi(x) = exp(i k x) + L exp(-i k x)   (left of the support)
    psi(x) = T exp(i k x)                 (right of the support)

and ``R`` is the reflection amplitude for incidence from the right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PhysicsDomainError, UndefinedPhaseError
from .potential import BarrierSpec, NATURAL_UNITS, TransitionProfile, UnitSystem, evaluate_potential

TOL_UNITARITY = 1e-8
TOL_PHASE = 1e-8
UNDERFLOW_MODULUS = 1e-280
Q_FLOOR = 1e-6


@dataclass(frozen=True)
class SliceDiscretization:
    """Number of slices per transition region over the support ``[x_min, x_max]``."""

    n_slices: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.n_slices < 2:
            raise PhysicsDomainError(f"n_slices must be >= 2, got {self.n_slices}")
        if not self.x_max > self.x_min:
            raise PhysicsDomainError("empty slice interval")

    @classmethod
    def uniform(cls, spec: BarrierSpec, n_slices: int) -> "SliceDiscretization":
        return cls(int(n_slices), -spec.half_support, spec.half_support)

    @classmethod
    def default(cls, spec: BarrierSpec, E_max: float, units: UnitSystem = NATURAL_UNITS):
        """Slices no wider than ``min(lambda / 20, b / 64)`` at the highest energy."""
        return cls.uniform(spec, default_slice_count(spec, E_max, units))


def default_slice_count(spec: BarrierSpec, E_max: float, units: UnitSystem = NATURAL_UNITS) -> int:
    if spec.b == 0:
        return 2
    lam = float(units.wavelength(E_max))
    width = min(lam / 20.0, spec.b / 64.0)
    return max(64, int(math.ceil(spec.b / width - 1e-9)))


@dataclass(frozen=True)
class EnergyGrid:
    energies: tuple

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or e.size == 0:
            raise PhysicsDomainError("energy grid must be a non-empty 1D sequence")
        if np.any(e <= 0):
            raise PhysicsDomainError("energy grid entries must be positive")
        if np.any(np.diff(e) <= 0):
            raise PhysicsDomainError("energy grid must be strictly increasing")
        object.__setattr__(self, "energies", tuple(float(v) for v in e))

    @classmethod
    def linspace(cls, e_min: float, e_max: float, n: int) -> "EnergyGrid":
        return cls(tuple(np.linspace(e_min, e_max, n)))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.energies)

    def __len__(self):
        return len(self.energies)


@dataclass(frozen=True)
class LayerStack:
    """Piecewise-constant potential: consecutive layers starting at ``x_left``."""

    x_left: float
    widths: np.ndarray
    potentials: np.ndarray

    @property
    def x_right(self) -> float:
        return self.x_left + float(np.sum(self.widths))

    def mirrored(self) -> "LayerStack":
        return LayerStack(-self.x_right, self.widths[::-1].copy(), self.potentials[::-1].copy())

    @classmethod
    def from_barrier(cls, spec: BarrierSpec, n_slices: int) -> "LayerStack":
        """Uniform midpoint slices in each ramp, the plateau as one exact layer."""
        if spec.b == 0:
            return cls(-spec.a, np.array([2.0 * spec.a]), np.array([spec.v0]))
        w = spec.b / n_slices
        mids = spec.a + (np.arange(n_slices) + 0.5) * w
        ramp = evaluate_potential(spec, mids)
        widths = np.concatenate([np.full(n_slices, w), [2.0 * spec.a], np.full(n_slices, w)])
        pots = np.concatenate([ramp[::-1], [spec.v0], ramp])
        return cls(-spec.half_support, widths, pots)


@dataclass(frozen=True)
class AsymmetricBarrier:
    """Plateau ``[-a, a]`` with independent left and right transition regions."""

    v0: float
    a: float
    b_left: float
    b_right: float
    profile_left: TransitionProfile = TransitionProfile.LINEAR
    profile_right: TransitionProfile = TransitionProfile.LINEAR

    def stack(self, n_slices: int) -> LayerStack:
        left = _ramp_layers(self.v0, self.a, self.b_left, self.profile_left, n_slices)
        right = _ramp_layers(self.v0, self.a, self.b_right, self.profile_right, n_slices)
        widths = np.concatenate([left[0][::-1], [2.0 * self.a], right[0]])
        pots = np.concatenate([left[1][::-1], [self.v0], right[1]])
        return LayerStack(-self.a - self.b_left, widths, pots)


def _ramp_layers(v0, a, b, profile, n):
    if b == 0:
        return np.empty(0), np.empty(0)
    spec = BarrierSpec(v0, a, b, profile)
    w = b / n
    mids = a + (np.arange(n) + 0.5) * w
    return np.full(n, w), evaluate_potential(spec, mids)


@dataclass(frozen=True)
class ScatteringAmplitudes:
    """On-shell amplitudes at one energy.

    ``log_abs_T`` and ``edge_phase_T`` describe the transmission amplitude
    referenced to the support edges, ``t_edge = exp(log_abs_T + i edge_phase_T)``,
    which stays meaningful when ``T`` itself underflows. ``edge_shift`` is the
    free phase ``k * (x_right - x_left)`` across the support, so that
    ``arg T = edge_phase_T - edge_shift`` (mod 2 pi).
    """

    E: float
    T: complex
    L: complex
    R: complex
    log_abs_T: float = float("nan")
    edge_phase_T: float = float("nan")
    edge_shift: float = float("nan")
    flags: tuple = ()
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def transmission_probability(self) -> float:
        return math.exp(2.0 * self.log_abs_T) if self.ok else float("nan")

    @property
    def reflection_probability(self) -> float:
        return abs(self.L) ** 2

    @property
    def unitarity_residual(self) -> float:
        t2 = abs(self.T) ** 2
        return max(
            abs(t2 + abs(self.L) ** 2 - 1.0),
            abs(t2 + abs(self.R) ** 2 - 1.0),
            abs(abs(self.L) - abs(self.R)),
        )

    @property
    def phases(self) -> tuple[float, float, float]:
        return (float(np.angle(self.T)), float(np.angle(self.L)), float(np.angle(self.R)))

    def matrix(self) -> np.ndarray:
        """The on-shell S-matrix ``[[T, R], [L, T]]``."""
        return np.array([[self.T, self.R], [self.L, self.T]])


def _wavenumbers(E, potentials, units):
    """Layer wavenumbers with ``Im q >= 0``; shape ``(n_layers, n_E)``."""
    q = np.sqrt(2.0 * units.mass * (E[None, :] - potentials[:, None]) + 0j) / units.hbar
    # |q| below ~eps^(1/3) k loses digits to cancellation; a tiny evanescent q is exact to O((q w)^2)
    floor = Q_FLOOR * np.sqrt(2.0 * units.mass * E) / units.hbar
    tiny = np.abs(q) < floor[None, :]
    if np.any(tiny):
        q = np.where(tiny, 1j * np.broadcast_to(floor, q.shape), q)
    return q


def solve_stack(stack: LayerStack, E, units: UnitSystem = NATURAL_UNITS) -> dict:
    """Edge-referenced scattering data of a layer stack for an array of energies.

    Returns a dict of arrays: ``t_hat`` (unit-scale transmission factor),
    ``log_scale`` (so that ``t = t_hat * exp(log_scale)``), ``r`` and ``rp``
    (reflection from the left and right, referenced at the outer edges) and
    ``k``.
    """
    E = np.atleast_1d(np.asarray(E, dtype=float))
    k = np.sqrt(2.0 * units.mass * E) / units.hbar + 0j
    q = _wavenumbers(E, stack.potentials, units)
    n_layers = q.shape[0]

    ones = np.ones_like(k)
    t_hat = ones.copy()
    tp_hat = ones.copy()
    r = np.zeros_like(k)
    rp = np.zeros_like(k)
    log_scale = np.zeros(E.shape)

    left = k
    for j in range(n_layers + 1):
        right = q[j] if j < n_layers else k
        # interface left -> right, then star-compose
        s = left + right
        ri = (left - right) / s
        ti = 2.0 * left / s
        rpi = (right - left) / s
        tpi = 2.0 * right / s
        D = 1.0 / (1.0 - rp * ri)
        r = r + tp_hat * t_hat * np.exp(2.0 * log_scale) * ri * D
        rp = rpi + ti * rp * D * tpi
        t_hat = ti * D * t_hat
        tp_hat = tp_hat * D * tpi
        if j == n_layers:
            break
        # homogeneous propagation through layer j
        w = stack.widths[j]
        qj = q[j]
        phase = np.exp(1j * qj.real * w)
        log_scale = log_scale - qj.imag * w
        t_hat = t_hat * phase
        tp_hat = tp_hat * phase
        rp = rp * np.exp(2j * qj * w)
        left = qj

    return {"k": k.real, "t_hat": t_hat, "tp_hat": tp_hat, "log_scale": log_scale, "r": r, "rp": rp}


def _amplitudes_from_stack(stack: LayerStack, E, units, coarse=None) -> list[ScatteringAmplitudes]:
    data = solve_stack(stack, E, units)
    k = data["k"]
    xl, xr = stack.x_left, stack.x_right
    shift = np.exp(1j * k * (xl - xr))
    mag = np.exp(data["log_scale"])
    T = data["t_hat"] * mag * shift
    L = data["r"] * np.exp(2j * k * xl)
    R = data["rp"] * np.exp(-2j * k * xr)
    log_abs = np.log(np.abs(data["t_hat"])) + data["log_scale"]
    edge_phase = np.angle(data["t_hat"])
    out = []
    for i, e in enumerate(np.atleast_1d(E)):
        flags = []
        if coarse is not None and coarse[i]:
            flags.append("coarse_slicing")
        amp = ScatteringAmplitudes(
            float(e), complex(T[i]), complex(L[i]), complex(R[i]),
            float(log_abs[i]), float(edge_phase[i]), float(k[i] * (xr - xl)),
        )
        if amp.unitarity_residual > TOL_UNITARITY:
            flags.append("unitarity")
        if abs(T[i]) == 0.0:
            flags.append("underflow")
        if flags:
            amp = ScatteringAmplitudes(**{**amp.__dict__, "flags": tuple(flags)})
        out.append(amp)
    return out


def _coarse_flags(spec: BarrierSpec, n_slices: int, E, units) -> np.ndarray:
    E = np.atleast_1d(E)
    if spec.b == 0:
        return np.zeros(E.shape, dtype=bool)
    return np.array([n_slices < default_slice_count(spec, e, units) for e in E])


def scattering_matrix(
    spec: BarrierSpec,
    E: float,
    units: UnitSystem = NATURAL_UNITS,
    disc: SliceDiscretization | None = None,
) -> ScatteringAmplitudes:
    """Amplitudes ``T, L, R`` of ``spec`` at energy ``E``.

    Raises
    ------
    PhysicsDomainError
        If ``E <= 0``.
    """
    if not E > 0:
        raise PhysicsDomainError(f"energy must be positive, got {E}")
    return scattering_batch(spec, np.array([float(E)]), units, disc)[0]


def scattering_batch(spec: BarrierSpec, energies, units: UnitSystem = NATURAL_UNITS,
                     disc: SliceDiscretization | None = None) -> list[ScatteringAmplitudes]:
    """Vectorised :func:`scattering_matrix` over positive energies."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    if np.any(energies <= 0):
        raise PhysicsDomainError("energies must be positive")
    if disc is None:
        disc = SliceDiscretization.default(spec, float(energies.max()), units)
    stack = LayerStack.from_barrier(spec, disc.n_slices)
    return _amplitudes_from_stack(stack, energies, units, _coarse_flags(spec, disc.n_slices, energies, units))


def stack_amplitudes(stack: LayerStack, energies, units: UnitSystem = NATURAL_UNITS) -> list[ScatteringAmplitudes]:
    """Amplitudes of an arbitrary layer stack (no slicing-adequacy flags)."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    if np.any(energies <= 0):
        raise PhysicsDomainError("energies must be positive")
    return _amplitudes_from_stack(stack, energies, units)


def two_sided_amplitudes(stack: LayerStack, energies, units: UnitSystem = NATURAL_UNITS) -> list[ScatteringAmplitudes]:
    """Amplitudes of a possibly asymmetric stack from two independent runs.

    ``T`` and ``L`` come from left incidence on ``stack``; ``R`` is the left
    reflection of the mirrored stack, which is right incidence on the original.
    """
    direct = stack_amplitudes(stack, energies, units)
    mirror = stack_amplitudes(stack.mirrored(), energies, units)
    return [
        ScatteringAmplitudes(d.E, d.T, d.L, m.L, d.log_abs_T, d.edge_phase_T, d.edge_shift, d.flags, d.error)
        for d, m in zip(direct, mirror)
    ]


def amplitude_over_grid(
    spec: BarrierSpec,
    grid: EnergyGrid | Sequence[float],
    units: UnitSystem = NATURAL_UNITS,
    disc: SliceDiscretization | None = None,
) -> list[ScatteringAmplitudes]:
    """One amplitude record per grid energy, in grid order.

    A bad entry (non-positive energy) yields a record with ``error`` set and
    NaN amplitudes; the rest of the grid is still computed.
    """
    energies = np.asarray(grid.energies if isinstance(grid, EnergyGrid) else grid, dtype=float)
    good = energies > 0
    out: list[ScatteringAmplitudes | None] = [None] * energies.size
    if np.any(good):
        for i, amp in zip(np.flatnonzero(good), scattering_batch(spec, energies[good], units, disc)):
            out[i] = amp
    nan = complex(float("nan"), float("nan"))
    for i in np.flatnonzero(~good):
        out[i] = ScatteringAmplitudes(float(energies[i]), nan, nan, nan,
                                      error=f"energy must be positive, got {energies[i]}")
    return out


def check_phase_relation(amps: ScatteringAmplitudes) -> float:
    """Residual of ``arg T + pi/2 - (arg L + arg R)/2``, reduced mod pi into (-pi/2, pi/2].

    Raises
    ------
    UndefinedPhaseError
        If any amplitude modulus is at or below the underflow threshold.
    """
    for name, z in (("T", amps.T), ("L", amps.L), ("R", amps.R)):
        if not abs(z) > UNDERFLOW_MODULUS:
            raise UndefinedPhaseError(f"|{name}| = {abs(z):.3g} has no defined phase")
    aT, aL, aR = amps.phases
    theta = 2.0 * aT + math.pi - aL - aR
    theta = math.remainder(theta, 2.0 * math.pi)
    if theta == -math.pi:
        theta = math.pi
    return 0.5 * theta


def convergence_study(
    spec: BarrierSpec, E: float, units: UnitSystem = NATURAL_UNITS, n_list: Sequence[int] = (64, 128, 256, 512)
) -> list[tuple[int, float]]:
    """``|T|^2`` at energy ``E`` for each slice count in ``n_list``."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    return [
        (n, scattering_matrix(spec, E, units, SliceDiscretization.uniform(spec, n)).transmission_probability)
        for n in n_list
    ]
