"""Time-dependent scattering of Gaussian wave packets.

Packets are propagated with second-order (Strang) operator splitting on a
periodic grid: half a potential step, an exact kinetic step in Fourier
space, half a potential step. Every factor is a pure phase, so the scheme is
unitary up to rounding. There are no absorbing layers; the domain must be
large enough that nothing reaches the edges before the run ends.

On top of the propagator this module measures sojourn times in ``[-R, R]``,
splits the outgoing state by momentum sign into transmitted and reflected
branches, and estimates conditional delays two ways: by weighting the
on-shell phase-time delays with the packet spectrum, and by timing the
branch centroids against free reference packets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .delays import onshell_delays
from .errors import (
    DomainTooSmallError,
    IllConditionedError,
    IncompleteScatteringError,
    NoCrossingError,
    PhysicsDomainError,
    PlacementError,
    PrematureSplitError,
    StabilityError,
)
from .potential import NATURAL_UNITS, BarrierSpec, UnitSystem, evaluate_potential
from .scattering import SliceDiscretization, scattering_batch

TOL_PACKET = 0.05
NORM_DRIFT_LIMIT = 1e-8
EDGE_MASS_LIMIT = 1e-8
EDGE_FRACTION = 0.05
INITIAL_OVERLAP_LIMIT = 1e-12
NEGATIVE_MOMENTUM_LIMIT = 1e-10


@dataclass(frozen=True)
class WavePacketSpec:
    """Gaussian packet with position spread ``sigma`` (std of ``|psi|^2``)."""

    x0: float
    k0: float
    sigma: float

    def __post_init__(self):
        if not self.k0 > 0:
            raise PhysicsDomainError(f"k0 must be positive (incoming from the left), got {self.k0}")
        if not self.sigma > 0:
            raise PhysicsDomainError(f"sigma must be positive, got {self.sigma}")
        if self.negative_momentum_mass > NEGATIVE_MOMENTUM_LIMIT:
            raise PhysicsDomainError(
                f"momentum mass at k <= 0 is {self.negative_momentum_mass:.2e}; increase k0 * sigma"
            )

    @property
    def sigma_k(self) -> float:
        return 0.5 / self.sigma

    @property
    def negative_momentum_mass(self) -> float:
        return 0.5 * math.erfc(self.k0 / (self.sigma_k * math.sqrt(2.0)))

    def mass_right_of(self, x: float) -> float:
        return 0.5 * math.erfc((x - self.x0) / (self.sigma * math.sqrt(2.0)))

    def spectral_density(self, k):
        """Normalised ``|phi(k)|^2``."""
        k = np.asarray(k, dtype=float)
        sk = self.sigma_k
        return np.exp(-0.5 * ((k - self.k0) / sk) ** 2) / (sk * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class SimulationGrid:
    x_min: float
    x_max: float
    n_points: int
    dt: float
    t_max: float

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise PhysicsDomainError(f"n_points must be a power of two, got {n}")
        if not self.x_max > self.x_min:
            raise PhysicsDomainError("x_max must exceed x_min")
        if not (self.dt > 0 and self.t_max > 0):
            raise PhysicsDomainError("dt and t_max must be positive")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def k_max(self) -> float:
        return math.pi / self.dx

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass
class WavePacket:
    """Amplitude on the grid at time ``t``."""

    grid: SimulationGrid
    psi: np.ndarray
    t: float = 0.0

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def norm(self) -> float:
        return float(np.sum(self.density) * self.grid.dx)

    @property
    def centroid(self) -> float:
        rho = self.density
        return float(np.sum(self.grid.x * rho) / np.sum(rho))

    @property
    def width(self) -> float:
        rho = self.density
        m = np.sum(rho)
        c = np.sum(self.grid.x * rho) / m
        return float(math.sqrt(np.sum((self.grid.x - c) ** 2 * rho) / m))

    def momentum_image(self) -> np.ndarray:
        """``phi(k)`` on the FFT wavenumber grid, normalised so ``sum |phi|^2 dk = norm``."""
        g = self.grid
        phase = np.exp(-1j * g.k * g.x_min)
        return np.fft.fft(self.psi) * g.dx / math.sqrt(2.0 * math.pi) * phase

    def momentum_weights(self) -> np.ndarray:
        """Probability per FFT wavenumber bin."""
        spec = np.abs(np.fft.fft(self.psi)) ** 2
        return spec / spec.sum() * self.norm

    @property
    def mean_wavenumber(self) -> float:
        w = self.momentum_weights()
        return float(np.sum(self.grid.k * w) / np.sum(w))


def initialize_gaussian(spec: WavePacketSpec, grid: SimulationGrid, barrier: BarrierSpec | None = None) -> WavePacket:
    """Unit-norm Gaussian ``exp(-(x - x0)^2 / (4 sigma^2) + i k0 x)`` on ``grid``.

    Raises
    ------
    PlacementError
        If the packet overlaps the barrier support (mass > 1e-12 right of
        ``-a - b``) or is not well inside the grid.
    """
    if barrier is not None:
        edge = -barrier.half_support
        if spec.x0 > edge - 5.0 * spec.sigma or spec.mass_right_of(edge) > INITIAL_OVERLAP_LIMIT:
            raise PlacementError(
                f"packet at x0={spec.x0} overlaps the barrier edge {edge} (need ~7 sigma clearance)"
            )
    if spec.x0 - 8.0 * spec.sigma < grid.x_min or spec.x0 + 8.0 * spec.sigma > grid.x_max:
        raise PlacementError("packet does not fit inside the simulation grid")
    if grid.k_max < spec.k0 + 6.0 / spec.sigma:
        raise PhysicsDomainError("grid spacing does not resolve the packet spectrum")
    x = grid.x
    psi = np.exp(-((x - spec.x0) ** 2) / (4.0 * spec.sigma**2) + 1j * spec.k0 * x)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return WavePacket(grid, psi, 0.0)


@dataclass
class Trajectory:
    """Sampled history of one run.

    Densities are stored at every sample; full amplitudes only at the start
    and the end, which is all the analysis needs.
    """

    grid: SimulationGrid
    barrier: BarrierSpec | None
    units: UnitSystem
    times: np.ndarray
    densities: np.ndarray
    norms: np.ndarray
    initial: WavePacket
    final: WavePacket
    _free_densities: np.ndarray | None = field(default=None, repr=False)

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))

    def free_densities(self) -> np.ndarray:
        """Densities of the free evolution of the initial state at the sample times."""
        if self._free_densities is None:
            g = self.grid
            u = self.units
            phi = np.fft.fft(self.initial.psi)
            omega = u.hbar * g.k**2 / (2.0 * u.mass)
            out = np.empty_like(self.densities)
            for i, t in enumerate(self.times):
                out[i] = np.abs(np.fft.ifft(phi * np.exp(-1j * omega * t))) ** 2
            self._free_densities = out
        return self._free_densities


def _potential_on_grid(spec: BarrierSpec | None, grid: SimulationGrid) -> np.ndarray:
    if spec is None:
        return np.zeros(grid.n_points)
    return evaluate_potential(spec, grid.x)


def evolve(
    packet: WavePacket,
    spec: BarrierSpec | None,
    grid: SimulationGrid | None = None,
    units: UnitSystem = NATURAL_UNITS,
    sample_every: int = 50,
    n_steps: int | None = None,
    dt: float | None = None,
) -> Trajectory:
    """Propagate ``packet`` against barrier ``spec`` (``None`` for free motion).

    Runs ``grid.n_steps`` steps of size ``grid.dt`` unless overridden; a
    negative ``dt`` runs backwards in time.

    Raises
    ------
    StabilityError
        If the norm drifts by more than 1e-8.
    DomainTooSmallError
        If more than 1e-8 of the probability reaches the outer 5% of the grid
        on either side (it would wrap around the periodic domain).
    """
    grid = packet.grid if grid is None else grid
    dt = grid.dt if dt is None else dt
    n_steps = grid.n_steps if n_steps is None else n_steps
    V = _potential_on_grid(spec, grid)
    if abs(dt) * float(np.max(np.abs(V))) / units.hbar > 1.0:
        raise StabilityError("potential phase per step exceeds 1 rad; reduce dt")

    half = np.exp(-0.5j * V * dt / units.hbar)
    full = half * half
    kin = np.exp(-1j * units.hbar * grid.k**2 * dt / (2.0 * units.mass))
    n_edge = max(1, int(EDGE_FRACTION * grid.n_points))

    psi = packet.psi.astype(complex, copy=True)
    t0 = packet.t
    times = [t0]
    dens = [np.abs(psi) ** 2]
    norms = [float(np.sum(dens[0]) * grid.dx)]

    def check(rho):
        edge = (np.sum(rho[:n_edge]) + np.sum(rho[-n_edge:])) * grid.dx
        if edge > EDGE_MASS_LIMIT:
            raise DomainTooSmallError(f"{edge:.2e} of the probability reached the grid edges")

    check(dens[0])
    psi = psi * half
    for step in range(1, n_steps + 1):
        psi = np.fft.ifft(kin * np.fft.fft(psi))
        if step % sample_every == 0 or step == n_steps:
            psi = psi * half
            rho = np.abs(psi) ** 2
            nrm = float(np.sum(rho) * grid.dx)
            if abs(nrm - norms[0]) > NORM_DRIFT_LIMIT:
                raise StabilityError(f"norm drift {abs(nrm - norms[0]):.2e} at step {step}")
            check(rho)
            times.append(t0 + step * dt)
            dens.append(rho)
            norms.append(nrm)
            if step < n_steps:
                psi = psi * half
        else:
            psi = psi * full

    t_end = t0 + n_steps * dt
    return Trajectory(
        grid=grid,
        barrier=spec,
        units=units,
        times=np.array(times),
        densities=np.array(dens),
        norms=np.array(norms),
        initial=WavePacket(grid, packet.psi.copy(), t0),
        final=WavePacket(grid, psi, t_end),
    )


def free_gaussian_moments(spec: WavePacketSpec, t, units: UnitSystem = NATURAL_UNITS):
    """Analytic centroid and width of a freely spreading Gaussian at time ``t``."""
    t = np.asarray(t, dtype=float)
    centroid = spec.x0 + units.hbar * spec.k0 / units.mass * t
    width = spec.sigma * np.sqrt(1.0 + (units.hbar * t / (2.0 * units.mass * spec.sigma**2)) ** 2)
    return centroid, width


@dataclass(frozen=True)
class SojournRecord:
    R: float
    T_R_interacting: float
    T_R_free: float
    samples: tuple
    error_estimate: float = 0.0

    @property
    def delay(self) -> float:
        return self.T_R_interacting - self.T_R_free


def _region_weights(grid: SimulationGrid, R: float) -> np.ndarray:
    x = grid.x
    lo = np.maximum(x - 0.5 * grid.dx, -R)
    hi = np.minimum(x + 0.5 * grid.dx, R)
    return np.clip((hi - lo) / grid.dx, 0.0, 1.0)


def _time_integral(t, p):
    simp = integrate.simpson(p, x=t)
    trap = integrate.trapezoid(p, x=t)
    return float(simp), abs(float(simp) - float(trap))


def sojourn_time(trajectory: Trajectory, R: float, grid: SimulationGrid | None = None,
                 completeness: float = 1e-8) -> SojournRecord:
    """Time-integrated probability of presence in ``[-R, R]``, interacting and free.

    Raises
    ------
    IncompleteScatteringError
        If the probability in the region exceeds ``completeness`` at the first
        or last sample of either run.
    """
    grid = trajectory.grid if grid is None else grid
    if trajectory.barrier is not None and not R > trajectory.barrier.half_support:
        raise PhysicsDomainError("R must exceed the barrier half-support a + b")
    w = _region_weights(grid, R) * grid.dx
    p_int = trajectory.densities @ w
    p_free = trajectory.free_densities() @ w
    for name, p in (("interacting", p_int), ("free", p_free)):
        if p[-1] > completeness:
            raise IncompleteScatteringError(f"{name} run: P_R(t_max) = {p[-1]:.2e}; extend t_max")
        if p[0] > completeness:
            raise IncompleteScatteringError(f"{name} run: packet starts inside the region (P_R(0) = {p[0]:.2e})")
    t = trajectory.times
    T_int, e_int = _time_integral(t, p_int)
    T_free, e_free = _time_integral(t, p_free)
    tail = (p_int[0] + p_int[-1] + p_free[0] + p_free[-1]) * (t[-1] - t[0])
    # incident/reflected interference inside the region, damped by the spectrum width
    interference = 0.0
    if trajectory.barrier is not None:
        w = trajectory.initial.momentum_weights()
        k = grid.k
        k0 = float(np.sum(k * w) / np.sum(w))
        sk = float(np.sqrt(np.sum((k - k0) ** 2 * w) / np.sum(w)))
        u = trajectory.units
        E0 = float(u.energy(k0))
        interference = u.hbar / (2.0 * E0) * math.exp(-2.0 * (R * sk) ** 2)
    return SojournRecord(
        R=R,
        T_R_interacting=T_int,
        T_R_free=T_free,
        samples=tuple(zip(t.tolist(), p_int.tolist())),
        error_estimate=e_int + e_free + tail + interference,
    )


@dataclass(frozen=True)
class OutcomeProbabilities:
    P_tr: float
    P_re: float


def split_outcomes(final: WavePacket, spec: BarrierSpec | None = None, completeness: float = 1e-8):
    """Project the outgoing state onto positive and negative momenta.

    Returns ``(transmitted, reflected, probabilities)``.

    Raises
    ------
    PrematureSplitError
        If more than ``completeness`` of the probability is still inside the
        barrier support.
    """
    g = final.grid
    if spec is not None:
        inside = np.abs(g.x) <= spec.half_support
        mass = float(np.sum(final.density[inside]) * g.dx)
        if mass > completeness:
            raise PrematureSplitError(f"{mass:.2e} of the probability is still inside the barrier")
    phi = np.fft.fft(final.psi)
    k = g.k
    tr = WavePacket(g, np.fft.ifft(np.where(k > 0, phi, 0.0)), final.t)
    re = WavePacket(g, np.fft.ifft(np.where(k > 0, 0.0, phi)), final.t)
    total = tr.norm + re.norm
    return tr, re, OutcomeProbabilities(tr.norm / total, re.norm / total)


def _branch_kinematics(trajectory: Trajectory, branch: str):
    if branch not in ("transmitted", "reflected"):
        raise ValueError(f"branch must be 'transmitted' or 'reflected', got {branch!r}")
    final = trajectory.final
    u = trajectory.units
    tr, re, probs = split_outcomes(final, trajectory.barrier)
    packet = tr if branch == "transmitted" else re
    prob = probs.P_tr if branch == "transmitted" else probs.P_re
    if prob < 1e-6:
        raise IllConditionedError(f"{branch} probability {prob:.2e} too small for a centroid estimate")
    speed = abs(u.hbar * packet.mean_wavenumber / u.mass)
    return packet, speed


def centroid_arrival_time(trajectory: Trajectory, branch: str, reference_plane: float) -> float:
    """Time at which the branch centroid crosses ``reference_plane``.

    After the collision each branch moves freely, so its centroid is a
    straight line in time and is extrapolated back from the final state.

    Raises
    ------
    NoCrossingError
        If the crossing falls outside the run.
    """
    packet, v = _branch_kinematics(trajectory, branch)
    t0, tf = trajectory.initial.t, trajectory.final.t
    offset = reference_plane - packet.centroid
    t_cross = tf + (offset if branch == "transmitted" else -offset) / v
    if not (t0 <= t_cross <= tf):
        raise NoCrossingError(f"{branch} centroid does not cross x={reference_plane} during the run")
    return float(t_cross)


def centroid_delay_estimate(trajectory: Trajectory, branch: str, reference_plane: float) -> float:
    """Delay of a branch centroid at ``reference_plane`` against a free reference.

    The free reference has the branch's momentum distribution with the
    initial packet's phases; for the reflected branch it is mirrored through
    ``x = 0``. The delay is the difference of the two crossing times.

    Raises
    ------
    NoCrossingError
        If the branch centroid does not cross the plane within the run.
    """
    t_cross = centroid_arrival_time(trajectory, branch, reference_plane)
    packet, v = _branch_kinematics(trajectory, branch)
    g = packet.grid
    phi0 = np.fft.fft(trajectory.initial.psi)
    mod = np.abs(np.fft.fft(packet.psi))
    if branch == "reflected":
        mod = np.roll(mod[::-1], 1)  # k -> -k on the FFT grid
    x_ref0 = WavePacket(g, np.fft.ifft(mod * np.exp(1j * np.angle(phi0)))).centroid
    t0 = trajectory.initial.t
    if branch == "transmitted":
        t_ref = t0 + (reference_plane - x_ref0) / v
    else:
        t_ref = t0 + (-x_ref0 - reference_plane) / v
    return float(t_cross - t_ref)


def centroid_traversal_time(trajectory: Trajectory, entry_plane: float, exit_plane: float) -> float:
    """Transmitted centroid arrival at ``exit_plane`` minus the free reference arrival at ``entry_plane``.

    Both crossings use the transmitted branch's own mean speed, so the
    momentum filtering by the barrier does not leak into the result through
    the free flight before the barrier.
    """
    _, v = _branch_kinematics(trajectory, "transmitted")
    delay = centroid_delay_estimate(trajectory, "transmitted", exit_plane)
    return float(delay + (exit_plane - entry_plane) / v)


@dataclass(frozen=True)
class SpectralDelay:
    value: float
    probability: float
    derivative_error: float


def _wavenumber_nodes(packet: WavePacketSpec, n_nodes: int, span: float = 8.0):
    lo = max(packet.k0 - span * packet.sigma_k, 1e-3 * packet.k0)
    hi = packet.k0 + span * packet.sigma_k
    return np.linspace(lo, hi, n_nodes)


def spectral_delay_detail(
    spec: BarrierSpec,
    packet: WavePacketSpec,
    which: str,
    units: UnitSystem = NATURAL_UNITS,
    n_nodes: int = 129,
    disc: SliceDiscretization | None = None,
) -> SpectralDelay:
    """Outcome-conditioned delay averaged over the packet spectrum.

    Evaluates ``P^-1 int dE |A(E) phi(E)|^2 hbar d(arg A)/dE`` for
    ``A = T`` (``which="transmitted"``) or ``A = L`` (``"reflected_left"``) on
    a uniform wavenumber grid, converting the measure with
    ``dE = (hbar^2 k / m) dk``.

    Raises
    ------
    IllConditionedError
        If the outcome probability is below 1e-12.
    """
    if which not in ("transmitted", "reflected_left"):
        raise ValueError(f"which must be 'transmitted' or 'reflected_left', got {which!r}")
    k_nodes = _wavenumber_nodes(packet, n_nodes)
    dk = k_nodes[1] - k_nodes[0]
    E_nodes = units.energy(k_nodes)
    jac = units.hbar**2 * k_nodes / units.mass  # dE/dk
    density_E = packet.spectral_density(k_nodes) / jac  # |phi(E)|^2
    if disc is None:
        disc = SliceDiscretization.default(spec, float(E_nodes[-1]) * 1.01, units)

    amps = scattering_batch(spec, E_nodes, units, disc)
    if which == "transmitted":
        mod2 = np.array([a.transmission_probability for a in amps])
    else:
        mod2 = np.array([abs(a.L) ** 2 for a in amps])
    weights = mod2 * density_E * jac * dk
    taus = np.zeros(n_nodes)
    errs = np.zeros(n_nodes)
    for i in np.flatnonzero(weights > 0):
        d = onshell_delays(spec, float(E_nodes[i]), units, disc)
        tau = d.tau_tr if which == "transmitted" else d.tau_left
        if tau is None:
            weights[i] = 0.0
            continue
        taus[i], errs[i] = tau, d.derivative_error_estimate

    P = float(np.sum(weights))
    if P < 1e-12:
        raise IllConditionedError(f"{which} probability {P:.2e} too small to condition on")
    value = float(np.sum(weights * taus) / P)
    err = float(np.sum(weights * errs) / P)
    return SpectralDelay(value, P, err)


def spectral_conditional_delay(
    spec: BarrierSpec,
    packet: WavePacketSpec,
    which: str,
    units: UnitSystem = NATURAL_UNITS,
    n_nodes: int = 129,
) -> float:
    """Spectrum-weighted conditional delay; see :func:`spectral_delay_detail`."""
    return spectral_delay_detail(spec, packet, which, units, n_nodes).value


def spectral_transmission_probability(packet: WavePacket, spec: BarrierSpec, units: UnitSystem = NATURAL_UNITS,
                                      cutoff: float = 1e-14) -> float:
    """Stationary prediction ``sum_k |phi(k)|^2 |T(k)|^2`` over the packet's discrete spectrum."""
    g = packet.grid
    w = packet.momentum_weights()
    k = g.k
    keep = (k > 0) & (w > cutoff * w.max())
    E = units.energy(k[keep])
    order = np.argsort(E)
    amps = scattering_batch(spec, E[order], units)
    t2 = np.empty(order.size)
    t2[order] = [a.transmission_probability for a in amps]
    return float(np.sum(w[keep] * t2) / np.sum(w))


def spectral_global_delay(spec: BarrierSpec, packet: WavePacketSpec, units: UnitSystem = NATURAL_UNITS,
                          n_nodes: int = 129) -> float:
    """Unconditional delay: outcome delays weighted by their probabilities."""
    tr = spectral_delay_detail(spec, packet, "transmitted", units, n_nodes)
    re = spectral_delay_detail(spec, packet, "reflected_left", units, n_nodes)
    return tr.probability * tr.value + re.probability * re.value
