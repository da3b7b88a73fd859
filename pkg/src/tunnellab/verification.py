"""Seeded barrier corpora and the invariant checks run by ``verify``.

Every check returns a :class:`CheckResult` naming its tolerance, so reports
and tests can print the same one-line verdicts.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .delays import (
    TOL_DELAY,
    identity_tolerance,
    onshell_delays,
    two_sided_delays,
    verify_delay_identity,
)
from .oracles import rectangular_amplitudes
from .potential import NATURAL_UNITS, BarrierSpec, TransitionProfile, UnitSystem
from .scattering import (
    TOL_PHASE,
    TOL_UNITARITY,
    UNDERFLOW_MODULUS,
    AsymmetricBarrier,
    check_phase_relation,
    scattering_batch,
)

PROFILES = tuple(TransitionProfile)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    asserted: bool = True
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        if not self.asserted:
            verdict += " (informational)"
        return f"{verdict}  {self.name}: value={self.value:.3e} tol={self.tolerance:.3e} {self.detail}".rstrip()

    def to_dict(self) -> dict:
        return asdict(self)


def check_at_most(name: str, value: float, tolerance: float, asserted: bool = True, detail: str = "") -> CheckResult:
    value = float(value)
    return CheckResult(name, value, float(tolerance), bool(np.isfinite(value) and value <= tolerance), asserted, detail)


def random_barrier(rng: np.random.Generator) -> BarrierSpec:
    """One barrier with parameters spread over the physically interesting range."""
    return BarrierSpec(
        v0=float(rng.uniform(0.2, 5.0)),
        a=float(rng.uniform(0.1, 3.0)),
        b=float(rng.choice([0.0, rng.uniform(0.05, 2.0)], p=[0.2, 0.8])),
        profile=PROFILES[int(rng.integers(len(PROFILES)))],
    )


def random_barriers(seed: int, n: int) -> list[BarrierSpec]:
    rng = np.random.default_rng(seed)
    return [random_barrier(rng) for _ in range(n)]


def random_energies(spec: BarrierSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Sorted energies in ``(0, 3 v0)``, half below and half above the barrier top."""
    lo = rng.uniform(0.02, 0.98, size=n - n // 2) * spec.v0
    hi = rng.uniform(1.02, 3.0, size=n // 2) * spec.v0
    return np.sort(np.concatenate([lo, hi]))


def random_asymmetric(rng: np.random.Generator) -> AsymmetricBarrier:
    return AsymmetricBarrier(
        v0=float(rng.uniform(0.5, 3.0)),
        a=float(rng.uniform(0.2, 2.0)),
        b_left=float(rng.uniform(0.1, 1.5)),
        b_right=float(rng.uniform(0.1, 1.5)),
        profile_left=PROFILES[int(rng.integers(len(PROFILES)))],
        profile_right=PROFILES[int(rng.integers(len(PROFILES)))],
    )


def unitarity_symmetry_phase(
    specs: Sequence[BarrierSpec],
    seed: int,
    n_energies: int,
    units: UnitSystem = NATURAL_UNITS,
    tol_unitarity: float = TOL_UNITARITY,
    tol_phase: float = TOL_PHASE,
    executor=None,
) -> list[CheckResult]:
    """Unitarity, ``L = R`` and the phase relation over a corpus of symmetric barriers."""
    rng = np.random.default_rng(seed)
    jobs = [(spec, random_energies(spec, rng, n_energies)) for spec in specs]

    def one(job):
        spec, energies = job
        amps = scattering_batch(spec, energies, units)
        uni = max(a.unitarity_residual for a in amps)
        sym = max(abs(a.L - a.R) for a in amps)
        ph = [abs(check_phase_relation(a)) for a in amps
              if min(abs(a.T), abs(a.L), abs(a.R)) > UNDERFLOW_MODULUS]
        return uni, sym, max(ph, default=0.0), len(ph)

    rows = list(map(one, jobs)) if executor is None else list(executor.map(one, jobs))
    n = len(specs) * n_energies
    return [
        check_at_most("unitarity", max(r[0] for r in rows), tol_unitarity, detail=f"({n} points)"),
        check_at_most("symmetry |L-R|", max(r[1] for r in rows), tol_unitarity, detail=f"({n} points)"),
        check_at_most("phase relation", max(r[2] for r in rows), tol_phase,
                      detail=f"({sum(r[3] for r in rows)} points with all moduli > 1e-280)"),
    ]


def rectangular_oracle(spec: BarrierSpec, energies: Iterable[float], units: UnitSystem = NATURAL_UNITS,
                       tol: float = 1e-8) -> list[CheckResult]:
    """Amplitudes and phases of a sharp barrier against the closed form."""
    if spec.b != 0:
        raise ValueError("the rectangular oracle needs b = 0")
    energies = np.asarray(list(energies), dtype=float)
    amps = scattering_batch(spec, energies, units)
    amp_err = 0.0
    phase_err = 0.0
    for a in amps:
        T, L, R = rectangular_amplitudes(spec.v0, spec.a, a.E, units)
        amp_err = max(amp_err, abs(a.T - T), abs(a.L - L), abs(a.R - R))
        for num, ref in ((a.T, T), (a.L, L), (a.R, R)):
            if abs(ref) > 1e-6:
                phase_err = max(phase_err, abs(np.angle(num / ref)))
    return [
        check_at_most("rectangular oracle amplitudes", amp_err, tol, detail=f"({energies.size} energies)"),
        check_at_most("rectangular oracle phases", phase_err, tol, detail=f"({energies.size} energies)"),
    ]


def delay_identity_symmetric(specs: Sequence[BarrierSpec], seed: int, n_energies: int,
                             units: UnitSystem = NATURAL_UNITS, tol: float = TOL_DELAY,
                             executor=None) -> CheckResult:
    """Worst ``|tau_tr - (tau_L + tau_R)/2|`` relative to its own tolerance."""
    rng = np.random.default_rng(seed)
    jobs = [(spec, random_energies(spec, rng, n_energies)) for spec in specs]

    def one(job):
        spec, energies = job
        worst = (0.0, 0.0, tol)
        for E in energies:
            d = onshell_delays(spec, float(E), units)
            res = verify_delay_identity(d)
            if res is None:
                continue
            t = identity_tolerance(d, tol)
            if abs(res) / t > worst[0]:
                worst = (abs(res) / t, abs(res), t)
        return worst

    rows = list(map(one, jobs)) if executor is None else list(executor.map(one, jobs))
    ratio, res, t = max(rows)
    return CheckResult("delay identity (symmetric)", res, t, ratio <= 1.0,
                       detail=f"(worst residual/tolerance {ratio:.2e}, {len(specs) * n_energies} points)")


def delay_identity_asymmetric(seed: int, n_barriers: int, n_energies: int,
                              units: UnitSystem = NATURAL_UNITS, tol: float = TOL_DELAY) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = (0.0, 0.0, tol)
    for _ in range(n_barriers):
        bar = random_asymmetric(rng)
        stack = bar.stack(256)
        for E in np.sort(rng.uniform(0.05, 3.0, size=n_energies)) * bar.v0:
            d = two_sided_delays(stack, float(E), units)
            res = verify_delay_identity(d)
            if res is None:
                continue
            t = identity_tolerance(d, tol)
            if abs(res) / t > worst[0]:
                worst = (abs(res) / t, abs(res), t)
    ratio, res, t = worst
    return CheckResult("delay identity (asymmetric, two-sided)", res, t, ratio <= 1.0,
                       detail=f"(worst residual/tolerance {ratio:.2e}, {n_barriers * n_energies} points)")
