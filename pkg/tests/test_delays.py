import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from tunnellab.delays import (
    EnergyGrid,
    delays_at,
    hartman_row,
    hartman_sweep,
    identity_tolerance,
    onshell_delays,
    stencil_grid,
    two_sided_delays,
    unwrap_phases,
    verify_delay_identity,
)
from tunnellab.errors import GridTooCoarseError, PhysicsDomainError
from tunnellab.oracles import rectangular_phase_time_saturation
from tunnellab.potential import BarrierSpec, TransitionProfile, UnitSystem
from tunnellab.scattering import AsymmetricBarrier, ScatteringAmplitudes, scattering_batch


def rectangular_phase_delays(v0, a, E, hbar=1.0, mass=1.0):
    """hbar d(arg T)/dE and hbar d(arg L)/dE of the square barrier, by mpmath differentiation."""
    mp.mp.dps = 40

    def amps(e):
        k = mp.sqrt(2 * mass * e) / hbar
        q = mp.sqrt(2 * mass * (e - v0) + 0j) / hbar
        d = 2 * mp.mpf(a)
        den = mp.cos(q * d) - 1j * (k**2 + q**2) / (2 * k * q) * mp.sin(q * d)
        T = mp.exp(-1j * k * d) / den
        L = T * 1j * (q**2 - k**2) / (2 * k * q) * mp.sin(q * d)
        return T, L

    tau_T = hbar * mp.diff(lambda e: mp.arg(amps(e)[0] * mp.exp(-1j * mp.arg(amps(mp.mpf(E))[0]))), E)
    tau_L = hbar * mp.diff(lambda e: mp.arg(amps(e)[1] * mp.exp(-1j * mp.arg(amps(mp.mpf(E))[1]))), E)
    return float(tau_T), float(tau_L)


symmetric = st.builds(
    BarrierSpec,
    v0=st.floats(0.2, 5.0),
    a=st.floats(0.1, 3.0),
    b=st.one_of(st.just(0.0), st.floats(0.05, 2.0)),
    profile=st.sampled_from(list(TransitionProfile)),
)


class TestOnShell:
    @pytest.mark.parametrize("E", [0.1, 0.5, 0.9, 1.5, 3.0])
    def test_rectangular_against_mpmath(self, E):
        d = onshell_delays(BarrierSpec(1.0, 1.0, 0.0), E)
        tau_T, tau_L = rectangular_phase_delays(1.0, 1.0, E)
        assert d.tau_tr == pytest.approx(tau_T, abs=max(1e-8, 3 * d.derivative_error_estimate))
        assert d.tau_left == pytest.approx(tau_L, abs=max(1e-8, 3 * d.derivative_error_estimate))

    def test_units_scale(self):
        u = UnitSystem(hbar=2.0, mass=3.0)
        d = onshell_delays(BarrierSpec(1.0, 1.0, 0.0), 0.4, u)
        tau_T, _ = rectangular_phase_delays(1.0, 1.0, 0.4, hbar=2.0, mass=3.0)
        assert d.tau_tr == pytest.approx(tau_T, rel=1e-8)

    def test_frozen_value(self):
        # mpmath derivative of the closed form, 40 digits
        d = onshell_delays(BarrierSpec(1.0, 1.0, 0.0), 0.5)
        assert d.tau_tr == pytest.approx(-0.07194483984836, abs=1e-11)

    def test_free_limit(self):
        d = onshell_delays(BarrierSpec(1e-12, 1.0, 0.5, "cosine"), 1.0)
        assert abs(d.tau_tr) < 1e-9

    @given(symmetric, st.floats(0.05, 3.0))
    def test_identity_symmetric(self, spec, frac):
        d = onshell_delays(spec, frac * spec.v0)
        res = verify_delay_identity(d)
        if res is not None:
            assert abs(res) <= identity_tolerance(d)
            # a symmetric barrier reflects identically from both sides
            assert abs(d.tau_left - d.tau_right) <= identity_tolerance(d)

    @given(st.floats(0.3, 3.0), st.floats(0.2, 2.0), st.floats(0.05, 1.5), st.floats(0.05, 1.5), st.floats(0.1, 3.0))
    def test_identity_two_sided(self, v0, a, bl, br, frac):
        stack = AsymmetricBarrier(v0, a, bl, br, "smoothstep3", "linear").stack(128)
        d = two_sided_delays(stack, frac * v0)
        res = verify_delay_identity(d)
        assert res is not None and abs(res) <= identity_tolerance(d)

    def test_asymmetric_reflection_delays_differ(self):
        stack = AsymmetricBarrier(1.0, 0.5, 0.1, 2.0, "linear", "linear").stack(256)
        d = two_sided_delays(stack, 0.5)
        assert abs(d.tau_left - d.tau_right) > 0.1

    def test_step_refined_near_reflection_zero(self):
        spec = BarrierSpec(3.3704003236538953, 2.801245178749928, 0.4540227777579524, "linear")
        d = onshell_delays(spec, 3.9144101677452228)
        assert any(f.startswith("step_refined") for f in d.flags)
        assert d.derivative_error_estimate < 1e-6
        assert abs(verify_delay_identity(d)) <= identity_tolerance(d)


class TestPhaseCurves:
    def test_coarse_grid_rejected(self):
        spec = BarrierSpec(1.0, 20.0, 0.0)
        amps = scattering_batch(spec, np.linspace(1.5, 3.0, 6))
        with pytest.raises(GridTooCoarseError):
            unwrap_phases(amps)

    def test_absent_reflection(self):
        grid = np.linspace(0.9, 1.1, 9)
        amps = [ScatteringAmplitudes(float(e), np.exp(2j * e), 0j, 0j) for e in grid]
        d = delays_at(unwrap_phases(amps), grid[4])
        assert d.tau_left is None and d.tau_right is None
        assert d.tau_tr == pytest.approx(2.0, rel=1e-9)
        assert "absent_left" in d.flags
        assert verify_delay_identity(d) is None

    def test_edge_node_one_sided(self):
        spec = BarrierSpec(1.0, 1.0, 0.0)
        grid = stencil_grid(0.5)
        curve = unwrap_phases(scattering_batch(spec, grid.array))
        edge = delays_at(curve, grid.energies[1])
        centre = delays_at(curve, grid.energies[4])
        assert "one_sided" in edge.flags and "one_sided" not in centre.flags

    def test_off_node(self):
        grid = stencil_grid(0.5)
        curve = unwrap_phases(scattering_batch(BarrierSpec(1.0, 1.0, 0.0), grid.array))
        with pytest.raises(PhysicsDomainError):
            delays_at(curve, 0.50001)

    def test_shifted_curve_same_delays(self):
        grid = stencil_grid(0.7)
        curve = unwrap_phases(scattering_batch(BarrierSpec(1.0, 1.0, 0.3, "linear"), grid.array))
        a, b = delays_at(curve, 0.7), delays_at(curve.shifted(4 * math.pi), 0.7)
        assert a.tau_tr == pytest.approx(b.tau_tr, abs=1e-10)


class TestHartman:
    def test_saturation_and_speed(self):
        rows = hartman_sweep(BarrierSpec(1.0, 1.0, 0.0), 0.5, [2.5, 5.0, 10.0, 20.0, 40.0])
        sat = rectangular_phase_time_saturation(1.0, 0.5)
        assert sat == 2.0
        assert rows[-1].dwell_T_tr == pytest.approx(sat, rel=1e-10)
        assert rows[-1].v_eff > 10 * rows[-1].v
        diffs = np.abs(np.diff([r.dwell_T_tr for r in rows[1:]]))
        assert np.all(np.diff(diffs) <= 0)

    @pytest.mark.parametrize("kappa_a", [10.0, 20.0, 40.0])
    def test_finite_width_deviation(self, kappa_a):
        # in saturation tau_tr = dwell - 2a/v, so tau_tr v / (-2a) = 1 - 1/(kappa a)
        r = hartman_row(BarrierSpec(1.0, kappa_a, 0.0), 0.5)
        assert r.tau_tr * r.v / (-2 * r.a) == pytest.approx(1 - 1 / kappa_a, abs=1e-10)

    def test_opaque_row_finite(self):
        r = hartman_row(BarrierSpec(1.0, 400.0, 0.0), 0.5)
        assert r.absT2 == 0.0 or r.absT2 < 1e-300
        assert r.dwell_T_tr == pytest.approx(2.0, rel=1e-9)

    @pytest.mark.parametrize("E", [1.0, 1.5, 0.0])
    def test_sweep_needs_tunnelling(self, E):
        with pytest.raises(PhysicsDomainError):
            hartman_sweep(BarrierSpec(1.0, 1.0, 0.0), E, [1.0, 2.0])

    def test_sweep_needs_increasing_widths(self):
        with pytest.raises(PhysicsDomainError):
            hartman_sweep(BarrierSpec(1.0, 1.0, 0.0), 0.5, [2.0, 1.0])

    def test_parallel_matches_serial(self):
        from concurrent.futures import ThreadPoolExecutor

        args = (BarrierSpec(1.0, 1.0, 0.5, "smoothstep5"), 0.5, [1.0, 2.0, 4.0])
        with ThreadPoolExecutor(2) as ex:
            assert hartman_sweep(*args, executor=ex) == hartman_sweep(*args)
