import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from tunnellab.errors import PhysicsDomainError, UndefinedPhaseError
from tunnellab.oracles import rectangular_amplitudes, rectangular_transmission_probability
from tunnellab.potential import BarrierSpec, TransitionProfile, UnitSystem, evaluate_potential
from tunnellab.scattering import (
    AsymmetricBarrier,
    EnergyGrid,
    LayerStack,
    ScatteringAmplitudes,
    SliceDiscretization,
    amplitude_over_grid,
    check_phase_relation,
    convergence_study,
    scattering_batch,
    scattering_matrix,
    stack_amplitudes,
    two_sided_amplitudes,
)

barriers = st.builds(
    BarrierSpec,
    v0=st.floats(0.1, 8.0),
    a=st.floats(0.05, 4.0),
    b=st.one_of(st.just(0.0), st.floats(0.02, 3.0)),
    profile=st.sampled_from(list(TransitionProfile)),
)


def matching_oracle(v0, a, E, dps=40):
    """Square barrier amplitudes by solving the four matching conditions in mpmath."""
    with mp.workdps(dps):
        k = mp.sqrt(2 * mp.mpf(E))
        q = mp.sqrt(2 * (mp.mpf(E) - v0))
        e = mp.exp
        i = mp.mpc(0, 1)
        xl, xr = -mp.mpf(a), mp.mpf(a)
        # unknowns: L, C, D, T with psi = C e^{iqx} + D e^{-iqx} inside
        A = mp.matrix([
            [e(-i * k * xl), -e(i * q * xl), -e(-i * q * xl), 0],
            [-i * k * e(-i * k * xl), -i * q * e(i * q * xl), i * q * e(-i * q * xl), 0],
            [0, e(i * q * xr), e(-i * q * xr), -e(i * k * xr)],
            [0, i * q * e(i * q * xr), -i * q * e(-i * q * xr), -i * k * e(i * k * xr)],
        ])
        rhs = mp.matrix([-e(i * k * xl), -i * k * e(i * k * xl), 0, 0])
        L, _, _, T = mp.lu_solve(A, rhs)
        return complex(T), complex(L)


def ode_oracle(spec, E, units=UnitSystem()):
    """Integrate the Schroedinger equation through the smooth potential from right to left."""
    k = math.sqrt(2 * units.mass * E) / units.hbar
    xl, xr = -spec.half_support, spec.half_support
    c = 2 * units.mass / units.hbar**2

    def rhs(x, y):
        psi = y[0] + 1j * y[1]
        dpsi = y[2] + 1j * y[3]
        dd = c * (evaluate_potential(spec, x) - E) * psi
        return [dpsi.real, dpsi.imag, dd.real, dd.imag]

    psi0 = np.exp(1j * k * xr)
    dpsi0 = 1j * k * psi0
    # split at the profile kinks so the integrator never steps across one
    knots = [xr, spec.a, -spec.a, xl]
    y = [psi0.real, psi0.imag, dpsi0.real, dpsi0.imag]
    for x1, x2 in zip(knots, knots[1:]):
        sol = solve_ivp(rhs, (x1, x2), y, method="DOP853", rtol=1e-12, atol=1e-14)
        y = sol.y[:, -1]
    psi = y[0] + 1j * y[1]
    dpsi = y[2] + 1j * y[3]
    A = (dpsi + 1j * k * psi) / (2j * k) * np.exp(-1j * k * xl)
    B = (1j * k * psi - dpsi) / (2j * k) * np.exp(1j * k * xl)
    return 1 / A, B / A


class TestRectangular:
    @pytest.mark.parametrize("E", [0.05, 0.5, 0.99, 1.3, 2.7, 3.9])
    def test_matches_matching_conditions(self, E):
        amp = scattering_matrix(BarrierSpec(1.0, 1.0, 0.0), E)
        T, L = matching_oracle(1.0, 1.0, E)
        assert abs(amp.T - T) < 1e-13
        assert abs(amp.L - L) < 1e-13

    def test_closed_form_matches_matching_conditions(self):
        for E in (0.2, 0.8, 1.7):
            T, L, _ = rectangular_amplitudes(2.0 / 2.0, 0.7, E)
            T2, L2 = matching_oracle(1.0, 0.7, E)
            assert abs(T - T2) < 1e-13 and abs(L - L2) < 1e-13

    def test_probability_formula(self):
        E = np.linspace(0.01, 4.0, 77)
        E = E[np.abs(E - 1.0) > 1e-6]
        T, _, _ = rectangular_amplitudes(1.0, 1.3, E)
        np.testing.assert_allclose(np.abs(T) ** 2, rectangular_transmission_probability(1.0, 1.3, E), rtol=1e-12)

    def test_frozen_value(self):
        # mpmath, 40 digits: V0 = 1, a = 1, E = 1/2
        amp = scattering_matrix(BarrierSpec(1.0, 1.0, 0.0), 0.5)
        # 1 / (1 + sinh(2)^2), cross-checked against the matching-condition solve
        assert amp.transmission_probability == pytest.approx(0.07065082485316448, rel=1e-12)

    def test_deep_tunnelling_keeps_accuracy(self):
        # |T|^2 ~ 1e-52; closed form gives |T| = 1 / cosh(2 kappa a) here
        amp = scattering_matrix(BarrierSpec(1.0, 30.0, 0.0), 0.5)
        assert "unitarity" not in amp.flags and "underflow" not in amp.flags
        assert amp.log_abs_T == pytest.approx(math.log(2.0) - 60.0, abs=1e-12)
        T, _, _ = rectangular_amplitudes(1.0, 30.0, 0.5)
        assert abs(np.angle(amp.T / T)) < 1e-10

    def test_barrier_top(self):
        amp = scattering_matrix(BarrierSpec(1.0, 1.0, 0.0), 1.0)
        # limit q -> 0: |T|^2 = 1 / (1 + m v0 a^2 * 2 / hbar^2) with d = 2a
        assert amp.transmission_probability == pytest.approx(1.0 / (1.0 + 2.0), rel=1e-8)


class TestSmoothBarrier:
    @pytest.mark.parametrize("profile", list(TransitionProfile))
    @pytest.mark.parametrize("E", [0.4, 1.6])
    def test_converges_to_ode_solution(self, profile, E):
        spec = BarrierSpec(1.0, 0.6, 0.8, profile)
        T_ref, L_ref = ode_oracle(spec, E)
        amp = scattering_matrix(spec, E, disc=SliceDiscretization.uniform(spec, 2048))
        assert abs(amp.T - T_ref) < 1e-6
        assert abs(amp.L - L_ref) < 1e-6

    def test_second_order_convergence(self):
        spec = BarrierSpec(1.0, 1.0, 1.0, "smoothstep5")
        rows = convergence_study(spec, 0.7, n_list=(64, 128, 256, 512, 1024))
        t = np.array([r[1] for r in rows])
        d = np.abs(np.diff(t))
        ratios = d[:-1] / d[1:]
        assert np.all((ratios > 3.5) & (ratios < 4.5))

    def test_narrow_ramp_tends_to_rectangle(self):
        E = 0.6
        rect = scattering_matrix(BarrierSpec(1.0, 1.0, 0.0), E)
        errs = [abs(scattering_matrix(BarrierSpec(1.0, 1.0, b, "linear"), E).T - rect.T) for b in (1e-2, 1e-3)]
        assert errs[1] < errs[0] / 5 and errs[1] < 1e-3

    def test_coarse_flag(self):
        spec = BarrierSpec(1.0, 1.0, 2.0, "cosine")
        amp = scattering_matrix(spec, 50.0, disc=SliceDiscretization.uniform(spec, 4))
        assert "coarse_slicing" in amp.flags
        assert "coarse_slicing" not in scattering_matrix(spec, 50.0).flags


class TestInvariants:
    @given(barriers, st.floats(0.01, 3.0))
    def test_unitarity_and_symmetry(self, spec, frac):
        E = frac * spec.v0
        if abs(E - spec.v0) < 1e-9:
            E *= 1.01
        amp = scattering_matrix(spec, E)
        assert amp.unitarity_residual <= 1e-8
        assert abs(amp.L - amp.R) <= 1e-8
        S = amp.matrix()
        np.testing.assert_allclose(S.conj().T @ S, np.eye(2), atol=1e-8)

    @given(barriers, st.floats(0.01, 3.0))
    def test_phase_relation(self, spec, frac):
        amp = scattering_matrix(spec, frac * spec.v0)
        if min(abs(amp.T), abs(amp.L)) > 1e-280:
            assert abs(check_phase_relation(amp)) <= 1e-8

    def test_phase_relation_undefined(self):
        amp = ScatteringAmplitudes(1.0, 1.0 + 0j, 0j, 0j)
        with pytest.raises(UndefinedPhaseError):
            check_phase_relation(amp)

    def test_free_limit(self):
        # a vanishing barrier is transparent with no phase
        amp = scattering_matrix(BarrierSpec(1e-12, 1.0, 0.5, "smoothstep3"), 2.0)
        assert abs(amp.T - 1.0) < 1e-11 and abs(amp.L) < 1e-11

    @given(st.floats(0.3, 2.0), st.floats(0.2, 1.5), st.floats(0.1, 1.5), st.floats(0.1, 1.5), st.floats(0.05, 3.0))
    def test_asymmetric_reciprocity(self, v0, a, bl, br, frac):
        stack = AsymmetricBarrier(v0, a, bl, br, "linear", "smoothstep5").stack(64)
        amp = two_sided_amplitudes(stack, [frac * v0])[0]
        mirror = stack_amplitudes(stack.mirrored(), [frac * v0])[0]
        # transmission is the same from both sides; reflections share the modulus
        assert abs(amp.T - mirror.T) < 1e-10
        assert abs(abs(amp.L) - abs(amp.R)) < 1e-10
        assert amp.unitarity_residual < 1e-8

    def test_asymmetric_reflection_phases_differ(self):
        stack = AsymmetricBarrier(1.0, 0.5, 0.2, 1.5, "linear", "cosine").stack(128)
        amp = two_sided_amplitudes(stack, [0.6])[0]
        assert abs(np.angle(amp.L / amp.R)) > 1e-3

    def test_symmetric_stack_two_sided(self):
        spec = BarrierSpec(1.2, 0.7, 0.4, "smoothstep3")
        stack = LayerStack.from_barrier(spec, 128)
        for amp in two_sided_amplitudes(stack, [0.3, 0.9, 2.0]):
            assert abs(amp.L - amp.R) < 1e-12


class TestBatchAndGrid:
    def test_batch_equals_single(self):
        spec = BarrierSpec(1.0, 1.0, 0.5, "cosine")
        E = np.array([0.2, 0.7, 1.4])
        disc = SliceDiscretization.default(spec, 1.4)
        batch = scattering_batch(spec, E, disc=disc)
        for e, b in zip(E, batch):
            assert scattering_matrix(spec, e, disc=disc).T == b.T

    def test_nonpositive_energy(self):
        with pytest.raises(PhysicsDomainError):
            scattering_matrix(BarrierSpec(1.0, 1.0, 0.0), 0.0)

    def test_grid_error_records(self):
        amps = amplitude_over_grid(BarrierSpec(1.0, 1.0, 0.0), [0.5, -1.0, 2.0])
        assert [a.ok for a in amps] == [True, False, True]
        assert "positive" in amps[1].error

    @pytest.mark.parametrize("bad", [(), (1.0, 0.5), (0.0, 1.0)])
    def test_energy_grid_validation(self, bad):
        with pytest.raises(PhysicsDomainError):
            EnergyGrid(bad)
