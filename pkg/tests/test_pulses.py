import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import simpson

from catpulse.errors import BoundaryViolationError, InvalidRateError, ModelError
from catpulse.model import SystemParams
from catpulse.pulses import (drive_for, drive_lambda, four_cat_amplitudes, gaussian_envelope, load_envelope,
                             make_pulse_plan, sampled_envelope, save_envelope, virtual_coupling)


class TestGaussianEnvelope:
    def test_peak_value(self):
        env = gaussian_envelope(1.0, 5.0, 10.0)
        assert env(5.0) == pytest.approx(math.pi ** -0.25, rel=1e-12)
        assert env(5.0) == pytest.approx(0.7511255444649425)

    def test_unit_norm(self):
        env = gaussian_envelope(1.0)
        assert abs(env.norm_on_grid() - 1) < 1e-6
        assert env.cumulative_norm(env.T) == pytest.approx(1.0, abs=1e-9)

    def test_shape_ratio(self):
        env = gaussian_envelope(2.0)
        assert env(env.t0 + env.tau) / env(env.t0) == pytest.approx(math.exp(-0.5))

    def test_boundary_values_small(self):
        env = gaussian_envelope(1.0)
        assert max(abs(env(0.0)), abs(env(env.T))) <= 1e-5 * env.peak

    def test_tight_window_rejected(self):
        with pytest.raises(BoundaryViolationError):
            gaussian_envelope(1.0, 2.0, 4.0)

    def test_derivative_matches_finite_difference(self):
        env = gaussian_envelope(1.5)
        t = np.linspace(1.0, 14.0, 9)
        h = 1e-6
        fd = (env(t + h) - env(t - h)) / (2 * h)
        np.testing.assert_allclose(env.derivative(t), fd, atol=1e-8)

    def test_derivative_norm_closed_form(self):
        env = gaussian_envelope(0.7)
        numeric = simpson(env.derivative(env.times) ** 2, x=env.times)
        assert env.derivative_norm() == pytest.approx(numeric, rel=1e-6)

    @given(st.floats(0.05, 50.0))
    def test_scalar_and_array_agree(self, tau):
        env = gaussian_envelope(tau)
        ts = np.array([0.3, 0.5, 0.9]) * env.T
        np.testing.assert_allclose(env(ts), [env(float(t)) for t in ts], rtol=1e-14)


class TestSampledEnvelope:
    def test_round_trip(self, tmp_path):
        g = gaussian_envelope(1.0)
        path = tmp_path / "env.txt"
        save_envelope(path, g)
        env = load_envelope(path)
        np.testing.assert_allclose(env(g.times[::50]), g(g.times[::50]), atol=1e-12)
        assert env.cumulative_norm(env.T) == pytest.approx(1.0, abs=1e-4)

    def test_normalize(self):
        t = np.linspace(0, 10, 1001)
        v = 3 * np.exp(-0.5 * (t - 5) ** 2)
        env = sampled_envelope(t, v, normalize=True)
        assert env.norm_on_grid() == pytest.approx(1.0, abs=1e-12)

    def test_nonzero_edge_rejected(self):
        t = np.linspace(0, 10, 1001)
        v = np.exp(-0.5 * (t - 1) ** 2)
        with pytest.raises(BoundaryViolationError):
            sampled_envelope(t, v, normalize=True)

    def test_unnormalized_rejected(self):
        t = np.linspace(0, 10, 1001)
        with pytest.raises(BoundaryViolationError):
            sampled_envelope(t, 2 * np.exp(-0.5 * (t - 5) ** 2))


class TestDrive:
    env = gaussian_envelope(1.0)

    def test_zero_amplitude(self):
        d = drive_lambda(self.env, 0.0, -0.1, 1.0, 1.0)
        assert np.all(d.lam(self.env.times) == 0)

    def test_stationary_point(self):
        alpha, kappa, kex = 1.3, 2.0, 1.5
        d = drive_lambda(self.env, alpha, 0.0, kappa, kex)
        expect = 1j * alpha * kappa * self.env(self.env.t0) / math.sqrt(2 * kex)
        assert d.lam(self.env.t0) == pytest.approx(expect, rel=1e-12)

    def test_energy_closed_form(self):
        # int |lambda|^2 = (kappa^2 |alpha|^2 / 2 kappa_ex) (1 + int |v'|^2 / kappa^2) at omega0 = 0
        kappa = 1.0
        env = gaussian_envelope(50.0 / kappa)
        d = drive_lambda(env, 2.0, 0.0, kappa, kappa)
        t = np.linspace(0, env.T, 200001)
        numeric = simpson(d.lam_abs2(t), x=t)
        closed = kappa**2 * 4 / (2 * kappa) * (1 + env.derivative_norm() / kappa**2)
        assert numeric == pytest.approx(closed, rel=1e-6)
        assert np.max(np.sqrt(d.lam_abs2(t))) == pytest.approx(2 * kappa / math.sqrt(2 * kappa) * env.peak, rel=1e-3)

    def test_rabi_relation(self):
        p = SystemParams(g=1.0, delta=1000.0, gamma=0.5, kappa_ex=1.0)
        d = drive_for(p, self.env, 2.0)
        t = self.env.times
        np.testing.assert_allclose(d.rabi(t), -d.lam(t) * p.delta / p.g, rtol=1e-12)

    def test_rabi_needs_detuning(self):
        d = drive_lambda(self.env, 1.0, 0.0, 1.0, 1.0)
        with pytest.raises(ModelError):
            d.rabi(1.0)

    def test_nonpositive_kappa_ex(self):
        with pytest.raises(InvalidRateError):
            drive_lambda(self.env, 1.0, 0.0, 1.0, 0.0)


class TestVirtualCoupling:
    env = gaussian_envelope(1.0)

    def test_end_of_window(self):
        gv = virtual_coupling(self.env)
        assert gv(self.env.T) == pytest.approx(-self.env(self.env.T), abs=1e-15)
        assert abs(gv(self.env.T)) < 1e-5

    def test_identity(self):
        gv = virtual_coupling(self.env)
        t = np.linspace(1.0, 9.0, 17)
        np.testing.assert_allclose(gv.abs2(t) * self.env.cumulative_norm(t), self.env(t) ** 2, rtol=1e-10)

    def test_regularized_at_zero(self):
        gv = virtual_coupling(self.env, 1e-12)
        val = gv(0.0)
        assert math.isfinite(abs(val))
        assert abs(val) <= abs(self.env(0.0)) / math.sqrt(1e-12) + 1e-15


class TestFourCatAmplitudes:
    def test_beta_two(self):
        a1, a2 = four_cat_amplitudes(2.0)
        assert a1 == pytest.approx(math.sqrt(2) * np.exp(0.25j * np.pi))
        assert a2 == pytest.approx(math.sqrt(2) * np.exp(-0.25j * np.pi))

    def test_beta_zero(self):
        assert four_cat_amplitudes(0) == (0, 0)

    @given(st.complex_numbers(max_magnitude=10))
    def test_sum_is_beta(self, beta):
        a1, a2 = four_cat_amplitudes(beta)
        assert a1 + a2 == pytest.approx(beta, abs=1e-12)


class TestPulsePlan:
    def test_amplitude_count_checked(self):
        p = SystemParams(g=1.0, delta=1000.0, gamma=0.5, kappa_ex=1.0, n_emitters=2)
        with pytest.raises(ModelError):
            make_pulse_plan(p, [1.0], kappa_tau=20.0)

    def test_total_amplitude_four_cat(self):
        p = SystemParams(g=1.0, delta=1000.0, gamma=0.5, kappa_ex=1.0, n_emitters=2)
        plan = make_pulse_plan(p, four_cat_amplitudes(2.0), kappa_tau=20.0)
        assert plan.total_amplitude == pytest.approx(2.0)

    def test_rederive_keeps_kappa_tau(self):
        p = SystemParams(g=1.0, delta=1000.0, gamma=0.5, kappa_ex=1.0)
        plan = make_pulse_plan(p, [2.0], kappa_tau=20.0)
        q = p.replace(kappa_ex=4.0)
        again = plan.rederive(q)
        assert again.envelope.tau * q.kappa == pytest.approx(20.0)
        assert again.drives[0].kappa_ex == 4.0

    def test_rederive_fixed_tau(self):
        p = SystemParams(g=1.0, delta=1000.0, gamma=0.5, kappa_ex=1.0)
        plan = make_pulse_plan(p, [2.0], tau=3.0)
        assert plan.rederive(p.replace(kappa_ex=4.0)).envelope.tau == 3.0
