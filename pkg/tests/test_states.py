import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from catpulse.algebra import QuantumState, SpaceLayout, basis, destroy, identity, ket_bra, tensor
from catpulse.dynamics import integrate_master
from catpulse.errors import (DegenerateStateError, InvalidStateError, LayoutError, TruncationError, WignerGridError,
                             WrongModelError, ZeroProbabilityError)
from catpulse.model import DOWN, VIRTUAL, SystemParams, build_effective_model, build_full_model, excited_projector
from catpulse.protocol import down_projector, initial_state
from catpulse.pulses import drive_for, four_cat_amplitudes, gaussian_envelope
from catpulse.states import (EXCITED_OBSERVABLE, CatSpec, cat_normalization, cat_state, coherent, coherent_vector,
                             excited_population_avg, fidelity, four_cat_target, ideal_output_state, min_fock_dim,
                             nyquist_spacing, postselect, save_wigner_csv, wigner, wigner_norm)
from conftest import random_density


def displaced_parity(rho, x, p, pad=80):
    """W(x, p) = (1/pi) Tr[D(-beta) rho D(beta) Parity] in a padded Fock space."""
    d = rho.shape[0]
    n = d + pad
    big = np.zeros((n, n), dtype=complex)
    big[:d, :d] = rho
    a = np.diag(np.sqrt(np.arange(1, n)), 1)
    beta = (x + 1j * p) / math.sqrt(2)
    D = expm(beta * a.conj().T - np.conj(beta) * a)
    shifted = D.conj().T @ big @ D
    parity = (-1.0) ** np.arange(n)
    return float(np.real(np.sum(np.diag(shifted)[: n - pad // 4] * parity[: n - pad // 4]))) / math.pi


class TestCoherent:
    def test_vacuum(self):
        np.testing.assert_allclose(coherent(5, 0).data, basis(5, 0).data)

    def test_mean_photon(self):
        s = coherent(30, 2.0)
        a = destroy(30)
        assert np.vdot(s.data, (a.dag() @ a).matrix @ s.data).real == pytest.approx(4.0, abs=1e-8)

    def test_overlap(self):
        assert abs(np.vdot(coherent_vector(40, 2.0), coherent_vector(40, -2.0))) == pytest.approx(math.exp(-8),
                                                                                                 abs=1e-8)

    def test_truncation_rejected(self):
        with pytest.raises(TruncationError):
            coherent(5, 3.0)

    @given(st.complex_numbers(max_magnitude=3.0))
    def test_min_dim_respects_tail(self, alpha):
        dim = min_fock_dim(alpha)
        v = coherent_vector(dim, alpha)
        assert np.linalg.norm(v) == pytest.approx(1.0)


class TestCats:
    def test_normalization_matches_vector(self):
        for parity in ("even", "odd"):
            alpha = 1.3
            sign = 1 if parity == "even" else -1
            v = coherent_vector(40, alpha) + sign * coherent_vector(40, -alpha)
            assert np.linalg.norm(v) == pytest.approx(cat_normalization(alpha, parity), abs=1e-9)

    def test_even_cat_parity(self):
        s = cat_state(CatSpec(0.3, fock_dim=20))
        assert np.max(np.abs(s.data[1::2])) < 1e-14

    def test_even_cat_zero_is_vacuum(self):
        np.testing.assert_allclose(cat_state(CatSpec(0.0, fock_dim=6)).data, basis(6, 0).data, atol=1e-15)

    def test_odd_cat_zero_degenerate(self):
        with pytest.raises(DegenerateStateError):
            cat_state(CatSpec(0.0, parity="odd", fock_dim=6))

    def test_four_cat_support(self):
        s = four_cat_target(2.0, 40)
        pops = np.abs(s.data) ** 2
        assert np.max(pops[np.arange(40) % 4 != 0]) < 1e-8

    def test_bad_components(self):
        with pytest.raises(ValueError):
            CatSpec(1.0, components=3)


class TestFidelity:
    def test_self(self):
        s = coherent(20, 1.0 + 0.5j)
        assert fidelity(s, s) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert fidelity(basis(4, 1), basis(4, 2)) == 0

    def test_coherent_overlap(self):
        assert fidelity(coherent(40, 1.2).to_density(), coherent(40, -1.2)) == pytest.approx(math.exp(-4 * 1.44))

    def test_layout_mismatch(self):
        with pytest.raises(LayoutError):
            fidelity(basis(4, 1, "a"), basis(4, 1, "b"))

    def test_mixed_target_rejected(self):
        with pytest.raises(InvalidStateError):
            fidelity(basis(4, 1), basis(4, 1).to_density())

    @given(st.integers(0, 2**31 - 1))
    def test_bounded(self, seed):
        rng = np.random.default_rng(seed)
        lay = SpaceLayout.single("m", 5)
        rho = QuantumState.density(lay, random_density(rng, 5))
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        F = fidelity(rho, QuantumState.pure(lay, v / np.linalg.norm(v)))
        assert 0.0 <= F <= 1.0


class TestPostselect:
    def test_identity(self):
        rho = coherent(10, 0.5).to_density()
        out, prob = postselect(rho, identity(rho.layout))
        assert prob == pytest.approx(1.0)
        np.testing.assert_allclose(out.data, rho.data)

    def test_product_state(self):
        phi = coherent(10, 0.5, "cavity")
        s = tensor(basis(2, DOWN, "spin"), phi)
        out, prob = postselect(s, ket_bra(2, DOWN, DOWN, "spin"))
        assert prob == pytest.approx(1.0)
        assert out.layout.labels == ("cavity",)
        assert fidelity(out, phi) == pytest.approx(1.0)

    def test_zero_probability(self):
        s = tensor(basis(2, 1, "spin"), basis(3, 0, "cavity"))
        with pytest.raises(ZeroProbabilityError):
            postselect(s, ket_bra(2, 0, 0, "spin"))

    def test_not_a_projector(self):
        s = tensor(basis(2, 1, "spin"), basis(3, 0, "cavity"))
        with pytest.raises(InvalidStateError):
            postselect(s, 2 * ket_bra(2, 0, 0, "spin"))

    def test_four_cat_from_ideal_output(self):
        beta = 2.0
        lay = SpaceLayout((("emitter1", 2), ("emitter2", 2), ("cavity", 2), (VIRTUAL, 30)))
        ideal = ideal_output_state(lay, four_cat_amplitudes(beta))
        out, prob = postselect(ideal, down_projector(["emitter1", "emitter2"]))
        target = tensor(basis(2, 0, "cavity"), four_cat_target(beta, 30))
        assert fidelity(out, target) == pytest.approx(1.0, abs=1e-10)
        v = sum(coherent_vector(30, b) for b in (beta, -beta, 1j * beta, -1j * beta))
        assert prob == pytest.approx(np.linalg.norm(v) ** 2 / 16, rel=1e-10)


class TestWigner:
    def test_vacuum_origin(self):
        W = wigner(basis(10, 0), np.array([0.0]), np.array([0.0]))
        assert W[0, 0] == pytest.approx(1 / math.pi, abs=1e-12)

    def test_coherent_peak(self):
        x = np.linspace(-2, 6, 321)
        W = wigner(coherent(25, 2.0), x, np.array([0.0]))
        assert x[np.argmax(W[:, 0])] == pytest.approx(2 * math.sqrt(2), abs=0.02)

    def test_even_cat_origin_parity(self):
        cat = cat_state(CatSpec(2.0, fock_dim=30))
        parity = np.sum(np.abs(cat.data[::2]) ** 2) - np.sum(np.abs(cat.data[1::2]) ** 2)
        W = wigner(cat, np.array([0.0]), np.array([0.0]))
        assert W[0, 0] == pytest.approx(parity / math.pi, abs=1e-12)

    @given(st.integers(0, 2**31 - 1), st.floats(-2.5, 2.5), st.floats(-2.5, 2.5))
    def test_matches_displaced_parity(self, seed, x, p):
        rho = random_density(np.random.default_rng(seed), 6)
        state = QuantumState.density(SpaceLayout.single("m", 6), rho)
        W = wigner(state, np.array([x]), np.array([p]), check_grid=False)
        assert W[0, 0] == pytest.approx(displaced_parity(rho, x, p), abs=1e-10)

    def test_normalization(self):
        s = four_cat_target(2.0, 40)
        x = np.linspace(-7, 7, 161)
        W = wigner(s, x, x)
        assert abs(wigner_norm(W, x, x) - 1) < 1e-3
        assert W.min() < 0

    def test_coarse_grid_rejected(self):
        x = np.linspace(-6, 6, 9)
        with pytest.raises(WignerGridError):
            wigner(coherent(40, 3.0), x, x)
        assert nyquist_spacing(9.0) < x[1] - x[0]

    def test_multimode_needs_label(self):
        s = tensor(basis(2, 0, "spin"), basis(3, 0, "cavity"))
        with pytest.raises(LayoutError):
            wigner(s, np.array([0.0]), np.array([0.0]))
        W = wigner(s, np.array([0.0]), np.array([0.0]), label="cavity")
        assert W[0, 0] == pytest.approx(1 / math.pi)

    def test_csv(self, tmp_path):
        x = np.linspace(-1, 1, 3)
        W = wigner(basis(4, 0), x, x)
        save_wigner_csv(tmp_path / "w.csv", x, x, W)
        rows = (tmp_path / "w.csv").read_text().strip().splitlines()
        assert rows[0] == "x,p,W"
        assert len(rows) == 10


class TestExcitedPopulation:
    def test_wrong_model(self):
        p = SystemParams(g=1.0, delta=100.0, gamma=0.5, kappa_ex=1.0)
        env = gaussian_envelope(2.0)
        m = build_effective_model(p, [drive_for(p, env, 0.5)], n_cavity=8)
        traj = integrate_master(m, initial_state(m), (0, env.T))
        with pytest.raises(WrongModelError):
            excited_population_avg(traj, p, 2.0)

    def test_ground_manifold_only(self):
        p = SystemParams(g=1.0, delta=100.0, gamma=0.5, kappa_ex=1.0)
        env = gaussian_envelope(2.0)
        m = build_full_model(p, [drive_for(p, env, 0.0)], n_cavity=3)
        traj = integrate_master(m, initial_state(m), (0, env.T), observables={EXCITED_OBSERVABLE: excited_projector(m)})
        assert excited_population_avg(traj, p, 2.0) == 0.0

    def test_missing_record(self):
        p = SystemParams(g=1.0, delta=100.0, gamma=0.5, kappa_ex=1.0)
        env = gaussian_envelope(2.0)
        m = build_full_model(p, [drive_for(p, env, 0.0)], n_cavity=3)
        traj = integrate_master(m, initial_state(m), (0, env.T))
        with pytest.raises(KeyError):
            excited_population_avg(traj, p, 2.0)
