import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import PLUS, SIGMA_MINUS, Z, cgauss, density, hermitian, unit
from lindode.errors import CheckFailed, InputError
from lindode.lindblad import (
    DENSE_LIMIT,
    LindbladSpec,
    apply_generator,
    choi_matrix,
    cptp_check,
    effective_hamiltonian,
    jump_spectrum_check,
    liouvillian_matrix,
    propagate,
    propagator_channel,
    sde_ensemble,
    trace_distance,
)
from lindode.numkernel import expm, unvec, vec
from lindode.odecore import TimeDependentMatrix

seeds = st.integers(0, 2**32 - 1)
RHO_PLUS = np.outer(PLUS, PLUS)
RHO_ONE = np.diag([0.0, 1.0]).astype(complex)


def random_spec(rng, d, jumps=2, scale=0.5):
    return LindbladSpec.from_matrices(hermitian(rng, d, scale), [scale * cgauss(rng, d, d) / 2 for _ in range(jumps)])


def knot_spec(rng, d, T=1.0, n_knots=3):
    ts = np.linspace(0, T, n_knots)
    H = TimeDependentMatrix.from_knots(ts, [hermitian(rng, d, 0.5) for _ in ts])
    F = TimeDependentMatrix.from_knots(ts, [cgauss(rng, d, d) / 4 for _ in ts])
    return LindbladSpec(H, (F,))


class TestGenerator:
    def test_commutator(self):
        out = apply_generator(LindbladSpec.from_matrices(Z), RHO_PLUS)
        np.testing.assert_allclose(out, [[0, -1j], [1j, 0]], atol=1e-15)

    def test_amplitude_damping(self):
        out = apply_generator(LindbladSpec.from_matrices(np.zeros((2, 2)), [SIGMA_MINUS]), RHO_ONE)
        np.testing.assert_allclose(out, np.diag([1.0, -1.0]), atol=1e-15)

    @given(seeds)
    def test_traceless(self, seed):
        rng = np.random.default_rng(seed)
        assert abs(np.trace(apply_generator(random_spec(rng, 4), density(rng, 4)))) <= 1e-12

    def test_non_hermitian_H_rejected(self):
        with pytest.raises(InputError):
            LindbladSpec.from_matrices(SIGMA_MINUS)


class TestLiouvillian:
    def test_zero(self):
        assert not np.any(liouvillian_matrix(LindbladSpec.from_matrices(np.zeros((2, 2)))))

    def test_pauli_z_spectrum(self):
        w = np.linalg.eigvals(liouvillian_matrix(LindbladSpec.from_matrices(Z)))
        got = sorted(w, key=lambda z: (round(z.imag, 9), round(z.real, 9)))
        np.testing.assert_allclose(got, [-2j, 0, 0, 2j], atol=1e-14)

    @given(seeds, st.sampled_from([2, 4, 8]))
    def test_consistent_with_generator(self, seed, d):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng, d)
        rho = cgauss(rng, d, d)
        L = liouvillian_matrix(spec)
        assert np.max(np.abs(unvec(L @ vec(rho)) - apply_generator(spec, rho))) <= 1e-12
        assert jump_spectrum_check(spec) <= 1e-10


class TestPropagate:
    def test_zero_generator(self):
        rho = density(np.random.default_rng(0), 2)
        np.testing.assert_allclose(propagate(LindbladSpec.from_matrices(np.zeros((2, 2))), rho, 3.0), rho, atol=1e-15)

    def test_amplitude_damping(self):
        gamma, T = 0.7, 1.3
        spec = LindbladSpec.from_matrices(np.zeros((2, 2)), [math.sqrt(gamma) * SIGMA_MINUS])
        rho = propagate(spec, RHO_ONE, T)
        assert rho[1, 1].real == pytest.approx(math.exp(-gamma * T), abs=1e-13)

    def test_commuting_family(self):
        # H(t) = f(t) Z with f piecewise linear; evolution depends only on the integral of f
        ts, fs = [0.0, 0.4, 1.0], [0.0, 2.0, -1.0]
        H = TimeDependentMatrix.from_knots(ts, [f * Z for f in fs])
        theta = 0.5 * 0.4 * 2.0 + 0.5 * 0.6 * (2.0 - 1.0)
        U = expm(-1j * theta * Z)
        rho = propagate(LindbladSpec(H), RHO_PLUS, 1.0)
        np.testing.assert_allclose(rho, U @ RHO_PLUS @ U.conj().T, atol=1e-10)

    @given(seeds)
    def test_semigroup_constant(self, seed):
        rng = np.random.default_rng(seed)
        spec, rho0 = random_spec(rng, 4), density(rng, 4)
        half = propagate(spec, propagate(spec, rho0, 0.6), 0.6)
        full = propagate(spec, rho0, 1.2)
        assert np.max(np.abs(half - full)) <= 1e-9
        assert abs(np.trace(full) - 1) <= 1e-10

    @settings(max_examples=5)
    @given(seeds)
    def test_cocycle_knots(self, seed):
        rng = np.random.default_rng(seed)
        spec, rho0 = knot_spec(rng, 2), density(rng, 2)
        split = propagate(spec, propagate(spec, rho0, 0.5), 0.5, t0=0.5)
        full = propagate(spec, rho0, 1.0)
        assert np.max(np.abs(split - full)) <= 1e-9
        assert abs(np.trace(full) - 1) <= 1e-10

    def test_matrix_free_agrees_with_dense(self):
        rng = np.random.default_rng(4)
        d = 2 * DENSE_LIMIT
        spec = LindbladSpec.from_matrices(hermitian(rng, d, 0.2), [cgauss(rng, d, d) / (2 * d)])
        psi = unit(rng, d)
        rho0 = np.outer(psi, psi.conj())
        dense = unvec(expm(liouvillian_matrix(spec) * 0.8) @ vec(rho0), d)
        np.testing.assert_allclose(propagate(spec, rho0, 0.8), dense, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            propagate(LindbladSpec.from_matrices(Z), np.eye(4) / 4, 1.0)


class TestChannel:
    def test_zero_time_identity(self):
        Phi = propagator_channel(random_spec(np.random.default_rng(0), 2), 0.0)
        assert np.array_equal(Phi, np.eye(4))

    def test_half_damping_choi_spectrum(self):
        spec = LindbladSpec.from_matrices(np.zeros((2, 2)), [SIGMA_MINUS])
        Phi = propagator_channel(spec, math.log(2))
        # Kraus diag(1, 1/sqrt2) and |0><1|/sqrt2 give Choi eigenvalues {3/2, 1/2, 0, 0}
        np.testing.assert_allclose(np.linalg.eigvalsh(choi_matrix(Phi)), [0, 0, 0.5, 1.5], atol=1e-12)

    @given(seeds)
    def test_trace_preserving(self, seed):
        Phi = propagator_channel(random_spec(np.random.default_rng(seed), 4), 1.0)
        vI = vec(np.eye(4))
        assert np.max(np.abs(vI @ Phi - vI)) <= 1e-9
        assert cptp_check(Phi, channel=True).passed

    def test_knot_channel_matches_propagate(self):
        rng = np.random.default_rng(2)
        spec, rho0 = knot_spec(rng, 2), density(rng, 2)
        Phi = propagator_channel(spec, 1.0)
        np.testing.assert_allclose(unvec(Phi @ vec(rho0)), propagate(spec, rho0, 1.0), atol=1e-9)

    def test_negative_time(self):
        with pytest.raises(InputError):
            propagator_channel(random_spec(np.random.default_rng(0), 2), -1.0)


class TestCptpCheck:
    def test_maximally_mixed(self):
        assert cptp_check(np.eye(4) / 4).passed

    def test_trace_excess(self):
        rep = cptp_check(np.diag([0.51, 0.5]))
        assert not rep.passed
        assert rep.trace_error == pytest.approx(0.01)

    def test_negative_state(self):
        rep = cptp_check(np.diag([1.1, -0.1]))
        assert not rep.passed and rep.min_eigenvalue == pytest.approx(-0.1)


class TestSde:
    def test_no_jumps_is_unitary(self):
        rng = np.random.default_rng(0)
        H, psi = hermitian(rng, 2), unit(rng, 2)
        mean, stderr = sde_ensemble(H, [], psi, 1.0, N=10)
        U = expm(-1j * H)
        target = U @ np.outer(psi, psi.conj()) @ U.conj().T
        dt = min(0.01, 0.1 / np.linalg.norm(H, 2))
        assert np.max(np.abs(mean - target)) <= 5 * dt * np.linalg.norm(H, 2) ** 2
        assert np.max(stderr) <= 1e-6  # identical trajectories; variance by moments

    def test_identity_jump_keeps_mean(self):
        psi = unit(np.random.default_rng(1), 2)
        G = np.eye(2)
        H_eff = effective_hamiltonian(np.zeros((2, 2)), [G])
        mean, stderr = sde_ensemble(H_eff, [G], psi, 1.0, dt=0.01, N=4000, seed=3)
        rho0 = np.outer(psi, psi.conj())
        assert np.all(np.abs(mean - rho0) <= 4 * stderr + 5 * 0.01)

    def test_deterministic_given_seed(self):
        H_eff = effective_hamiltonian(np.zeros((2, 2)), [SIGMA_MINUS])
        a = sde_ensemble(H_eff, [SIGMA_MINUS], PLUS, 0.5, N=1500, seed=9)
        b = sde_ensemble(H_eff, [SIGMA_MINUS], PLUS, 0.5, N=1500, seed=9)
        assert np.array_equal(a[0], b[0])

    def test_dt_too_large(self):
        with pytest.raises(InputError):
            sde_ensemble(10 * Z, [], PLUS, 1.0, dt=0.1)

    @pytest.mark.slow
    def test_convergence_with_dt_and_N(self):
        kappa = 1.0
        G = math.sqrt(2 * kappa) * SIGMA_MINUS
        H = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
        H_eff = effective_hamiltonian(H, [G])
        psi = np.array([0, 1], dtype=complex)
        exact = propagate(LindbladSpec.from_matrices(H, [G]), np.outer(psi, psi), 1.0)
        coarse, _ = sde_ensemble(H_eff, [G], psi, 1.0, dt=0.08, N=2000, seed=1)
        fine, se = sde_ensemble(H_eff, [G], psi, 1.0, dt=0.04, N=8000, seed=2)
        e_coarse = np.max(np.abs(coarse - exact))
        e_fine = np.max(np.abs(fine - exact))
        assert e_fine < e_coarse
        assert e_fine <= 3 * np.max(se) + 5 * 0.04


def test_trace_distance_orthogonal_states():
    assert trace_distance(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(1.0)


def test_check_failed_is_raised_on_bad_output(monkeypatch):
    import lindode.lindblad as lb
    monkeypatch.setattr(lb, "check_state", lambda rho: lb.CptpReport("state", False, 0, 1, 0))
    with pytest.raises(CheckFailed):
        propagate(LindbladSpec.from_matrices(Z), RHO_PLUS, 1.0)
