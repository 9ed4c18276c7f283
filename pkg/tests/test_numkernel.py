import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gen import X, amplitude_damping_kraus, cgauss, density, hermitian, psd, semi_dissipative
from lindode.errors import InputError, NotPSDError
from lindode.lindblad import LindbladSpec, propagator_channel
from lindode.numkernel import (
    KrausSet,
    choi_kraus,
    choi_matrix,
    expm,
    herm_eig,
    kron,
    norms,
    psd_sqrt,
    sandwich_superop,
    unvec,
    vec,
    vnorm,
)

seeds = st.integers(0, 2**32 - 1)


class TestExpm:
    def test_zero_gives_identity(self):
        assert np.array_equal(expm(np.zeros((2, 2))), np.eye(2))

    def test_diagonal(self):
        np.testing.assert_allclose(expm(np.diag([-1.0, -2.0])), np.diag([math.exp(-1), math.exp(-2)]), rtol=1e-14)

    def test_planar_rotation(self):
        th = math.pi / 2
        got = expm(np.array([[0, th], [-th, 0]]))
        np.testing.assert_allclose(got, [[0, 1], [-1, 0]], atol=1e-15)

    @given(seeds)
    def test_commuting_sum(self, seed):
        rng = np.random.default_rng(seed)
        a, b = np.diag(cgauss(rng, 4)), np.diag(cgauss(rng, 4))
        np.testing.assert_allclose(expm(a + b), expm(a) @ expm(b), atol=1e-10, rtol=1e-10)

    def test_rejects_non_square(self):
        with pytest.raises(InputError):
            expm(np.zeros((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(InputError):
            expm(np.array([[np.nan, 0], [0, 1]]))


class TestHermEig:
    def test_diagonal(self):
        w, Q = herm_eig(np.diag([1.0, -1.0]))
        np.testing.assert_allclose(w, [-1, 1])
        np.testing.assert_allclose(np.abs(Q), [[0, 1], [1, 0]])

    def test_pauli_x(self):
        w, Q = herm_eig(X)
        np.testing.assert_allclose(w, [-1, 1], atol=1e-15)
        for k, sign in ((0, -1), (1, 1)):
            target = np.array([1, sign]) / math.sqrt(2)
            assert abs(abs(np.vdot(target, Q[:, k])) - 1) < 1e-14

    @given(seeds)
    def test_reconstruction(self, seed):
        M = hermitian(np.random.default_rng(seed), 8)
        eig = herm_eig(M)
        assert np.all(np.diff(eig.eigenvalues) >= 0)
        assert np.linalg.norm(eig.reconstruct() - M, 2) <= 1e-12 * np.linalg.norm(M, 2)
        Q = eig.eigenvectors
        assert np.max(np.abs(Q.conj().T @ Q - np.eye(8))) <= 1e-12

    def test_rejects_non_hermitian(self):
        with pytest.raises(InputError):
            herm_eig(np.array([[0, 1], [0, 0]]))


class TestPsdSqrt:
    def test_identity(self):
        np.testing.assert_allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0, 0.0])), np.diag([2.0, 3.0, 0.0]), atol=1e-14)

    @given(seeds, st.integers(1, 6))
    def test_square_and_commute(self, seed, rank):
        B = psd(np.random.default_rng(seed), 6, rank=rank)
        R = psd_sqrt(B)
        scale = np.linalg.norm(B, 2)
        assert np.max(np.abs(R @ R - B)) <= 1e-10 * scale
        assert np.max(np.abs(R @ B - B @ R)) <= 1e-10 * scale
        assert np.min(np.linalg.eigvalsh(R)) >= -1e-12

    def test_clips_roundoff(self):
        R = psd_sqrt(np.diag([1.0, -1e-12]))
        assert R[1, 1] == 0.0

    def test_rejects_negative(self):
        with pytest.raises(NotPSDError):
            psd_sqrt(np.diag([1.0, -1e-3]))


class TestVec:
    def test_single_entry(self):
        e = vec(np.array([[0, 1], [0, 0]]))
        assert np.array_equal(e, [0, 1, 0, 0])

    @given(seeds)
    def test_unvec_inverts(self, seed):
        rho = cgauss(np.random.default_rng(seed), 4, 4)
        assert np.array_equal(unvec(vec(rho)), rho)

    @given(seeds)
    def test_sandwich_convention(self, seed):
        rng = np.random.default_rng(seed)
        A, B, rho = cgauss(rng, 2, 2), cgauss(rng, 2, 2), cgauss(rng, 2, 2)
        np.testing.assert_allclose(sandwich_superop(A, B) @ vec(rho), vec(A @ rho @ B), atol=1e-12)
        np.testing.assert_allclose(np.kron(A, B.T) @ vec(rho), vec(A @ rho @ B), atol=1e-12)

    def test_kron_is_standard(self):
        assert np.array_equal(kron(np.eye(2), X), np.kron(np.eye(2), X))

    def test_unvec_rejects_non_square(self):
        with pytest.raises(InputError):
            unvec(np.ones(3))


def _channel_action(kraus, rho):
    return sum(K @ rho @ K.conj().T for K in kraus)


class TestChoiKraus:
    def test_identity_channel(self):
        K = choi_kraus(np.eye(4))
        assert len(K) == 1
        phase = K[0][0, 0]
        np.testing.assert_allclose(K[0], phase * np.eye(2), atol=1e-12)
        assert abs(abs(phase) - 1) < 1e-12

    def test_amplitude_damping(self):
        ref = amplitude_damping_kraus(0.5)
        Phi = sum(np.kron(K, K.conj()) for K in ref)
        K = choi_kraus(Phi)
        assert len(K) == 2
        for i in range(2):
            for j in range(2):
                E = np.zeros((2, 2))
                E[i, j] = 1
                np.testing.assert_allclose(K.apply(E), _channel_action(ref, E), atol=1e-12)
        assert K.completeness_error() <= 1e-12

    @given(seeds)
    def test_random_lindblad_propagator(self, seed):
        rng = np.random.default_rng(seed)
        spec = LindbladSpec.from_matrices(hermitian(rng, 4), [cgauss(rng, 4, 4) / 2, cgauss(rng, 4, 4) / 2])
        Phi = propagator_channel(spec, 0.7)
        K = choi_kraus(Phi)
        assert np.max(np.abs(K.superoperator() - Phi)) <= 1e-9
        rho = density(rng, 4)
        np.testing.assert_allclose(K.apply(rho), unvec(Phi @ vec(rho)), atol=1e-9)

    def test_rejects_non_cp(self):
        # transpose map: trace preserving but not CP
        transpose = np.eye(4)[[0, 2, 1, 3]]
        assert np.min(np.linalg.eigvalsh(choi_matrix(transpose))) < -0.5
        with pytest.raises(NotPSDError):
            choi_kraus(transpose)

    def test_empty_kraus_set(self):
        with pytest.raises(InputError):
            KrausSet([])


class TestNorms:
    def test_identity(self):
        n = norms(np.eye(5))
        assert n.spectral == pytest.approx(1) and n.trace == pytest.approx(5)

    def test_rank_one(self):
        n = norms(np.array([[0, 1], [0, 0]]))
        assert n.spectral == pytest.approx(1) and n.trace == pytest.approx(1)

    @given(seeds)
    def test_trace_dominates_spectral(self, seed):
        n = norms(cgauss(np.random.default_rng(seed), 5, 5))
        assert n.trace >= n.spectral
        assert n.frobenius >= n.spectral

    def test_vnorm(self):
        assert vnorm([3, 4j]) == 5.0


def test_semi_dissipative_generator_is_psd_part():
    V = semi_dissipative(np.random.default_rng(0), 4)
    assert np.min(np.linalg.eigvalsh((V + V.conj().T) / 2)) >= -1e-12
