"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays. Vectorization is row-major::

    vec(A @ rho @ B) == kron(A, B.T) @ vec(rho)

and every superoperator in the package uses this convention.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import InputError, NotPSDError

HERMITIAN_TOL = 1e-10
PSD_CLIP_TOL = 1e-8
KRAUS_DROP_REL = 1e-12
CHOI_NEG_TOL = 1e-9


def as_matrix(M, name="matrix") -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError(f"{name} has non-finite entries")
    return M


def as_square(M, name="matrix") -> np.ndarray:
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise InputError(f"{name} must be square, got shape {M.shape}")
    return M


def dagger(M):
    return np.conj(np.swapaxes(M, -1, -2))


def hermiticity_error(M) -> float:
    M = np.asarray(M)
    return float(np.max(np.abs(M - dagger(M)))) if M.size else 0.0


def expm(M) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade via scipy)."""
    M = as_square(M)
    return scipy.linalg.expm(M)


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        Q = self.eigenvectors
        return (Q * self.eigenvalues) @ dagger(Q)


def herm_eig(M, tol=HERMITIAN_TOL) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized before decomposition; deviations from
    Hermiticity larger than ``tol * max(1, |M|)`` are rejected.
    """
    M = as_square(M)
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    err = hermiticity_error(M)
    if err > tol * scale:
        raise InputError(f"matrix is not Hermitian (max |M - M^dag| = {err:.3g})")
    w, Q = np.linalg.eigh(0.5 * (M + dagger(M)))
    return HermitianEig(w, Q)


def apply_spectral(M, fn) -> np.ndarray:
    """Q f(Lambda) Q^dag for Hermitian M."""
    w, Q = herm_eig(M)
    return (Q * fn(w)) @ dagger(Q)


def psd_sqrt(B) -> np.ndarray:
    """Unique positive semi-definite square root.

    Eigenvalues in ``[-1e-8 * max(1, |B|), 0)`` are treated as round-off and
    clipped; anything more negative raises :class:`NotPSDError`.
    """
    w, Q = herm_eig(B)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and w[0] < -PSD_CLIP_TOL * scale:
        raise NotPSDError(f"matrix is not PSD: eigenvalue {w[0]:.6g}")
    return (Q * np.sqrt(np.clip(w, 0.0, None))) @ dagger(Q)


def vec(rho) -> np.ndarray:
    return np.asarray(rho).reshape(-1)


def unvec(v, d=None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise InputError(f"cannot unvec length {v.size} into a square matrix")
    return v.reshape(d, d)


def kron(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def sandwich_superop(A, B) -> np.ndarray:
    """Superoperator of rho -> A rho B."""
    return np.kron(A, np.asarray(B).T)


class Norms(NamedTuple):
    spectral: float
    trace: float
    frobenius: float


def norms(M) -> Norms:
    M = as_matrix(M)
    s = np.linalg.svd(M, compute_uv=False)
    return Norms(float(s[0]) if s.size else 0.0, float(np.sum(s)), float(np.linalg.norm(M)))


def spectral_norm(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def trace_norm(M) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(M), compute_uv=False)))


def vnorm(v) -> float:
    return float(np.linalg.norm(np.asarray(v).reshape(-1)))


class KrausSet:
    """Kraus operators of a channel, all of shape (d_out, d_in)."""

    def __init__(self, operators: Sequence[np.ndarray]):
        ops = [np.asarray(K, dtype=complex) for K in operators]
        if not ops:
            raise InputError("empty Kraus set")
        shape = ops[0].shape
        if any(K.shape != shape for K in ops):
            raise InputError("Kraus operators must share one shape")
        self.operators = tuple(ops)

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    def __getitem__(self, k):
        return self.operators[k]

    def apply(self, rho) -> np.ndarray:
        return sum(K @ rho @ dagger(K) for K in self.operators)

    def completeness_error(self) -> float:
        d_in = self.operators[0].shape[1]
        S = sum(dagger(K) @ K for K in self.operators)
        return float(np.max(np.abs(S - np.eye(d_in))))

    def superoperator(self) -> np.ndarray:
        return sum(np.kron(K, K.conj()) for K in self.operators)


def choi_matrix(Phi) -> np.ndarray:
    """Choi matrix sum_kl Phi(|k><l|) (x) |k><l| of a row-major superoperator."""
    Phi = as_square(Phi, "superoperator")
    d = int(round(np.sqrt(Phi.shape[0])))
    if d * d != Phi.shape[0]:
        raise InputError(f"superoperator side {Phi.shape[0]} is not a square number")
    # Phi[(i,j),(k,l)] = Phi(|k><l|)[i,j]  ->  J[(i,k),(j,l)]
    return Phi.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def choi_kraus(Phi, neg_tol=CHOI_NEG_TOL, check_tp=True) -> KrausSet:
    """Kraus decomposition from the eigendecomposition of the Choi matrix."""
    J = choi_matrix(Phi)
    d = int(round(np.sqrt(J.shape[0])))
    w, Q = herm_eig(J, tol=1e-9)
    if w[0] < -neg_tol:
        raise NotPSDError(f"map is not completely positive: Choi eigenvalue {w[0]:.3g}")
    keep = w > KRAUS_DROP_REL * w[-1]
    ops = [np.sqrt(lam) * Q[:, k].reshape(d, d) for lam, k in zip(w[keep], np.flatnonzero(keep))]
    ops.reverse()  # dominant operator first
    kraus = KrausSet(ops)
    if check_tp:
        err = kraus.completeness_error()
        if err > neg_tol:
            raise InputError(f"map is not trace preserving (|sum K^dag K - I| = {err:.3g})")
    return kraus
