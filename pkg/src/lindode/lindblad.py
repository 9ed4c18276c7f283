"""Lindbladian generator, Liouvillian matrix, propagation and unravelling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, expm_multiply

from .errors import CheckFailed, InputError
from .numkernel import (
    as_square,
    choi_matrix,
    dagger,
    expm,
    hermiticity_error,
    spectral_norm,
    trace_norm,
    unvec,
    vec,
)
from .odecore import TimeDependentMatrix, breakpoints_in

STATE_HERM_TOL = 1e-10
STATE_TRACE_TOL = 1e-10
STATE_NEG_TOL = 1e-8
CHANNEL_TOL = 1e-9
MAX_HALVINGS = 14
ROMBERG_COLUMNS = 4
DENSE_LIMIT = 16  # above this dimension constant generators act matrix-free


@dataclass(frozen=True, eq=False)
class LindbladSpec:
    """Hamiltonian H(t) and jump operators F_i(t)."""

    H: TimeDependentMatrix
    jumps: tuple = ()

    def __post_init__(self):
        H = TimeDependentMatrix.coerce(self.H, "H")
        jumps = tuple(TimeDependentMatrix.coerce(F, f"F{i}") for i, F in enumerate(self.jumps))
        d = H.dim
        if H.shape != (d, d) or any(F.shape != (d, d) for F in jumps):
            raise InputError("H and all jump operators must be square and of one dimension")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "jumps", jumps)
        for t in (0.0,) + tuple(H.breakpoints[:3]):
            err = hermiticity_error(H(t))
            if err > 1e-10 * max(1.0, spectral_norm(H(t))):
                raise InputError(f"H({t:g}) is not Hermitian (error {err:.3g})")

    @classmethod
    def from_matrices(cls, H, jumps: Sequence = ()):
        return cls(TimeDependentMatrix.coerce(H), tuple(jumps))

    @property
    def dim(self) -> int:
        return self.H.dim

    @property
    def is_time_independent(self) -> bool:
        return self.H.is_constant and all(F.is_constant for F in self.jumps)

    def parts(self):
        return [self.H, *self.jumps]

    def at(self, t):
        return self.H(t), [F(t) for F in self.jumps]

    def shifted(self, t0):
        return LindbladSpec(self.H.shifted(t0), tuple(F.shifted(t0) for F in self.jumps))


def apply_generator(spec: LindbladSpec, rho, t=0.0) -> np.ndarray:
    """-i[H, rho] + sum_i (F rho F^dag - 1/2 {rho, F^dag F}) at time t."""
    H, Fs = spec.at(t)
    rho = np.asarray(rho, dtype=complex)
    out = -1j * (H @ rho - rho @ H)
    for F in Fs:
        FdF = dagger(F) @ F
        out += F @ rho @ dagger(F) - 0.5 * (rho @ FdF + FdF @ rho)
    return out


def liouvillian_from_matrices(H, Fs) -> np.ndarray:
    d = H.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for F in Fs:
        FdF = dagger(F) @ F
        L += np.kron(F, F.conj()) - 0.5 * np.kron(FdF, eye) - 0.5 * np.kron(eye, FdF.T)
    return L


def liouvillian_matrix(spec: LindbladSpec, t=0.0) -> np.ndarray:
    """d^2 x d^2 matrix L with vec(generator(rho)) = L vec(rho) (row-major vec)."""
    H, Fs = spec.at(t)
    return liouvillian_from_matrices(H, Fs)


class CptpReport(NamedTuple):
    kind: str
    passed: bool
    hermiticity: float
    trace_error: float
    min_eigenvalue: float

    def describe(self) -> str:
        tag = "ok" if self.passed else "FAIL"
        return (f"{self.kind} {tag}: herm={self.hermiticity:.2e} "
                f"trace={self.trace_error:.2e} min_eig={self.min_eigenvalue:.2e}")


def check_state(rho, herm_tol=STATE_HERM_TOL, trace_tol=STATE_TRACE_TOL, neg_tol=STATE_NEG_TOL) -> CptpReport:
    rho = as_square(rho, "density matrix")
    herm = hermiticity_error(rho)
    tr = abs(np.trace(rho) - 1.0)
    lam = float(np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0])
    ok = herm <= herm_tol and tr <= trace_tol and lam >= -neg_tol
    return CptpReport("state", bool(ok), herm, float(tr), lam)


def check_channel(Phi, tol=CHANNEL_TOL) -> CptpReport:
    """Choi positivity and trace preservation of a row-major superoperator.

    ``trace_error`` is max |vec(I)^dag Phi - vec(I)^dag|; ``hermiticity`` is the
    Hermiticity defect of the Choi matrix (Hermiticity preservation).
    """
    Phi = as_square(Phi, "superoperator")
    d = int(round(math.sqrt(Phi.shape[0])))
    J = choi_matrix(Phi)
    herm = hermiticity_error(J)
    lam = float(np.linalg.eigvalsh(0.5 * (J + dagger(J)))[0])
    vI = vec(np.eye(d))
    tp = float(np.max(np.abs(vI @ Phi - vI)))
    ok = herm <= tol and tp <= tol and lam >= -tol
    return CptpReport("channel", bool(ok), herm, tp, lam)


def cptp_check(obj, channel=False) -> CptpReport:
    """Report-only validation of a density matrix or (``channel=True``) a superoperator."""
    return check_channel(obj) if channel else check_state(obj)


def _initial_substeps(spec, t0, t1, steps):
    norm = max(spectral_norm(liouvillian_matrix(spec, t)) for t in breakpoints_in(spec.parts(), t0, t1))
    return max(int(steps), int(math.ceil((t1 - t0) * norm)), 1)


def _midpoint_product(spec, edges, counts):
    d2 = spec.dim ** 2
    Phi = np.eye(d2, dtype=complex)
    for a, c, k in zip(edges[:-1], edges[1:], counts):
        h = (c - a) / k
        for j in range(k):
            Phi = expm(liouvillian_matrix(spec, a + (j + 0.5) * h) * h) @ Phi
    return Phi


class OrderedChannel(NamedTuple):
    Phi: np.ndarray
    substeps: int
    change: float


def ordered_channel(spec: LindbladSpec, t0, t1, steps=1, tol=1e-10, probe=None) -> OrderedChannel:
    """Time-ordered propagator of a time-dependent Lindbladian over [t0, t1].

    Midpoint-exponential products on segments aligned with all knots. The
    product is symmetric in time, so its error expands in even powers of the
    step; the number of substeps is doubled and the products are combined in
    a Romberg table (Richardson extrapolation in h^2, at most
    ``ROMBERG_COLUMNS`` levels) until successive diagonal entries differ by
    less than ``tol``. With a ``probe`` density matrix the change is the
    trace norm of the difference of the propagated probes, otherwise the
    state-independent bound ``sqrt(d) |dPhi|_2``.

    Every midpoint product is exactly CPTP and every Romberg entry is an
    affine combination of them, hence exactly trace preserving; positivity
    holds up to the extrapolation error.
    """
    d = spec.dim

    def measure(delta):
        if probe is None:
            return math.sqrt(d) * spectral_norm(delta)
        return trace_norm(unvec(delta @ vec(probe), d))

    edges = breakpoints_in(spec.parts(), t0, t1)
    n0 = _initial_substeps(spec, t0, t1, steps)
    # per-segment counts are fixed once and doubled exactly, so h halves everywhere
    counts = [max(1, math.ceil(n0 * (c - a) / (t1 - t0))) for a, c in zip(edges[:-1], edges[1:])]
    row = [_midpoint_product(spec, edges, counts)]
    change = math.inf
    for _ in range(MAX_HALVINGS):
        counts = [2 * k for k in counts]
        new = [_midpoint_product(spec, edges, counts)]
        for j in range(1, min(len(row), ROMBERG_COLUMNS - 1) + 1):
            new.append(new[j - 1] + (new[j - 1] - row[j - 1]) / (4 ** j - 1))
        change = measure(new[-1] - row[-1])
        row = new
        if change < tol:
            return OrderedChannel(row[-1], sum(counts), change)
    raise CheckFailed(f"time-ordered propagation did not converge (last change {change:.3g})")


def propagator_channel(spec: LindbladSpec, T, t0=0.0, steps=1, tol=1e-10, validate=True) -> np.ndarray:
    """Superoperator Phi with Phi vec(rho0) = vec(rho(t0 + T))."""
    if T < 0:
        raise InputError("evolution time must be >= 0")
    d2 = spec.dim ** 2
    if T == 0:
        Phi = np.eye(d2, dtype=complex)
    elif spec.is_time_independent:
        Phi = expm(liouvillian_matrix(spec) * T)
    else:
        Phi = ordered_channel(spec, t0, t0 + T, steps, tol).Phi
    if validate:
        rep = check_channel(Phi)
        if not rep.passed:
            raise CheckFailed(f"propagator failed CPTP validation: {rep.describe()}")
    return Phi


def _adjoint_generator(H, Fs, X):
    """Hilbert-Schmidt adjoint: i[H, X] + sum F^dag X F - 1/2 {F^dag F, X}."""
    out = 1j * (H @ X - X @ H)
    for F in Fs:
        FdF = dagger(F) @ F
        out += dagger(F) @ X @ F - 0.5 * (X @ FdF + FdF @ X)
    return out


def _matrix_free_evolve(spec: LindbladSpec, rho0, T) -> np.ndarray:
    """exp(T L) vec(rho0) by truncated Taylor steps (scipy), never forming L."""
    d = spec.dim
    H, Fs = spec.at(0.0)
    gen = LindbladSpec.from_matrices(H, Fs)
    # Tr L = sum_i |Tr F_i|^2 - d Tr(F_i^dag F_i); the commutator part is traceless
    trace = sum(abs(np.trace(F)) ** 2 - d * np.vdot(F, F).real for F in Fs)
    op = LinearOperator(
        (d * d, d * d), dtype=complex,
        matvec=lambda v: vec(apply_generator(gen, unvec(np.ravel(v), d))),
        rmatvec=lambda v: vec(_adjoint_generator(H, Fs, unvec(np.ravel(v), d))),
    )
    return unvec(expm_multiply(op * T, vec(rho0), traceA=trace * T), d)


def propagate(spec: LindbladSpec, rho0, T, steps=1, t0=0.0, tol=1e-10) -> np.ndarray:
    """rho(t0 + T) under the Lindbladian, validated as a density matrix."""
    rho0 = as_square(rho0, "rho0")
    d = spec.dim
    if rho0.shape != (d, d):
        raise InputError(f"rho0 must be {d}x{d}")
    if T == 0:
        rho = rho0.copy()
    elif spec.is_time_independent and d > DENSE_LIMIT:
        rho = _matrix_free_evolve(spec, rho0, T)
    elif spec.is_time_independent:
        rho = unvec(expm(liouvillian_matrix(spec) * T) @ vec(rho0), d)
    else:
        rho = unvec(ordered_channel(spec, t0, t0 + T, steps, tol, probe=rho0).Phi @ vec(rho0), d)
    rep = check_state(rho)
    if not rep.passed:
        raise CheckFailed(f"propagated state failed validation: {rep.describe()}")
    return rho


def count_substeps(spec: LindbladSpec, T, tol=1e-10, steps=1) -> int:
    """Number of midpoint substeps the step control settles on over [0, T]."""
    return ordered_channel(spec, 0.0, T, steps, tol).substeps


def default_dt(H_eff) -> float:
    return min(0.01, 0.1 / max(spectral_norm(H_eff), 1e-300))


SDE_CHUNK = 1000


def sde_ensemble(H_eff, jumps, psi0, T, dt=None, N=10_000, seed=0):
    """Euler-Maruyama ensemble for d psi = -i H_eff psi dt + sum_i G_i psi dW_i.

    Real Wiener increments (variance dt), one per jump; trajectories are not
    renormalized. Trajectories run in fixed chunks of 1000, chunk ``c`` using
    the ``c``-th child of ``SeedSequence(seed)``, so the result depends only
    on ``seed``. Returns ``(mean, stderr)`` where ``stderr`` is the
    componentwise standard error of the sample mean of psi psi^dag.
    """
    H_eff = as_square(H_eff, "H_eff")
    Gs = [as_square(G, "jump") for G in jumps]
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    d = H_eff.shape[0]
    if dt is None:
        dt = default_dt(H_eff)
    if dt * spectral_norm(H_eff) > 0.1 + 1e-12:
        raise InputError(f"dt*|H_eff| = {dt * spectral_norm(H_eff):.3g} exceeds 0.1")
    nsteps = max(1, int(round(T / dt)))
    dt = T / nsteps if T > 0 else 0.0
    drift = np.eye(d) - 1j * dt * H_eff
    sqdt = math.sqrt(dt)

    sum1 = np.zeros((d, d), dtype=complex)
    sum_re2 = np.zeros((d, d))
    sum_im2 = np.zeros((d, d))
    children = np.random.SeedSequence(seed).spawn(int(math.ceil(N / SDE_CHUNK)))
    done = 0
    for child in children:
        m = min(SDE_CHUNK, N - done)
        rng = np.random.default_rng(child)
        psi = np.tile(psi0, (m, 1))
        for _ in range(nsteps):
            new = psi @ drift.T
            if Gs:
                dW = rng.standard_normal((m, len(Gs))) * sqdt
                for i, G in enumerate(Gs):
                    new += dW[:, i:i + 1] * (psi @ G.T)
            psi = new
        outer = psi[:, :, None] * psi.conj()[:, None, :]
        sum1 += outer.sum(axis=0)
        sum_re2 += (outer.real ** 2).sum(axis=0)
        sum_im2 += (outer.imag ** 2).sum(axis=0)
        done += m
    mean = sum1 / N
    var = (sum_re2 / N - mean.real ** 2) + (sum_im2 / N - mean.imag ** 2)
    stderr = np.sqrt(np.clip(var, 0.0, None) * N / max(N - 1, 1) / N)
    return mean, stderr


def trace_distance(rho, sigma) -> float:
    return 0.5 * trace_norm(np.asarray(rho) - np.asarray(sigma))


def effective_hamiltonian(H, jumps) -> np.ndarray:
    """H - (i/2) sum_i G_i^dag G_i."""
    H = as_square(H, "H")
    return H - 0.5j * sum((dagger(G) @ G for G in jumps), np.zeros_like(H))


def jump_spectrum_check(spec: LindbladSpec, t=0.0) -> float:
    """Largest |vec(I)^dag L| entry: zero for any valid generator."""
    L = liouvillian_matrix(spec, t)
    vI = vec(np.eye(spec.dim))
    return float(np.max(np.abs(vI @ L)))

