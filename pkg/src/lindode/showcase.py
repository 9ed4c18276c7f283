"""Applications: Gibbs states, partition functions, non-Hermitian dynamics."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import CheckFailed, InputError, NotPSDError
from .extractor import Purification, shots_emulate
from .lindblad import (
    LindbladSpec,
    default_dt,
    effective_hamiltonian,
    propagate,
    sde_ensemble,
    trace_distance,
)
from .ndme import solve_homogeneous
from .numkernel import as_square, dagger, herm_eig, spectral_norm, trace_norm, vnorm
from .odecore import OdeProblem, reference_solve

Z_REL_TOL = 1e-6
FIDELITY_TOL = 1e-8
EMBED_TOL = 1e-7
MAX_GIBBS_QUBITS = 3


class GibbsResult(NamedTuple):
    purification: Purification
    Z_estimate: float
    Z_exact: float
    fidelity: float
    eta: float
    rho_beta: np.ndarray


def _check_gibbs_input(B, beta, n):
    B = as_square(B, "B")
    if not 1 <= n <= MAX_GIBBS_QUBITS:
        raise InputError(f"Gibbs preparation supports 1 <= n <= {MAX_GIBBS_QUBITS}, got {n}")
    if B.shape != (2 ** n, 2 ** n):
        raise InputError(f"B must be {2 ** n}x{2 ** n} for n={n}")
    if beta < 0:
        raise InputError("beta must be >= 0")
    w = herm_eig(B).eigenvalues
    if w[0] < -1e-8 * max(1.0, abs(w[-1])):
        raise NotPSDError(f"B is not PSD: eigenvalue {w[0]:.6g}")
    return B


def gibbs_problem(B, beta, n) -> OdeProblem:
    """Imaginary-time ODE: V = B (x) I on 2n qubits, T = beta/2, mu0 = |Omega>."""
    B = _check_gibbs_input(B, beta, n)
    d = 2 ** n
    omega = np.eye(d, dtype=complex).reshape(-1) / math.sqrt(d)
    return OdeProblem(2 * n, np.kron(B, np.eye(d)), omega, beta / 2.0)


def uhlmann_fidelity(rho, sigma) -> float:
    """(Tr |sqrt(rho) sqrt(sigma)|)^2."""
    def root(M):
        w, Q = herm_eig(M)
        return (Q * np.sqrt(np.clip(w, 0.0, None))) @ dagger(Q)
    return trace_norm(root(rho) @ root(sigma)) ** 2


def gibbs_prepare(B, beta, n) -> GibbsResult:
    """Purified Gibbs state from the NDME solver; checks Z and fidelity."""
    p = gibbs_problem(B, beta, n)
    d = 2 ** n
    sol = solve_homogeneous(p, rtol=1e-11)
    w, Q = herm_eig(as_square(B))
    boltz = np.exp(-beta * w)
    Z_exact = float(boltz.sum())
    rho_beta = (Q * (boltz / Z_exact)) @ dagger(Q)
    S = Purification(sol.mu_T, d, d)
    fid = min(1.0, uhlmann_fidelity(S.reduced(), rho_beta))
    Z_est = d * sol.eta ** 2
    if abs(Z_est - Z_exact) > Z_REL_TOL * Z_exact:
        raise CheckFailed(f"Z estimate {Z_est:.12g} differs from Tr exp(-beta B) = {Z_exact:.12g}")
    if fid < 1.0 - FIDELITY_TOL:
        raise CheckFailed(f"Gibbs fidelity {fid:.12g} below 1 - {FIDELITY_TOL:g}")
    return GibbsResult(S, Z_est, Z_exact, fid, sol.eta, rho_beta)


def partition_estimate(B, beta, n, shots=None, seed=0) -> float:
    """Z = 2^n eta^2.

    With ``shots``, the marked-subspace indicator (probability eta^2/2) is
    sampled as a +-1 observable of mean eta^2 - 1, and eta^2 = 1 + mean.
    """
    g = gibbs_prepare(B, beta, n)
    d = 2 ** n
    if shots is None:
        return g.Z_estimate
    mean = shots_emulate(g.eta ** 2 - 1.0, shots, seed)
    return d * (1.0 + mean)


def partition_shot_sigma(Z, n, shots) -> float:
    """One standard deviation of the shot-based Z estimate."""
    d = 2 ** n
    v = Z / d - 1.0
    return d * math.sqrt(max(0.0, 1.0 - v * v) / shots)


def nonhermitian_compare(H, jumps, psi0, T, dt=None, N=10_000, seed=0, samples=11, window_tol=1e-2):
    """Three views of H_eff = H - (i/2) sum G^dag G.

    (i) NDME solve of d mu/dt = -i H_eff mu, (ii) direct integration of the
    same, (iii) the SDE ensemble mean against the full Lindbladian.
    """
    H = as_square(H, "H")
    Gs = [as_square(G, "jump") for G in jumps]
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    d = H.shape[0]
    n = int(round(math.log2(d)))
    if 2 ** n != d:
        raise InputError("dimension must be a power of two")
    H_eff = effective_hamiltonian(H, Gs)
    p = OdeProblem(n, 1j * H_eff, psi0, T)
    times = np.linspace(0.0, T, samples)

    ref = reference_solve(p, t_eval=times)
    embed_err = []
    for t, y in zip(ref.times, ref.states):
        sol = solve_homogeneous(p.with_(T=float(t)), check_tol=None)
        embed_err.append(vnorm(sol.eta * sol.mu_T - y))
    embed_max = max(embed_err)

    spec = LindbladSpec.from_matrices(H, Gs)
    rho0 = np.outer(psi0, psi0.conj())
    curve = []
    for t, y in zip(ref.times, ref.states):
        rho = propagate(spec, rho0, float(t))
        phi = y / vnorm(y)
        curve.append(trace_distance(rho, np.outer(phi, phi.conj())))
    window = next((float(t) for t, c in zip(ref.times, curve) if c > window_tol), None)

    dt = default_dt(H_eff) if dt is None else dt
    mean, stderr = sde_ensemble(H_eff, Gs, psi0, T, dt=dt, N=N, seed=seed)
    rho_T = propagate(spec, rho0, T)
    scale = sde_scale(H_eff, Gs, T)
    dev = np.abs(mean - rho_T)
    allowed = 3.0 * stderr + 5.0 * dt * scale
    report = {
        "times": ref.times.tolist(),
        "eta": [vnorm(y) for y in ref.states],
        "embedding_error": embed_err,
        "embedding_max_error": embed_max,
        "embedding_ok": embed_max <= EMBED_TOL,
        "trace_distance": curve,
        "window_end": window,
        "window_tol": window_tol,
        "sde_max_deviation": float(dev.max()),
        "sde_max_allowed": float(allowed[np.unravel_index(np.argmax(dev - allowed), dev.shape)]),
        "sde_ok": bool(np.all(dev <= allowed)),
        "dt": dt,
        "N": N,
    }
    report["passed"] = report["embedding_ok"] and report["sde_ok"]
    return report


def sde_scale(H_eff, Gs, T) -> float:
    """First-order weak error coefficient, T s^2 / 2 with s = |H_eff| + sum |G|^2."""
    s = spectral_norm(H_eff) + sum(spectral_norm(G) ** 2 for G in Gs)
    return 0.5 * max(T, 1e-300) * s * s
