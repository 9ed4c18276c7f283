"""Non-diagonal density matrix encoding of a linear ODE.

The solver dilates dmu/dt = -V mu on n qubits into a Lindbladian on 1 + n
qubits with block-diagonal H = diag(A, 0) and a single jump
F = diag(sqrt(2B), 0), where V = B + iA. Starting from
|+><+| (x) |mu0><mu0|, the upper-right block of the evolved state is
(1/2) mu(T) <mu0|.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import CheckFailed, InputError
from .lindblad import LindbladSpec, check_state, propagate
from .numkernel import dagger, psd_sqrt, vnorm
from .odecore import (
    OdeProblem,
    TimeDependentMatrix,
    hermitian_split,
    reference_solve,
    require_semi_dissipative,
)

ETA_FLOOR = 1e-8
REFERENCE_TOL = 1e-7


@dataclass(frozen=True)
class NdmeEncoding:
    """(l + n, |s1>, |s2>, gamma)-encoding of ``block`` inside ``rho``."""

    rho: np.ndarray
    l: int = 1
    s1: int = 0
    s2: int = 1
    gamma: float = 0.5

    def block(self) -> np.ndarray:
        return extract_block(self.rho, self.s1, self.s2, ancillas=self.l)

    def encoded_matrix(self) -> np.ndarray:
        return self.block() / self.gamma


def _embed(X, where):
    X = TimeDependentMatrix.coerce(X)
    lo = 0 if where == "upper" else 1

    def embed(M):
        d = M.shape[0]
        out = np.zeros((2 * d, 2 * d), dtype=complex)
        out[lo * d:(lo + 1) * d, lo * d:(lo + 1) * d] = M
        return out

    return X.map(embed)


def dilate(A, jumps=(), where="upper") -> LindbladSpec:
    """Block-diagonal Lindbladian H = diag(A, 0), F_i = diag(G_i, 0).

    ``where="lower"`` gives the second-stage generator diag(0, A), diag(0, G_i).
    """
    A = TimeDependentMatrix.coerce(A, "A")
    jumps = [TimeDependentMatrix.coerce(G, "G") for G in jumps]
    if any(G.shape != A.shape for G in jumps):
        raise InputError("A and jump operators must have equal dimensions")
    return LindbladSpec(_embed(A, where), tuple(_embed(G, where) for G in jumps))


def default_jump(B) -> np.ndarray:
    """sqrt(2B), the single jump realizing dissipation B."""
    return psd_sqrt(2.0 * B)


def ndme_parts(p: OdeProblem, jump: Optional[Callable] = None):
    """(A(t), [G(t)]) for the problem; B = 0 yields no jump operators."""
    jump = jump or default_jump
    A = p.V.map(lambda V: hermitian_split(V)[0], name="A")
    G = p.V.map(lambda V: jump(hermitian_split(V)[1]), name="G")
    if G.is_constant and not np.any(G.value):
        return A, []
    return A, [G]


def ndme_spec(p: OdeProblem, jump: Optional[Callable] = None) -> LindbladSpec:
    A, Gs = ndme_parts(p, jump)
    return dilate(A, Gs)


def _unit(v, name):
    v = np.asarray(v, dtype=complex).reshape(-1)
    if abs(vnorm(v) - 1.0) > 1e-12:
        raise InputError(f"{name} must be normalized (|{name}| = {vnorm(v):.15g})")
    return v


def initial_state(mu0, phi0=None) -> np.ndarray:
    """(1/2)(|0>|mu0> + |1>|phi0>)(h.c.); upper-right block (1/2)|mu0><phi0|."""
    mu0 = _unit(mu0, "mu0")
    phi0 = mu0 if phi0 is None else _unit(phi0, "phi0")
    if phi0.shape != mu0.shape:
        raise InputError("mu0 and phi0 must have equal length")
    psi = np.concatenate([mu0, phi0]) / np.sqrt(2.0)
    return np.outer(psi, psi.conj())


def extract_block(rho, s1=0, s2=1, ancillas=1) -> np.ndarray:
    """(<s1| (x) I) rho (|s2> (x) I) for an ancilla register of ``ancillas`` qubits."""
    if s1 == s2:
        raise InputError("marker states must differ")
    rho = np.asarray(rho)
    d = rho.shape[0] >> ancillas
    return rho[s1 * d:(s1 + 1) * d, s2 * d:(s2 + 1) * d].copy()


def blocks(rho):
    """(upper-left, upper-right, lower-left, lower-right) for one ancilla."""
    d = rho.shape[0] // 2
    return rho[:d, :d], rho[:d, d:], rho[d:, :d], rho[d:, d:]


class HomogeneousSolution(NamedTuple):
    mu_T: np.ndarray
    eta: float
    rho_T: np.ndarray


def evolve(p: OdeProblem, phi0=None, jump=None, T=None) -> np.ndarray:
    """rho_T for initial state (|0>|mu0> + |1>|phi0>)/sqrt2 (phi0 defaults to mu0)."""
    spec = ndme_spec(p, jump)
    return propagate(spec, initial_state(p.mu0, phi0), p.T if T is None else T)


def block_solution(rho_T, right) -> np.ndarray:
    """2 * block * right, i.e. the unnormalized solution vector."""
    return 2.0 * extract_block(rho_T) @ np.asarray(right, dtype=complex)


def solve_homogeneous(p: OdeProblem, jump=None, check_tol=REFERENCE_TOL, rtol=1e-10) -> HomogeneousSolution:
    """Solve the homogeneous ODE through the Lindbladian dilation.

    The result is compared with :func:`reference_solve`; a 2-norm mismatch
    of ``eta * mu_T`` above ``check_tol`` raises :class:`CheckFailed`.
    ``check_tol=None`` skips the comparison.
    """
    if p.b is not None:
        raise InputError("solve_homogeneous requires b to be absent")
    require_semi_dissipative(p.V, p.T)
    rho_T = evolve(p, jump=jump)
    w = block_solution(rho_T, p.mu0)
    eta = vnorm(w)
    if eta < ETA_FLOOR:
        raise CheckFailed(f"solution norm vanished (eta = {eta:.3g}); extraction ill-posed")
    if check_tol is not None:
        ref = reference_solve(p, rtol=rtol).final
        err = vnorm(w - ref)
        if err > check_tol:
            raise CheckFailed(f"NDME solution differs from reference by {err:.3g} > {check_tol:g}")
    return HomogeneousSolution(w / eta, eta, rho_T)


def second_stage(rho_T, A, jumps, T, steps=1) -> np.ndarray:
    """Evolve rho_T for another T under H' = diag(0, A), F' = diag(0, G_i).

    The upper-right block becomes (1/2) eta^2 |mu_T><mu_T| and both diagonal
    blocks equal sigma_T / 2.
    """
    spec = dilate(A, jumps, where="lower")
    rho = propagate(spec, rho_T, T, steps=steps)
    rep = check_state(rho)
    if not rep.passed:
        raise CheckFailed(f"second-stage state invalid: {rep.describe()}")
    return rho


def second_stage_for(p: OdeProblem, rho_T, jump=None) -> np.ndarray:
    A, Gs = ndme_parts(p, jump)
    return second_stage(rho_T, A, Gs, p.T)


def inhomogeneous_solve(p: OdeProblem, m: int, jump=None):
    """(mu_T, eta) for dmu/dt = -V mu + b by composing NDME solutions.

    The homogeneous block is combined with (T/m) sum_j |b(t_j)| times the
    block solution of an encoding started at t_j from b(t_j)/|b(t_j)|, at
    midpoint nodes t_j = (j + 1/2) T / m.
    """
    if m < 1:
        raise InputError("number of slices must be >= 1")
    if p.b is None:
        sol = solve_homogeneous(p, jump=jump)
        return sol.mu_T, sol.eta
    require_semi_dissipative(p.V, p.T)
    spec = ndme_spec(p, jump)
    rho_T = propagate(spec, initial_state(p.mu0), p.T)
    total = block_solution(rho_T, p.mu0)
    h = p.T / m
    for j in range(m):
        tj = (j + 0.5) * h
        bj = p.b_at(tj)
        nb = vnorm(bj)
        if nb == 0.0:
            continue
        bhat = bj / nb
        rho_j = propagate(spec, initial_state(bhat), p.T - tj, t0=tj)
        total = total + h * nb * block_solution(rho_j, bhat)
    eta = vnorm(total)
    if eta < ETA_FLOOR:
        raise CheckFailed(f"solution norm vanished (eta = {eta:.3g}); extraction ill-posed")
    return total / eta, eta


def hermitian_conjugate_defect(rho) -> float:
    _, ur, ll, _ = blocks(rho)
    return float(np.max(np.abs(ll - dagger(ur))))
