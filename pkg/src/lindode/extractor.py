"""Reading results out of the encoded state.

Registers are ordered system-major: a purification is a vector of length
``d_sys * r`` with index ``sys * r + k`` for environment label k. The
system register is (marker qubit) x (n data qubits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import CheckFailed, InputError
from .lindblad import propagator_channel
from .ndme import ETA_FLOOR, evolve, initial_state, ndme_spec, second_stage_for
from .numkernel import KrausSet, choi_kraus, dagger, hermiticity_error, kron, vnorm
from .odecore import OdeProblem

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
MARKER_TOL = 1e-9
GROVER_TOL = 1e-8
FIDELITY_TOL = 1e-9
SUCCESS_TARGET = 0.999


@dataclass(frozen=True)
class Purification:
    state: np.ndarray
    sys_dim: int
    env_dim: int

    def __post_init__(self):
        s = np.asarray(self.state, dtype=complex).reshape(-1)
        if s.size != self.sys_dim * self.env_dim:
            raise InputError("purification length does not match sys_dim * env_dim")
        if abs(vnorm(s) - 1.0) > 1e-12:
            raise InputError(f"purification is not normalized (|S| = {vnorm(s):.15g})")
        object.__setattr__(self, "state", s)

    def matrix(self) -> np.ndarray:
        return self.state.reshape(self.sys_dim, self.env_dim)

    def reduced(self) -> np.ndarray:
        """Partial trace over the environment."""
        M = self.matrix()
        return M @ dagger(M)


def purify_via_kraus(Phi, psi0):
    """|S> = sum_k (K_k psi0) (x) |k> with Kraus operators of ``Phi``."""
    kraus = choi_kraus(Phi)
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if abs(vnorm(psi0) - 1.0) > 1e-12:
        raise InputError("psi0 must be normalized")
    cols = np.stack([K @ psi0 for K in kraus], axis=1)
    return Purification(cols.reshape(-1), cols.shape[0], cols.shape[1]), kraus


def environment_marker(K: KrausSet, n: int) -> np.ndarray:
    """E = sum_k c_k |k> where every K_k acts as c_k on the |1>-marked block."""
    d = 2 ** n
    if K[0].shape != (2 * d, 2 * d):
        raise InputError(f"Kraus operators must be {2 * d}x{2 * d} for n={n}")
    probe1 = np.zeros(2 * d, dtype=complex)
    probe1[d] = 1.0
    probe2 = np.zeros(2 * d, dtype=complex)
    probe2[d:] = 1.0 / math.sqrt(d)
    c = np.array([K_k[d, d] for K_k in K])
    for K_k, ck in zip(K, c):
        resid = max(
            vnorm(K_k @ probe1 - ck * probe1),
            vnorm(K_k @ probe2 - ck * probe2),
            float(np.max(np.abs(K_k[:, d:] - ck * np.eye(2 * d)[:, d:]))),
        )
        if resid > MARKER_TOL:
            raise CheckFailed(f"dilation does not preserve the marker block (residual {resid:.3g})")
    norm = vnorm(c)
    if abs(norm - 1.0) > MARKER_TOL:
        raise CheckFailed(f"environment marker has norm {norm:.12g}")
    return c


def good_component(S: Purification, E) -> np.ndarray:
    """(<0| (x) I (x) <E|) |S>, a vector on the data register."""
    M = S.matrix()
    return M[: S.sys_dim // 2] @ np.conj(E)


class GroverPlan(NamedTuple):
    eta: float
    theta: float
    k_star: int
    predicted_success: float
    expected_repetitions: float


def success_probability(theta, k) -> float:
    return math.sin((2 * k + 1) * theta) ** 2


def plan_grover(eta: float) -> GroverPlan:
    """Best of the three integers around pi/(4 theta) - 1/2; ties go to the smaller k."""
    if not eta > ETA_FLOOR:
        raise InputError(f"eta = {eta:.3g} is below the extraction threshold {ETA_FLOOR:g}")
    a = eta / math.sqrt(2.0)
    if a > 1:
        raise InputError(f"eta must be <= sqrt(2), got {eta}")
    theta = math.asin(a)
    k0 = round(math.pi / (4 * theta) - 0.5)
    best_k, best_p = None, -1.0
    for k in (k0 - 1, k0, k0 + 1):
        if k < 0:
            continue
        p = success_probability(theta, k)
        if p > best_p + 1e-12:
            best_k, best_p = k, p
    reps = 1.0 if best_p >= SUCCESS_TARGET else 1.0 / best_p
    return GroverPlan(eta, theta, best_k, best_p, reps)


class GroverResult(NamedTuple):
    state: np.ndarray
    extracted: np.ndarray
    success_prob: float
    fidelity: float
    k: int


def grover_extract(S: Purification, E, plan: GroverPlan, mu_T=None, k=None) -> GroverResult:
    """Apply (U2 U1)^k to |S>; U1 reflects about the marked subspace, U2 about |S>.

    ``extracted`` is the normalized data-register part of the good component.
    Fidelity is against ``mu_T`` when given, else against the good component
    of |S> itself.
    """
    E = np.asarray(E, dtype=complex)
    k = plan.k_star if k is None else int(k)
    d_half = S.sys_dim // 2
    s0 = S.state
    a = vnorm(good_component(S, E))
    if abs(a - plan.eta / math.sqrt(2.0)) > GROVER_TOL:
        raise CheckFailed(f"good-subspace amplitude {a:.12g} != eta/sqrt2 = {plan.eta / math.sqrt(2):.12g}")

    def project(x):
        X = x.reshape(S.sys_dim, S.env_dim)
        out = np.zeros_like(X)
        out[:d_half] = np.outer(X[:d_half] @ np.conj(E), E)
        return out.reshape(-1)

    x = s0.copy()
    for _ in range(k):
        x = x - 2.0 * project(x)
        x = x - 2.0 * s0 * np.vdot(s0, x)
    good = project(x)
    p = vnorm(good) ** 2
    expected = success_probability(plan.theta, k)
    if abs(p - expected) > GROVER_TOL:
        raise CheckFailed(f"success probability {p:.12g} deviates from sin^2((2k+1)theta) = {expected:.12g}")
    data = good.reshape(S.sys_dim, S.env_dim)[:d_half] @ np.conj(E)
    data = data / vnorm(data)
    ref = good_component(S, E) if mu_T is None else np.asarray(mu_T, dtype=complex)
    overlap = np.vdot(ref / vnorm(ref), data)
    fid = abs(overlap) ** 2
    if abs(overlap) > 0:
        data = data * (abs(overlap) / overlap)  # remove the unobservable global phase
    if fid < 1.0 - FIDELITY_TOL:
        raise CheckFailed(f"extracted-state fidelity {fid:.12g} below 1 - {FIDELITY_TOL:g}")
    return GroverResult(x, data, float(p), float(fid), k)


def extraction_pipeline(p: OdeProblem, mu_T=None) -> dict:
    """Purify the NDME channel output, locate the marker, and amplify."""
    spec = ndme_spec(p)
    Phi = propagator_channel(spec, p.T)
    psi0 = np.concatenate([p.mu0, p.mu0]) / math.sqrt(2.0)
    S, K = purify_via_kraus(Phi, psi0)
    E = environment_marker(K, p.n)
    g = good_component(S, E)
    eta = math.sqrt(2.0) * vnorm(g)
    plan = plan_grover(eta)
    res = grover_extract(S, E, plan, mu_T=mu_T)
    rho_T = Phi @ initial_state(p.mu0).reshape(-1)
    return {
        "purification": S,
        "kraus": K,
        "marker": E,
        "plan": plan,
        "result": res,
        "eta": eta,
        "mu_T": g / vnorm(g),
        "partial_trace_residual": float(np.max(np.abs(S.reduced() - rho_T.reshape(S.sys_dim, S.sys_dim)))),
    }


# --- measurement estimators ------------------------------------------------


def _pauli_expect(rho, P, O=None):
    d = rho.shape[0] // 2
    op = kron(P, np.eye(d) if O is None else O)
    return np.trace(op @ rho)


def echo_quadratures(rho_T1):
    """(<X (x) I>, <Y (x) I>) = (eta Re z, -eta Im z), z = <phi0|mu_T>."""
    rho = np.asarray(rho_T1, dtype=complex)
    return float(_pauli_expect(rho, PAULI_X).real), float(_pauli_expect(rho, PAULI_Y).real)


def echo_estimate(rho_T1) -> complex:
    """eta <phi0|mu_T> from the two Pauli quadratures."""
    x, y = echo_quadratures(rho_T1)
    return complex(x, -y)


def expval_estimate(rho_T2, O) -> float:
    """Tr((X (x) O) rho_T2) = eta^2 <mu_T|O|mu_T>."""
    O = np.asarray(O, dtype=complex)
    if hermiticity_error(O) > 1e-10 * max(1.0, float(np.max(np.abs(O)))):
        raise InputError("observable must be Hermitian")
    return float(_pauli_expect(np.asarray(rho_T2, dtype=complex), PAULI_X, O).real)


def echo_pipeline(p: OdeProblem, phi0=None):
    rho = evolve(p, phi0=phi0)
    return echo_estimate(rho), rho


def expval_pipeline(p: OdeProblem, O):
    rho_T = evolve(p)
    rho_T2 = second_stage_for(p, rho_T)
    return expval_estimate(rho_T2, O), rho_T2


def shots_emulate(true_value: float, shots: int, seed=0) -> float:
    """Mean of ``shots`` +-1 outcomes with expectation ``true_value``."""
    v = float(true_value)
    if abs(v) > 1.0 + 1e-12:
        raise InputError(f"expectation {v} outside [-1, 1]")
    if shots < 1:
        raise InputError("shots must be >= 1")
    v = min(max(v, -1.0), 1.0)
    rng = np.random.Generator(np.random.Philox(seed))
    ups = rng.binomial(shots, 0.5 * (1.0 + v))
    return (2.0 * ups - shots) / shots


def shot_sigma(true_value: float, shots: int) -> float:
    """Standard deviation of the +-1 sample mean."""
    return math.sqrt(max(0.0, 1.0 - true_value ** 2) / shots)


def estimation_budget(eta: float, eps: float, delta: float) -> dict:
    """Unit-constant query counts: echo, expectation value, amplitude estimation."""
    for name, v in (("eta", eta), ("eps", eps), ("delta", delta)):
        if not v > 0:
            raise InputError(f"{name} must be positive")
    log_d = math.log(1.0 / delta)
    return {
        "echo": log_d / (eta * eps),
        "expval": log_d / (eta ** 2 * eps),
        "amplitude_estimation": log_d / eps,
        "notes": "all O~ constants set to 1; order-of-magnitude prediction only",
    }
