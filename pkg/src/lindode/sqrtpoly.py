"""Odd polynomial approximation of sqrt, and the direct-access jump operator.

In the direct-access model only V(t) is available, so the jump operator
sqrt(2B) has to be synthesized as a polynomial of B/alpha. We fit an odd
Chebyshev series P with |P(x) - sqrt(x)/2| <= eps on [delta, 1] and then
use G = 2 sqrt(2 alpha) P(B/alpha). Oddness makes P(0) = 0 exact, which
keeps ker B in the kernel of G.

Matrix application is spectral (Q P(Lambda) Q^dag), standing in for a
singular-value transformation circuit.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import minimize_scalar

from .budget import CostParams, predict_theorem1
from .errors import CheckFailed, InputError, SpectrumError
from .ndme import solve_homogeneous
from .numkernel import dagger, herm_eig, spectral_norm, vnorm
from .odecore import (
    OdeProblem,
    ZERO_EIG_REL,
    alpha_bound,
    hermitian_split,
    reference_solve,
    spectral_gap_over,
)

DEGREE_CAP = 5000
NODES_PER_DEGREE = 20
CERT_GRID = 10_000
BOUND_GRID = 20_001
ALPHA_SLACK = 1e-10
GAP_SLACK = 1e-9
EPS_SPLIT = 10.0


@dataclass(frozen=True)
class OddChebyPoly:
    """Odd Chebyshev series; ``coefficients[j]`` multiplies T_{2j+1}."""

    coefficients: np.ndarray
    delta: float
    eps: float
    bound_ok: bool
    target_eps: float = float("nan")

    @property
    def degree(self) -> int:
        return 2 * len(self.coefficients) - 1

    def full_series(self) -> np.ndarray:
        c = np.zeros(self.degree + 1)
        c[1::2] = self.coefficients
        return c

    def __call__(self, x):
        return cheb.chebval(x, self.full_series())


@dataclass(frozen=True)
class ScaledHermitian:
    """Hermitian matrix carried with a normalization alpha >= |matrix|."""

    matrix: np.ndarray
    alpha: float
    _eig: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        eig = herm_eig(M)
        norm = float(np.max(np.abs(eig.eigenvalues))) if M.size else 0.0
        if not self.alpha > 0:
            raise InputError(f"alpha must be positive, got {self.alpha}")
        if norm > self.alpha * (1 + ALPHA_SLACK):
            raise InputError(f"alpha={self.alpha:.6g} is below the spectral norm {norm:.6g}")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "_eig", eig)

    @property
    def eig(self):
        return self._eig


def _fit(degree, delta):
    m = NODES_PER_DEGREE * degree
    x = delta + (1 - delta) * 0.5 * (1 + np.cos(np.linspace(0.0, np.pi, m)))
    A = cheb.chebvander(x, degree)[:, 1::2]
    c, *_ = np.linalg.lstsq(A, 0.5 * np.sqrt(x), rcond=None)
    return c


def _cert_grid(delta):
    return delta + (1 - delta) * 0.5 * (1 + np.cos(np.linspace(0.0, np.pi, CERT_GRID)))


def _sup_error(full, delta, refine):
    """Max |P - sqrt/2| on [delta, 1]: dense grid, then polish each local peak."""
    xs = np.sort(_cert_grid(delta))
    err = np.abs(cheb.chebval(xs, full) - 0.5 * np.sqrt(xs))
    best = float(err.max())
    if not refine:
        return best
    f = lambda x: -abs(cheb.chebval(x, full) - 0.5 * math.sqrt(x))
    peaks = [i for i in range(len(xs)) if (i == 0 or err[i] >= err[i - 1]) and (i == len(xs) - 1 or err[i] >= err[i + 1])]
    for i in peaks:
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        if hi > lo:
            r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
            best = max(best, -float(r.fun))
    return best


def _sup_abs(full):
    xs = np.linspace(0.0, 1.0, BOUND_GRID)  # odd: |P| symmetric
    return float(np.max(np.abs(cheb.chebval(xs, full))))


def _certify(c, delta, eps):
    """(coefficients, certified error, bound_ok) or None when eps is missed."""
    full = np.zeros(2 * len(c))
    full[1::2] = c
    if _sup_error(full, delta, refine=False) > eps:
        return None
    if _sup_abs(full) > 1.0:
        full = full / (1.0 + eps)
    err = _sup_error(full, delta, refine=True)
    if err > eps:
        return None
    return full[1::2].copy(), err, _sup_abs(full) <= 1.0


@functools.lru_cache(maxsize=256)
def fit_odd_sqrt(delta: float, eps: float) -> OddChebyPoly:
    """Smallest-degree odd least-squares fit certified to ``eps`` on [delta, 1].

    The degree is doubled until certification passes and then bisected
    over odd degrees.
    """
    if not (0 < delta <= 0.5):
        raise InputError(f"delta must lie in (0, 1/2], got {delta}")
    if not (0 < eps <= 0.5):
        raise InputError(f"eps must lie in (0, 1/2], got {eps}")
    lo, hi, found = 0, 1, None
    while True:
        found = _certify(_fit(hi, delta), delta, eps)
        if found:
            break
        if hi >= DEGREE_CAP:
            full = np.zeros(hi + 1)
            full[1::2] = _fit(hi, delta)
            raise CheckFailed(
                f"degree cap {DEGREE_CAP} reached; achieved error {_sup_error(full, delta, False):.3g} > {eps:g}"
            )
        lo, hi = hi, min(2 * hi + 1, DEGREE_CAP | 1)
    while hi - lo > 2:
        mid = (lo + hi) // 2
        mid = mid if mid % 2 else mid + 1
        if mid >= hi:
            break
        cand = _certify(_fit(mid, delta), delta, eps)
        if cand:
            hi, found = mid, cand
        else:
            lo = mid
    coeffs, err, ok = found
    return OddChebyPoly(coeffs, float(delta), err, ok, float(eps))


def eval_poly(P: OddChebyPoly, x) -> float:
    x = float(x)
    if abs(x) > 1.0:
        raise InputError(f"polynomial argument {x} outside [-1, 1]")
    return float(P(x))


def apply_poly(P: OddChebyPoly, S: ScaledHermitian) -> np.ndarray:
    """Q P(Lambda / alpha) Q^dag; eigenvalues at round-off level map to exact 0."""
    w, Q = S.eig
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    x = np.clip(w / S.alpha, -1.0, 1.0)
    vals = P(x)
    vals[np.abs(w) <= ZERO_EIG_REL * scale] = 0.0
    return (Q * vals) @ dagger(Q)


def approx_jump_operator(B, alpha, delta, eps) -> np.ndarray:
    """2 sqrt(2 alpha) P(B / alpha), approximating sqrt(2B) to 2 sqrt(2 alpha) eps."""
    S = ScaledHermitian(B, float(alpha))
    w = S.eig.eigenvalues
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    x = w / S.alpha
    if w.size and w[0] < -ZERO_EIG_REL * max(scale, 1.0) - 1e-8:
        raise InputError(f"B is not PSD: eigenvalue {w[0]:.6g}")
    nonzero = x[w > ZERO_EIG_REL * scale]
    bad = nonzero[nonzero < delta * (1 - GAP_SLACK)]
    if bad.size:
        raise SpectrumError(
            f"eigenvalue {bad[0]:.6g} of B/alpha lies inside (0, delta={delta:.6g})"
        )
    P = fit_odd_sqrt(float(delta), float(eps))
    return 2.0 * math.sqrt(2.0 * S.alpha) * apply_poly(P, S)


def problem_delta(p: OdeProblem) -> float:
    """Gap of B over the horizon, honoring an explicit ``delta_override``."""
    override = p.extras.get("delta_override")
    if override is not None:
        if not override > 0:
            raise SpectrumError("delta_override must be positive; Δ undefined")
        return float(override)
    return spectral_gap_over(p.V, max(p.T, 1e-300))


def direct_access_pipeline(p: OdeProblem, eps_target: float, rtol=1e-10):
    """Solve through the NDME with a polynomial jump operator.

    Returns ``(mu_T, eta, report)``. The polynomial tolerance is
    eps' = eps_target * eta / (10 max(T, 1)) with eta from a reference solve.
    """
    if not eps_target > 0:
        raise InputError("eps_target must be positive")
    ref = reference_solve(p, rtol=rtol).final
    eta_ref = vnorm(ref)
    report = {"eps_target": eps_target, "eta_reference": eta_ref}
    B_zero = p.V.is_constant and not np.any(hermitian_split(p.V.value)[1])
    if B_zero:
        sol = solve_homogeneous(p, check_tol=None, rtol=rtol)
        report.update(model="direct", degree=0, polynomial="none (B = 0)")
    else:
        alpha = alpha_bound(p.V, max(p.T, 1e-300))
        gap = problem_delta(p)
        delta = min(gap / alpha, 0.5)
        eps_prime = min(eps_target * eta_ref / (EPS_SPLIT * max(p.T, 1.0)), 0.5)
        P = fit_odd_sqrt(delta, eps_prime)
        jump = lambda B: approx_jump_operator(B, alpha, delta, eps_prime)
        sol = solve_homogeneous(p, jump=jump, check_tol=None, rtol=rtol)
        q = predict_theorem1(CostParams(alpha_V=alpha, T=max(p.T, 1e-300), eps=eps_target,
                                        eta=sol.eta, Delta=delta))
        report.update(
            model="direct", degree=P.degree, delta=delta, alpha=alpha, eps_prime=eps_prime,
            certified_poly_error=P.eps, predicted_queries=q.as_dict(),
        )
    err = vnorm(sol.mu_T - ref / eta_ref)
    report.update(eta=sol.eta, state_error=err, passed=bool(err <= eps_target))
    return sol.mu_T, sol.eta, report


def jump_perturbation_bound(alpha, eps, B) -> float:
    """8 sqrt(alpha) eps sqrt(|2B|) + (2 sqrt(2 alpha) eps)^2."""
    return 8.0 * math.sqrt(alpha) * eps * math.sqrt(spectral_norm(2.0 * np.asarray(B))) + 8.0 * alpha * eps ** 2
