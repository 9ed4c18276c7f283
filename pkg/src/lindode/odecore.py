"""ODE instances dmu/dt = -V(t) mu + b(t) and the reference integrator.

The reference integrator (adaptive Dormand-Prince 4(5)) is deliberately
independent of the Lindbladian machinery: it is the oracle everything in
:mod:`lindode.ndme` is compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CheckFailed, InputError, IntegrationError, NotSemiDissipativeError, SpectrumError
from .numkernel import as_matrix, dagger, expm, herm_eig, spectral_norm, trace_norm, vnorm

SEMI_DISSIPATIVE_TOL = 1e-8
ZERO_EIG_REL = 1e-12
DEFAULT_GRID = 64


@dataclass(frozen=True, eq=False)
class TimeDependentMatrix:
    """A matrix-valued function of time.

    ``kind`` is ``"constant"``, ``"knots"`` (piecewise-linear entrywise
    interpolation, clamped outside the knot range) or ``"function"`` (an
    arbitrary callable, typically derived from another matrix with
    :meth:`map`). ``breakpoints`` lists times where the derivative may jump.
    """

    kind: str
    shape: tuple
    value: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    mats: Optional[np.ndarray] = None
    func: Optional[Callable[[float], np.ndarray]] = None
    breakpoints: tuple = ()
    name: str = ""

    @classmethod
    def constant(cls, M, name=""):
        M = as_matrix(M, name or "matrix")
        return cls("constant", M.shape, value=M, name=name)

    @classmethod
    def from_knots(cls, times, mats, name=""):
        times = np.asarray(times, dtype=float)
        mats = np.asarray(mats, dtype=complex)
        if times.ndim != 1 or len(times) < 1:
            raise InputError("knot times must be a non-empty 1-d sequence")
        if mats.ndim != 3 or mats.shape[0] != len(times):
            raise InputError(f"expected {len(times)} knot matrices, got array of shape {mats.shape}")
        if np.any(np.diff(times) <= 0):
            raise InputError("knot times must be strictly increasing")
        if not np.all(np.isfinite(mats)):
            raise InputError("knot matrices have non-finite entries")
        if len(times) == 1:
            return cls.constant(mats[0], name=name)
        return cls("knots", mats.shape[1:], times=times, mats=mats,
                   breakpoints=tuple(float(t) for t in times), name=name)

    @classmethod
    def from_function(cls, func, shape, breakpoints=(), name=""):
        return cls("function", tuple(shape), func=func, breakpoints=tuple(breakpoints), name=name)

    @classmethod
    def coerce(cls, M, name=""):
        if isinstance(M, cls):
            return M
        if callable(M):
            probe = np.asarray(M(0.0))
            return cls.from_function(M, probe.shape, name=name)
        return cls.constant(M, name=name)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    @property
    def dim(self) -> int:
        return self.shape[0]

    def __call__(self, t) -> np.ndarray:
        if self.kind == "constant":
            return self.value
        if self.kind == "knots":
            ts = self.times
            if t <= ts[0]:
                return self.mats[0]
            if t >= ts[-1]:
                return self.mats[-1]
            k = int(np.searchsorted(ts, t, side="right")) - 1
            w = (t - ts[k]) / (ts[k + 1] - ts[k])
            return (1.0 - w) * self.mats[k] + w * self.mats[k + 1]
        return np.asarray(self.func(t), dtype=complex)

    def map(self, fn, name=""):
        """Pointwise image ``t -> fn(self(t))``; constant stays constant."""
        if self.is_constant:
            return TimeDependentMatrix.constant(fn(self.value), name=name)
        probe = np.asarray(fn(self(0.0)))
        return TimeDependentMatrix.from_function(
            lambda t: fn(self(t)), probe.shape, breakpoints=self.breakpoints, name=name
        )

    def shifted(self, t0):
        """``t -> self(t + t0)``."""
        if self.is_constant or t0 == 0:
            return self
        return TimeDependentMatrix.from_function(
            lambda t: self(t + t0), self.shape,
            breakpoints=tuple(b - t0 for b in self.breakpoints), name=self.name,
        )

    def derivative_bound(self) -> float:
        """max_t |dM/dt| in spectral norm (exact for knots, 0 for constants)."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "knots":
            return max(
                spectral_norm(self.mats[k + 1] - self.mats[k]) / (self.times[k + 1] - self.times[k])
                for k in range(len(self.times) - 1)
            )
        raise InputError("derivative bound is only defined for constant or knot matrices")


def breakpoints_in(tdms, t0, t1):
    """Sorted segment boundaries covering [t0, t1] that include every breakpoint."""
    pts = {float(t0), float(t1)}
    for m in tdms:
        pts.update(b for b in m.breakpoints if t0 < b < t1)
    return sorted(pts)


@dataclass(frozen=True, eq=False)
class OdeProblem:
    """dmu/dt = -V(t) mu + b(t), mu(0) = mu0 on n qubits, horizon T."""

    n: int
    V: TimeDependentMatrix
    mu0: np.ndarray
    T: float
    b: Optional[TimeDependentMatrix] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        d = 2 ** self.n
        V = TimeDependentMatrix.coerce(self.V, "V")
        object.__setattr__(self, "V", V)
        if V.shape != (d, d):
            raise InputError(f"V must be {d}x{d} for n={self.n}, got {V.shape}")
        mu0 = np.asarray(self.mu0, dtype=complex).reshape(-1)
        if mu0.shape != (d,):
            raise InputError(f"mu0 must have length {d}, got {mu0.size}")
        if abs(vnorm(mu0) - 1.0) > 1e-12:
            raise InputError(f"mu0 must be normalized (|mu0| = {vnorm(mu0):.15g})")
        object.__setattr__(self, "mu0", mu0)
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise InputError(f"horizon T must be finite and >= 0, got {self.T}")
        object.__setattr__(self, "T", float(self.T))
        if self.b is not None:
            b = self.b
            if not isinstance(b, TimeDependentMatrix):
                b = TimeDependentMatrix.coerce(np.asarray(b, dtype=complex).reshape(d, 1), "b")
            if b.shape != (d, 1):
                raise InputError(f"b must be a {d}x1 column, got {b.shape}")
            object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return 2 ** self.n

    @property
    def is_time_independent(self) -> bool:
        return self.V.is_constant

    def homogeneous(self) -> "OdeProblem":
        return OdeProblem(self.n, self.V, self.mu0, self.T, None, dict(self.extras))

    def with_(self, **changes) -> "OdeProblem":
        kw = dict(n=self.n, V=self.V, mu0=self.mu0, T=self.T, b=self.b, extras=dict(self.extras))
        kw.update(changes)
        return OdeProblem(**kw)

    def b_at(self, t) -> np.ndarray:
        if self.b is None:
            return np.zeros(self.dim, dtype=complex)
        return self.b(t).reshape(-1)


class Trajectory(NamedTuple):
    times: np.ndarray
    states: np.ndarray  # (len(times), d)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def eta(self) -> float:
        return vnorm(self.states[-1])

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def hermitian_split(V):
    """Return (A, B) with A = (V - V^dag)/2i, B = (V + V^dag)/2, so V = B + iA."""
    V = np.asarray(V, dtype=complex)
    Vd = dagger(V)
    return (V - Vd) / 2j, (V + Vd) / 2


class SemiDissipativeVerdict(NamedTuple):
    ok: bool
    t_worst: float
    min_eigenvalue: float


def sample_times(V: TimeDependentMatrix, T, grid=DEFAULT_GRID):
    if V.is_constant or T == 0:
        return np.array([0.0])
    ts = set(np.linspace(0.0, T, grid).tolist())
    ts.update(b for b in V.breakpoints if 0.0 <= b <= T)
    return np.array(sorted(ts))


def check_semi_dissipative(V, T=1.0, grid=DEFAULT_GRID, tol=SEMI_DISSIPATIVE_TOL) -> SemiDissipativeVerdict:
    """Smallest eigenvalue of B(t) over a uniform grid plus knots."""
    V = TimeDependentMatrix.coerce(V)
    worst_t, worst = 0.0, math.inf
    for t in sample_times(V, T, grid):
        lam = herm_eig(hermitian_split(V(t))[1]).eigenvalues[0]
        if lam < worst:
            worst_t, worst = float(t), float(lam)
    return SemiDissipativeVerdict(worst >= -tol, worst_t, worst)


def require_semi_dissipative(V, T=1.0, grid=DEFAULT_GRID):
    verdict = check_semi_dissipative(V, T, grid)
    if not verdict.ok:
        raise NotSemiDissipativeError(verdict.t_worst, verdict.min_eigenvalue)
    return verdict


def spectral_gap(B) -> float:
    """Smallest eigenvalue of PSD ``B`` above ``1e-12 * |B|``."""
    w = herm_eig(B).eigenvalues
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    nonzero = w[w > ZERO_EIG_REL * scale] if scale > 0 else w[:0]
    if nonzero.size == 0:
        raise SpectrumError("no nonzero eigenvalue; Δ undefined")
    return float(nonzero[0])


def spectral_gap_over(V, T=1.0, grid=DEFAULT_GRID) -> float:
    """Minimum of :func:`spectral_gap` of B(t) over the evaluation grid."""
    V = TimeDependentMatrix.coerce(V)
    gaps = []
    for t in sample_times(V, T, grid):
        try:
            gaps.append(spectral_gap(hermitian_split(V(t))[1]))
        except SpectrumError:
            continue
    if not gaps:
        raise SpectrumError("no nonzero eigenvalue; Δ undefined")
    return min(gaps)


def alpha_bound(V, T=1.0, grid=DEFAULT_GRID) -> float:
    """max_t |V(t)| over the grid (exact for constant and knot V)."""
    V = TimeDependentMatrix.coerce(V)
    return max(spectral_norm(V(t)) for t in sample_times(V, T, grid))


def integrate(V, y0, t0, t1, b=None, rtol=1e-10, atol=None, t_eval=None) -> Trajectory:
    """Integrate dy/dt = -V(t) y + b(t) from t0 to t1, segment-wise at knots."""
    V = TimeDependentMatrix.coerce(V)
    y = np.asarray(y0, dtype=complex).reshape(-1)
    if atol is None:
        atol = rtol * 1e-2
    if t1 == t0:
        return Trajectory(np.array([t0]), y[None, :].copy())

    def rhs(t, u):
        du = -(V(t) @ u)
        if b is not None:
            du = du + b(t).reshape(-1)
        return du

    tdms = [V] + ([b] if b is not None else [])
    edges = breakpoints_in(tdms, t0, t1)
    times, states = [t0], [y.copy()]
    for a, c in zip(edges[:-1], edges[1:]):
        seg_eval = None
        if t_eval is not None:
            seg_eval = [t for t in t_eval if a < t <= c]
            if not seg_eval or seg_eval[-1] != c:
                seg_eval = seg_eval + [c]
        sol = solve_ivp(rhs, (a, c), y, method="RK45", rtol=rtol, atol=atol, t_eval=seg_eval)
        if sol.status != 0:
            raise IntegrationError(sol.t[-1] if sol.t.size else a, sol.message)
        y = sol.y[:, -1].copy()
        times.extend(sol.t[1:] if t_eval is None else sol.t)
        states.extend(sol.y.T[1:] if t_eval is None else sol.y.T)
    times = np.asarray(times)
    states = np.asarray(states)
    if t_eval is not None:
        keep = np.isin(times, np.asarray(list(t_eval) + [t1]))
        times, states = times[keep], states[keep]
    return Trajectory(times, states)


def reference_solve(p: OdeProblem, rtol=1e-10, t_eval=None) -> Trajectory:
    """Reference solution by adaptive RK45.

    For constant V without source the result is cross-checked against
    ``expm(-V T) mu0``; disagreement beyond ``10 * rtol`` raises
    :class:`CheckFailed`.
    """
    traj = integrate(p.V, p.mu0, 0.0, p.T, b=p.b, rtol=rtol, t_eval=t_eval)
    if p.V.is_constant and p.b is None:
        exact = expm(-p.V.value * p.T) @ p.mu0
        err = vnorm(traj.final - exact)
        if err > 10 * rtol * max(1.0, vnorm(exact)):
            raise CheckFailed(f"RK45 and expm disagree by {err:.3g} (rtol={rtol:g})")
    return traj


def propagate_vector(V, y0, t0, t1, rtol=1e-10) -> np.ndarray:
    """Time-ordered exp(-int_t0^t1 V) applied to y0, via the reference integrator."""
    return integrate(V, y0, t0, t1, rtol=rtol).final


def duhamel_compose(p: OdeProblem, m: int, rtol=1e-10) -> np.ndarray:
    """mu(T) by Duhamel's formula with an m-slice midpoint rule for the source term."""
    if m < 1:
        raise InputError("number of slices must be >= 1")
    out = propagate_vector(p.V, p.mu0, 0.0, p.T, rtol)
    if p.b is None:
        return out
    h = p.T / m
    for j in range(m):
        tj = (j + 0.5) * h
        out = out + h * propagate_vector(p.V, p.b_at(tj), tj, p.T, rtol)
    return out


def norm_propagation_terms(psi, phi, mu):
    """(|psi - phi|, |(psi - phi) mu^dag|_tr / |mu|); the first never exceeds the second."""
    diff = np.asarray(psi, dtype=complex).reshape(-1) - np.asarray(phi, dtype=complex).reshape(-1)
    mu = np.asarray(mu, dtype=complex).reshape(-1)
    return vnorm(diff), trace_norm(np.outer(diff, mu.conj())) / vnorm(mu)
