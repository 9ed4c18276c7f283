"""Block-embedding error over a random suite of constant and knot-based V.

Prints one line per (n, T) cell: worst trace-norm error of 2 * block
against exp(-V T) |mu0><mu0|, and the knot-suite 2-norm error.
"""

import argparse
import itertools

import numpy as np

from lindode.ndme import evolve, extract_block, solve_homogeneous
from lindode.numkernel import expm, trace_norm
from lindode.odecore import OdeProblem, TimeDependentMatrix, reference_solve


def random_v(rng, d, floor=0.0, scale=1.0):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Y = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (X @ X.conj().T / d + 0.5j * (Y + Y.conj().T)) + floor * np.eye(d)


def unit(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-cell", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print("constant V: n  T  worst_trace_norm_error")
    for n, T in itertools.product((1, 2, 3), (0.1, 1.0, 2.0)):
        d = 2 ** n
        worst = 0.0
        for _ in range(args.per_cell):
            p = OdeProblem(n, random_v(rng, d), unit(rng, d), T)
            y = expm(-p.V.value * T) @ p.mu0
            worst = max(worst, trace_norm(2 * extract_block(evolve(p)) - np.outer(y, p.mu0.conj())))
        print(f"  {n}  {T:<4g} {worst:.3e}")

    print("knot V (4 knots): n  worst_2norm_error")
    for n in (1, 2):
        d = 2 ** n
        worst = 0.0
        for _ in range(args.per_cell):
            ts = np.linspace(0.0, 1.2, 4)
            V = TimeDependentMatrix.from_knots(ts, [random_v(rng, d, floor=0.2, scale=0.25) for _ in ts])
            p = OdeProblem(n, V, unit(rng, d), 1.2)
            sol = solve_homogeneous(p, check_tol=None)
            worst = max(worst, float(np.linalg.norm(sol.eta * sol.mu_T - reference_solve(p, rtol=1e-12).final)))
        print(f"  {n}  {worst:.3e}")


if __name__ == "__main__":
    main()
