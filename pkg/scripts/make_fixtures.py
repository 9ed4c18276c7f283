"""Regenerate the JSON fixtures in problems/."""

import math
import pathlib

import numpy as np

from lindode.odecore import TimeDependentMatrix
from lindode.problemfile import ProblemFile, write_problem

OUT = pathlib.Path(__file__).resolve().parent.parent / "problems"
PLUS = np.array([1.0, 1.0]) / math.sqrt(2.0)
Z = np.diag([1.0, -1.0])


def const(M):
    return TimeDependentMatrix.constant(np.asarray(M, dtype=complex))


def knots():
    rng = np.random.default_rng(7)
    mats = []
    for _ in range(4):
        X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        Y = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        B = X @ X.conj().T / 8 + 0.2 * np.eye(2)
        mats.append(B + 0.25j * (Y + Y.conj().T))
    return TimeDependentMatrix.from_knots([0.0, 0.4, 0.8, 1.2], mats)


FIXTURES = {
    "diag12": ProblemFile(n=1, T=1.0, V=const(np.diag([1.0, 2.0])), mu0=PLUS, phi0=PLUS, O=Z,
                          name="V = diag(1, 2), closed form"),
    "unitary_x": ProblemFile(n=1, T=math.pi / 2, V=const(1j * np.array([[0, 1], [1, 0]])),
                             mu0=np.array([1.0, 0.0]), name="V = iX, anti-Hermitian"),
    "non_dissipative": ProblemFile(n=1, T=1.0, V=const(np.diag([-1.0, 1.0])), mu0=PLUS,
                                   name="Hermitian part has eigenvalue -1"),
    "delta_zero": ProblemFile(n=1, T=1.0, V=const(np.diag([1.0, 2.0])), mu0=PLUS, delta_override=0.0,
                              name="gap forced to zero"),
    "gibbs_diag01": ProblemFile(n=1, B=np.diag([0.0, 1.0]).astype(complex), beta=1.0,
                                name="Gibbs state of diag(0, 1) at beta = 1"),
    "inhomogeneous": ProblemFile(n=1, T=1.0, V=const(np.diag([1.0, 2.0])), mu0=PLUS,
                                 b=const(PLUS.reshape(2, 1)), name="constant source, closed form"),
    "knots": ProblemFile(n=1, T=1.2, V=knots(), mu0=PLUS, name="piecewise-linear V(t), 4 knots"),
}


def main():
    OUT.mkdir(exist_ok=True)
    for name, pf in FIXTURES.items():
        (OUT / f"{name}.json").write_text(write_problem(pf), encoding="utf-8")
        print(OUT / f"{name}.json")


if __name__ == "__main__":
    main()
