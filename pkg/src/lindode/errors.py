"""Exception hierarchy.

Two families matter to callers: :class:`InputError` for malformed or
out-of-contract inputs, and :class:`CheckFailed` for numerical self-checks
that did not hold. The CLI maps them to exit codes 1 and 2.
"""


class InputError(ValueError):
    """Bad input: wrong shape, non-normalized state, missing parameter."""


class NotSemiDissipativeError(InputError):
    """The Hermitian part of V(t) has a negative eigenvalue."""

    def __init__(self, t, eigenvalue):
        self.t = float(t)
        self.eigenvalue = float(eigenvalue)
        super().__init__(
            f"V is not semi-dissipative: min eigenvalue of (V+V^dag)/2 is "
            f"{self.eigenvalue:.6g} at t={self.t:.6g}"
        )


class NotPSDError(InputError):
    """A matrix that must be positive semi-definite is not."""


class SpectrumError(InputError):
    """Spectrum violates a gap precondition (e.g. eigenvalue inside (0, delta))."""


class CheckFailed(RuntimeError):
    """An internal numerical assertion failed (result outside tolerance)."""


class IntegrationError(RuntimeError):
    """The adaptive integrator could not reach the requested horizon."""

    def __init__(self, t, message):
        self.t = float(t)
        super().__init__(f"integration failed at t={self.t:.6g}: {message}")
