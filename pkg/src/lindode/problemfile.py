"""JSON problem files.

Complex numbers are ``[re, im]`` pairs. ``V`` (and the optional source
``b``) is either ``{"constant": M}`` or ``{"knots": [[t, M], ...]}``.
Errors name the line of the offending key.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError
from .odecore import OdeProblem, TimeDependentMatrix

KNOWN_KEYS = {"n", "V", "mu0", "T", "b", "phi0", "O", "beta", "delta_override", "B", "name"}


class _Locator:
    def __init__(self, text, source):
        self.text, self.source = text, source

    def line(self, key) -> int:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else 1

    def error(self, key, msg) -> InputError:
        return InputError(f"{self.source}:{self.line(key)}: {key}: {msg}")


def _complex(x, where):
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x, 0.0)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ValueError(f"{where}: expected [re, im], got {x!r}")


def _vector(v, length, where):
    if not isinstance(v, list):
        raise ValueError(f"{where}: expected a list of [re, im] pairs")
    out = np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(v)], dtype=complex)
    if length is not None and out.size != length:
        raise ValueError(f"{where}: expected length {length}, got {out.size}")
    return out


def _matrix(M, shape, where):
    if not isinstance(M, list) or not M or not all(isinstance(r, list) for r in M):
        raise ValueError(f"{where}: expected a matrix (list of rows)")
    rows = [[_complex(x, f"{where}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(M)]
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{where}: ragged rows")
    out = np.array(rows, dtype=complex)
    if shape is not None and out.shape != shape:
        raise ValueError(f"{where}: expected shape {shape[0]}x{shape[1]}, got {out.shape[0]}x{out.shape[1]}")
    return out


def _tdm(obj, shape, where) -> TimeDependentMatrix:
    if not isinstance(obj, dict) or len(obj) != 1 or not ({"constant", "knots"} & obj.keys()):
        raise ValueError(f'{where}: expected {{"constant": M}} or {{"knots": [[t, M], ...]}}')
    if "constant" in obj:
        return TimeDependentMatrix.constant(_matrix(obj["constant"], shape, where), name=where)
    knots = obj["knots"]
    if not isinstance(knots, list) or not knots:
        raise ValueError(f"{where}: knots must be a non-empty list")
    times, mats = [], []
    for k, item in enumerate(knots):
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], (int, float))):
            raise ValueError(f"{where}: knot {k} must be [t, M]")
        times.append(float(item[0]))
        mats.append(_matrix(item[1], shape, f"{where} knot {k}"))
    return TimeDependentMatrix.from_knots(times, mats, name=where)


@dataclass
class ProblemFile:
    n: int
    T: float = 0.0
    V: Optional[TimeDependentMatrix] = None
    mu0: Optional[np.ndarray] = None
    b: Optional[TimeDependentMatrix] = None
    phi0: Optional[np.ndarray] = None
    O: Optional[np.ndarray] = None
    beta: Optional[float] = None
    delta_override: Optional[float] = None
    B: Optional[np.ndarray] = None
    name: str = ""
    source: str = field(default="<string>", compare=False)

    def problem(self) -> OdeProblem:
        if self.V is None or self.mu0 is None:
            raise InputError(f"{self.source}: problem needs both V and mu0")
        extras = {}
        if self.delta_override is not None:
            extras["delta_override"] = self.delta_override
        return OdeProblem(self.n, self.V, self.mu0, self.T, self.b, extras)


def parse_problem(text: str, source="<string>") -> ProblemFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{source}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{source}:1: top level must be an object")
    loc = _Locator(text, source)
    unknown = sorted(set(doc) - KNOWN_KEYS)
    if unknown:
        raise loc.error(unknown[0], "unknown field")
    if "n" not in doc:
        raise InputError(f"{source}:1: missing required field n")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise loc.error("n", f"must be a positive integer, got {n!r}")
    d = 2 ** n
    pf = ProblemFile(n=n, source=source)

    def field_(key, conv):
        if key not in doc:
            return None
        try:
            return conv(doc[key])
        except (ValueError, TypeError, InputError) as e:
            raise loc.error(key, str(e)) from None

    def real(x):
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise ValueError(f"expected a number, got {x!r}")
        return float(x)

    T = field_("T", real)
    pf.T = 0.0 if T is None else T
    pf.V = field_("V", lambda v: _tdm(v, (d, d), "V"))
    pf.b = field_("b", lambda v: _tdm(v, (d, 1), "b"))
    pf.mu0 = field_("mu0", lambda v: _vector(v, d, "mu0"))
    pf.phi0 = field_("phi0", lambda v: _vector(v, d, "phi0"))
    pf.O = field_("O", lambda v: _matrix(v, (d, d), "O"))
    pf.B = field_("B", lambda v: _matrix(v, (d, d), "B"))
    pf.beta = field_("beta", real)
    pf.delta_override = field_("delta_override", real)
    pf.name = doc.get("name", "")
    if pf.V is not None and pf.mu0 is not None:
        try:
            pf.problem()
        except InputError as e:
            msg = str(e)
            key = next((k for k in ("mu0", "b") if msg.startswith(k)), "T" if "horizon" in msg else "V")
            raise loc.error(key, msg) from None
    return pf


def read_problem(path) -> ProblemFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(f"{path}: cannot read problem file: {e.strerror}") from None
    return parse_problem(text, source=str(path))


def _pairs(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v).reshape(-1)]


def _mat(M):
    return [_pairs(row) for row in np.asarray(M)]


def _tdm_doc(m: TimeDependentMatrix):
    if m.kind == "constant":
        return {"constant": _mat(m.value)}
    if m.kind == "knots":
        return {"knots": [[float(t), _mat(M)] for t, M in zip(m.times, m.mats)]}
    raise InputError("only constant or knot-based matrices can be written to a problem file")


def problem_document(pf: ProblemFile) -> dict:
    doc = {"n": pf.n, "T": pf.T}
    if pf.name:
        doc["name"] = pf.name
    if pf.V is not None:
        doc["V"] = _tdm_doc(pf.V)
    if pf.b is not None:
        doc["b"] = _tdm_doc(pf.b)
    for key in ("mu0", "phi0"):
        if getattr(pf, key) is not None:
            doc[key] = _pairs(getattr(pf, key))
    for key in ("O", "B"):
        if getattr(pf, key) is not None:
            doc[key] = _mat(getattr(pf, key))
    for key in ("beta", "delta_override"):
        if getattr(pf, key) is not None:
            doc[key] = float(getattr(pf, key))
    return doc


def write_problem(pf, **extra) -> str:
    """Serialize a :class:`ProblemFile` (or an :class:`OdeProblem` plus keyword fields)."""
    if isinstance(pf, OdeProblem):
        p = pf
        pf = ProblemFile(n=p.n, T=p.T, V=p.V, mu0=p.mu0, b=p.b,
                         delta_override=p.extras.get("delta_override"))
    for k, v in extra.items():
        setattr(pf, k, v)
    return json.dumps(problem_document(pf), indent=1, sort_keys=True) + "\n"
