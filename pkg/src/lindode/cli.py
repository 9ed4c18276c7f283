"""Command-line front end.

Exit codes: 0 success, 1 bad input, 2 a numerical check failed (the report
is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .budget import (
    CostParams,
    HarnessSuite,
    lower_bound_report,
    predict_theorem1,
    predict_theorem2,
    scaling_harness,
    table1_report,
)
from .errors import CheckFailed, InputError, IntegrationError
from .extractor import (
    echo_pipeline,
    echo_quadratures,
    estimation_budget,
    expval_pipeline,
    extraction_pipeline,
    shot_sigma,
    shots_emulate,
)
from .ndme import inhomogeneous_solve, solve_homogeneous
from .numkernel import vnorm
from .odecore import alpha_bound, reference_solve
from .problemfile import problem_document, read_problem
from .showcase import gibbs_prepare, partition_estimate, partition_shot_sigma
from .sqrtpoly import direct_access_pipeline, fit_odd_sqrt

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _flatten(prefix, x, out):
    if isinstance(x, dict):
        for k in sorted(x):
            _flatten(f"{prefix}.{k}" if prefix else k, x[k], out)
    elif isinstance(x, list):
        for i, v in enumerate(x):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, x))


def render(report, fmt) -> str:
    doc = _jsonable(report)
    if fmt == "json":
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    rows = []
    _flatten("", doc, rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    w.writerows(rows)
    return buf.getvalue()


def write_atomic(path, text):
    """Write via a temporary file in the target directory and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(times, states) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = len(states[0])
    head = ["t"]
    for i in range(d):
        head += [f"re_{i}", f"im_{i}"]
    w.writerow(head + ["eta"])
    for t, y in zip(times, states):
        eta = vnorm(y)
        mu = y / eta if eta > 0 else y
        row = [repr(float(t))]
        for z in mu:
            row += [repr(float(z.real)), repr(float(z.imag))]
        w.writerow(row + [repr(eta)])
    return buf.getvalue()


# --- subcommands -------------------------------------------------------------


def _unnormalized(p, args):
    """eta * mu_T from the NDME solver at the problem's horizon."""
    if p.T == 0:
        return p.mu0.copy()
    if p.b is None:
        sol = solve_homogeneous(p, check_tol=None, rtol=args.rtol)
        return sol.eta * sol.mu_T
    mu, eta = inhomogeneous_solve(p, args.inhomogeneous_slices)
    return eta * mu


def cmd_solve(args):
    pf = read_problem(args.problem)
    p = pf.problem()
    report = {"command": "solve", "problem": args.problem, "model": args.model, "T": p.T, "n": p.n}
    tol = {"rtol": args.rtol}
    if args.model == "direct":
        if p.b is not None:
            raise InputError("the direct model handles homogeneous problems only")
        mu, eta, rep = direct_access_pipeline(p, args.eps, rtol=args.rtol)
        report.update(mu_T=mu, eta=eta, direct=rep)
        tol["state_error"] = args.eps
        report["passed"] = rep["passed"]
    else:
        if p.b is None:
            sol = solve_homogeneous(p, rtol=args.rtol)
            mu, eta = sol.mu_T, sol.eta
            ref = reference_solve(p, rtol=args.rtol).final
            tol["reference_mismatch"] = 1e-7
        else:
            mu, eta = inhomogeneous_solve(p, args.inhomogeneous_slices)
            ref = reference_solve(p, rtol=args.rtol).final
            tol["reference_mismatch"] = "quadrature error, O((T/m)^2)"
            report["slices"] = args.inhomogeneous_slices
        err = vnorm(eta * mu - ref)
        report.update(mu_T=mu, eta=eta, reference_mismatch=err)
        report["passed"] = bool(p.b is not None or err <= 1e-7)
        alpha = alpha_bound(p.V, max(p.T, 1e-300))
        if p.T > 0 and alpha > 0 and 0 < args.eps < 1:
            cp = CostParams(alpha_V=alpha, T=p.T, eps=args.eps, eta=eta)
            report["predicted_queries"] = predict_theorem2(cp).as_dict()
    report["tolerances"] = tol
    if args.trajectory:
        times = np.linspace(0.0, p.T, args.samples)
        ys = [_unnormalized(p.with_(T=float(t)), args) for t in times]
        write_atomic(args.trajectory, trajectory_csv(times, ys))
        report["trajectory"] = args.trajectory
    return report


def cmd_echo(args):
    pf = read_problem(args.problem)
    p = pf.problem()
    phi0 = p.mu0 if pf.phi0 is None else pf.phi0
    z, rho = echo_pipeline(p, phi0)
    ref = np.vdot(phi0, reference_solve(p, rtol=args.rtol).final)
    err = abs(z - ref)
    report = {"command": "echo", "echo": z, "reference": ref, "error": err,
              "tolerances": {"error": 1e-8}, "passed": bool(err <= 1e-8)}
    if args.shots:
        x, y = echo_quadratures(rho)
        xs = shots_emulate(x, args.shots, args.seed)
        ys = shots_emulate(y, args.shots, args.seed + 1)
        report["shots"] = {
            "count": args.shots, "seed": args.seed, "echo": complex(xs, -ys),
            "sigma_re": shot_sigma(x, args.shots), "sigma_im": shot_sigma(y, args.shots),
        }
    return report


def cmd_expval(args):
    pf = read_problem(args.problem)
    p = pf.problem()
    if pf.O is None:
        raise InputError(f"{args.problem}: expval needs an observable O")
    v, _ = expval_pipeline(p, pf.O)
    y = reference_solve(p, rtol=args.rtol).final
    ref = float(np.vdot(y, pf.O @ y).real)
    err = abs(v - ref)
    report = {"command": "expval", "expval": v, "reference": ref, "error": err,
              "tolerances": {"error": 1e-8}, "passed": bool(err <= 1e-8)}
    if args.shots:
        scale = max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(pf.O)))))
        m = shots_emulate(v / scale, args.shots, args.seed) * scale
        report["shots"] = {"count": args.shots, "seed": args.seed, "expval": m,
                           "sigma": scale * shot_sigma(v / scale, args.shots)}
    return report


def cmd_extract(args):
    pf = read_problem(args.problem)
    p = pf.problem()
    y = reference_solve(p, rtol=args.rtol).final
    out = extraction_pipeline(p, mu_T=y / vnorm(y))
    plan, res = out["plan"], out["result"]
    return {
        "command": "extract",
        "eta": out["eta"],
        "k_star": plan.k_star,
        "theta": plan.theta,
        "predicted_success": plan.predicted_success,
        "expected_repetitions": plan.expected_repetitions,
        "success_prob": res.success_prob,
        "fidelity": res.fidelity,
        "mu_T": res.extracted,
        "env_dim": out["purification"].env_dim,
        "partial_trace_residual": out["partial_trace_residual"],
        "tolerances": {"success_prob": 1e-8, "fidelity": 1e-9, "partial_trace": 1e-9},
        "passed": bool(out["partial_trace_residual"] <= 1e-9),
    }


def cmd_gibbs(args):
    pf = read_problem(args.problem)
    if pf.B is None or pf.beta is None:
        raise InputError(f"{args.problem}: gibbs needs B and beta")
    g = gibbs_prepare(pf.B, pf.beta, pf.n)
    report = {"command": "gibbs", "n": pf.n, "beta": pf.beta, "Z": g.Z_estimate, "Z_exact": g.Z_exact,
              "fidelity": g.fidelity, "eta": g.eta,
              "tolerances": {"Z_relative": 1e-6, "fidelity": 1e-8}, "passed": True}
    if args.shots:
        z = partition_estimate(pf.B, pf.beta, pf.n, shots=args.shots, seed=args.seed)
        report["shots"] = {"count": args.shots, "seed": args.seed, "Z": z,
                           "sigma": partition_shot_sigma(g.Z_estimate, pf.n, args.shots)}
    return report


def cmd_poly(args):
    P = fit_odd_sqrt(args.delta, args.eps)
    return {"command": "poly", "delta": P.delta, "eps": args.eps, "certified_error": P.eps,
            "degree": P.degree, "bound_ok": P.bound_ok, "odd_coefficients": P.coefficients,
            "tolerances": {"sup_error": args.eps}, "passed": bool(P.eps <= args.eps and P.bound_ok)}


def cmd_budget(args):
    cp = CostParams(alpha_V=args.alpha, T=args.T, eps=args.eps, eta=args.eta,
                    Delta=args.delta, kappa_V=args.kappa)
    report = {"command": "budget", "params": cp.__dict__, "table1": table1_report(cp).as_dict(),
              "lower_bounds": lower_bound_report(cp), "theorem2": predict_theorem2(cp).as_dict(),
              "estimation": estimation_budget(args.eta, args.eps, args.fail_prob), "passed": True}
    if cp.Delta is not None:
        report["theorem1"] = predict_theorem1(cp).as_dict()
    return report


def cmd_sweep(args):
    rep = scaling_harness(HarnessSuite(seed=args.seed))
    rep["command"] = "sweep"
    return rep


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--shots", type=int, default=None)
    common.add_argument("--rtol", type=float, default=1e-10)
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    ap = argparse.ArgumentParser(prog="lindode", description="Lindbladian ODE solver laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve an ODE problem file")
    s.add_argument("problem")
    s.add_argument("--eps", type=float, default=1e-6)
    s.add_argument("--model", choices=("direct", "sqrt"), default="sqrt")
    s.add_argument("--inhomogeneous-slices", type=int, default=64)
    s.add_argument("--trajectory", default=None, help="CSV path for the sampled trajectory")
    s.add_argument("--samples", type=int, default=11)
    s.set_defaults(func=cmd_solve)

    for name, func, text in (
        ("echo", cmd_echo, "Loschmidt echo eta <phi0|mu_T>"),
        ("expval", cmd_expval, "eta^2 <mu_T|O|mu_T>"),
        ("extract", cmd_extract, "Grover extraction of mu_T"),
        ("gibbs", cmd_gibbs, "Gibbs state and partition function"),
    ):
        c = sub.add_parser(name, parents=[common], help=text)
        c.add_argument("problem")
        c.set_defaults(func=func)

    c = sub.add_parser("poly", parents=[common], help="certify an odd sqrt polynomial")
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--eps", type=float, required=True)
    c.set_defaults(func=cmd_poly)

    c = sub.add_parser("budget", parents=[common], help="query-count formulas")
    c.add_argument("--alpha", type=float, default=1.0)
    c.add_argument("--T", type=float, default=10.0)
    c.add_argument("--eps", type=float, default=1e-6)
    c.add_argument("--eta", type=float, default=0.5)
    c.add_argument("--delta", type=float, default=0.1)
    c.add_argument("--kappa", type=float, default=10.0)
    c.add_argument("--fail-prob", type=float, default=0.05)
    c.set_defaults(func=cmd_budget)

    c = sub.add_parser("sweep", parents=[common], help="empirical scaling exponents")
    c.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.shots is not None and args.shots < 1:
        print("error: --shots must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    code = EXIT_OK
    try:
        report = args.func(args)
        if getattr(args, "problem", None):
            report["input"] = problem_document(read_problem(args.problem))
        if not report.get("passed", True):
            code = EXIT_CHECK
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (CheckFailed, IntegrationError) as e:
        print(f"check failed: {e}", file=sys.stderr)
        report = {"command": args.command, "passed": False, "error": str(e)}
        code = EXIT_CHECK
    text = render(report, args.format)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
