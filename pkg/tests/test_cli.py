import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gen import knot_problem, semi_dissipative, unit
from lindode.budget import TABLE1_ROWS
from lindode.cli import main
from lindode.errors import InputError
from lindode.odecore import OdeProblem
from lindode.problemfile import parse_problem, read_problem, write_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"
E1, E2 = math.exp(-1), math.exp(-2)
seeds = st.integers(0, 2**32 - 1)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out)


class TestProblemFile:
    @given(seeds)
    def test_roundtrip_constant(self, seed):
        rng = np.random.default_rng(seed)
        p = OdeProblem(2, semi_dissipative(rng, 4), unit(rng, 4), 0.37, b=unit(rng, 4))
        q = parse_problem(write_problem(p)).problem()
        assert np.array_equal(q.V.value, p.V.value)
        assert np.array_equal(q.mu0, p.mu0)
        assert np.array_equal(q.b.value, p.b.value)
        assert q.T == p.T

    def test_roundtrip_knots(self):
        p = knot_problem(np.random.default_rng(0), 1)
        text = write_problem(p)
        q = parse_problem(text).problem()
        assert np.array_equal(q.V.mats, p.V.mats) and np.array_equal(q.V.times, p.V.times)
        assert write_problem(q) == text

    def test_extra_fields(self):
        p = OdeProblem(1, np.eye(2), [1.0, 0.0], 1.0)
        pf = parse_problem(write_problem(p, O=np.diag([1.0, -1.0]), beta=0.5))
        assert pf.beta == 0.5
        assert np.array_equal(pf.O, np.diag([1.0, -1.0]))

    def test_wrong_dimension_line(self):
        text = '{\n "n": 1,\n "T": 1,\n "V": {"constant": [[1, 0], [0, 1]]},\n "mu0": [[1, 0], [0, 0], [0, 0]]\n}'
        with pytest.raises(InputError, match=r"^f.json:5: mu0: .*length 2"):
            parse_problem(text, "f.json")

    def test_unknown_field(self):
        with pytest.raises(InputError, match=r":3: colour: unknown field"):
            parse_problem('{\n "n": 1,\n "colour": 3\n}')

    def test_bad_json(self):
        with pytest.raises(InputError, match="invalid JSON"):
            parse_problem('{"n": 1,')

    def test_unnormalized_mu0(self):
        text = '{"n": 1, "T": 1, "V": {"constant": [[1, 0], [0, 1]]}, "mu0": [1, 1]}'
        with pytest.raises(InputError, match="mu0"):
            parse_problem(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="cannot read"):
            read_problem(tmp_path / "nope.json")

    def test_fixtures_parse(self):
        for path in sorted(PROBLEMS.glob("*.json")):
            read_problem(path)


class TestSolve:
    def test_diag12(self, capsys):
        code, rep = report(capsys, "solve", PROBLEMS / "diag12.json")
        assert code == 0 and rep["passed"]
        assert rep["eta"] == pytest.approx(math.sqrt((E1**2 + E2**2) / 2), abs=1e-9)
        mu = np.array([complex(*z) for z in rep["mu_T"]])
        np.testing.assert_allclose(mu, np.array([E1, E2]) / math.hypot(E1, E2), atol=1e-9)
        assert rep["input"]["n"] == 1

    def test_non_dissipative(self, capsys):
        code, out, err = run(capsys, "solve", PROBLEMS / "non_dissipative.json")
        assert code == 1 and "-1" in err

    def test_delta_zero_direct(self, capsys):
        code, out, err = run(capsys, "solve", PROBLEMS / "delta_zero.json", "--model", "direct")
        assert code == 1 and "Δ undefined" in err

    def test_direct_model(self, capsys):
        code, rep = report(capsys, "solve", PROBLEMS / "diag12.json", "--model", "direct", "--eps", "1e-4")
        assert code == 0 and rep["direct"]["state_error"] <= 1e-4

    def test_inhomogeneous_with_trajectory(self, capsys, tmp_path):
        traj = tmp_path / "traj.csv"
        code, rep = report(capsys, "solve", PROBLEMS / "inhomogeneous.json", "--trajectory", traj, "--samples", 5)
        assert code == 0
        rows = list(csv.reader(traj.open()))
        assert rows[0] == ["t", "re_0", "im_0", "re_1", "im_1", "eta"]
        assert len(rows) == 6
        assert float(rows[1][0]) == 0.0 and float(rows[1][-1]) == pytest.approx(1.0)

    def test_knots(self, capsys):
        code, rep = report(capsys, "solve", PROBLEMS / "knots.json")
        assert code == 0 and rep["reference_mismatch"] <= 1e-7

    def test_check_failure_exit_code(self, capsys, tmp_path):
        # decays below the extraction floor: the report is still written
        p = OdeProblem(1, 40 * np.eye(2), [1.0, 0.0], 1.0)
        f = tmp_path / "fast.json"
        f.write_text(write_problem(p))
        out = tmp_path / "r.json"
        code, _, err = run(capsys, "solve", f, "--out", out)
        assert code == 2 and "vanished" in err
        assert json.loads(out.read_text())["passed"] is False


class TestOtherCommands:
    def test_echo(self, capsys):
        code, rep = report(capsys, "echo", PROBLEMS / "diag12.json")
        assert code == 0
        assert complex(*rep["echo"]) == pytest.approx(0.5 * (E1 + E2), abs=1e-8)

    def test_echo_shots(self, capsys):
        code, rep = report(capsys, "echo", PROBLEMS / "diag12.json", "--shots", 1000, "--seed", 4)
        assert code == 0 and rep["shots"]["count"] == 1000

    def test_expval(self, capsys):
        code, rep = report(capsys, "expval", PROBLEMS / "diag12.json")
        assert code == 0 and rep["expval"] == pytest.approx((E2 - math.exp(-4)) / 2, abs=1e-8)

    def test_expval_needs_observable(self, capsys):
        code, _, err = run(capsys, "expval", PROBLEMS / "unitary_x.json")
        assert code == 1 and "observable" in err

    def test_extract(self, capsys):
        code, rep = report(capsys, "extract", PROBLEMS / "diag12.json")
        assert code == 0 and rep["fidelity"] >= 1 - 1e-9

    def test_gibbs(self, capsys):
        code, rep = report(capsys, "gibbs", PROBLEMS / "gibbs_diag01.json")
        assert code == 0 and rep["Z"] == pytest.approx(1 + E1, rel=1e-6)

    def test_poly(self, capsys):
        code, rep = report(capsys, "poly", "--delta", 0.25, "--eps", 1e-4)
        assert code == 0 and rep["passed"] and rep["degree"] % 2 == 1

    def test_budget(self, capsys):
        code, rep = report(capsys, "budget")
        assert code == 0
        assert [r["method"] for r in rep["table1"]["rows"]] == list(TABLE1_ROWS)

    def test_csv_format(self, capsys):
        code, out, _ = run(capsys, "poly", "--delta", 0.5, "--eps", 1e-2, "--format", "csv")
        rows = dict(list(csv.reader(out.splitlines()))[1:])
        assert code == 0 and rows["passed"] == "True"

    def test_bad_shots(self, capsys):
        code, _, _ = run(capsys, "echo", PROBLEMS / "diag12.json", "--shots", 0)
        assert code == 1

    def test_deterministic_reports(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            run(capsys, "gibbs", PROBLEMS / "gibbs_diag01.json", "--shots", 500, "--seed", 3, "--out", out)
        assert a.read_bytes() == b.read_bytes()
