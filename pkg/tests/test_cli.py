import json
from pathlib import Path

import pytest

from tracepop.cli import EXIT_INPUT, EXIT_OK, EXIT_VERIFY, main

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSolve:
    def test_toy_example(self, capsys):
        code, out, _ = run(capsys, "solve", "--example", "toy")
        assert code == EXIT_OK
        assert "basis=31" in out and "status=optimal" in out
        assert "bound=-0.0467" in out

    def test_problem_file_with_report(self, capsys, tmp_path):
        code, out, _ = run(capsys, "solve", PROBLEMS / "contraction.yaml", "--d-max", 3, "--jobs", 2,
                           "--out", tmp_path)
        assert code == EXIT_OK
        rows = json.loads((tmp_path / "report.json").read_text())
        assert [r["d"] for r in rows] == [2, 3]
        assert rows[0]["bound"] <= rows[1]["bound"] + 1e-6
        assert all(r["status"] == "optimal" for r in rows)

    def test_single_mode(self, capsys):
        code, out, _ = run(capsys, "solve", PROBLEMS / "contraction.yaml", "--mode", "single")
        assert code == EXIT_OK

    def test_heavy_example_needs_force(self, capsys):
        code, _, err = run(capsys, "solve", "--example", "bell-bilocal")
        assert code == EXIT_INPUT and "--force" in err

    @pytest.mark.parametrize("argv", [
        ["solve"],
        ["solve", "missing.yaml"],
        ["solve", "--example", "nope"],
        ["solve", "--example", "toy", "--d", "1"],
        ["solve", "--example", "toy", "--d", "0"],
        ["solve", "--example", "toy", "--solver", "gurobi"],
        ["solve", "--example", "toy", "--solver", "external:nope"],
    ])
    def test_input_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == EXIT_INPUT

    def test_malformed_yaml(self, capsys, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("vars: [x]\nobjective: tr(y)\n")
        code, _, err = run(capsys, "solve", p)
        assert code == EXIT_INPUT and "undeclared" in err


class TestExtract:
    def test_moment_file_scalar_point(self, capsys, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"components": [{"matrices": [[[1.0]]], "weight": 1}], "d": 1, "delta": 1}))
        code, out, _ = run(capsys, "extract", "--moments", p, "--out", tmp_path)
        assert code == EXIT_OK
        assert "component 0: dimension 1, weight 1" in out
        doc = json.loads((tmp_path / "minimizer.json").read_text())
        assert len(doc["components"]) == 1
        assert doc["components"][0]["matrices"][0][0][0] == pytest.approx(1.0)

    def test_toy_order_three(self, capsys):
        code, out, _ = run(capsys, "extract", "--example", "toy", "--d", 3)
        assert code == EXIT_OK
        line = next(l for l in out.splitlines() if l.startswith("objective at minimizer"))
        assert float(line.split(":")[1]) == pytest.approx(-1 / 32, abs=1e-6)

    def test_not_flat(self, capsys):
        code, out, _ = run(capsys, "extract", "--example", "toy", "--d", 2)
        assert code == EXIT_VERIFY and "not flat" in out

    def test_moment_file_and_problem_conflict(self, capsys, tmp_path):
        assert run(capsys, "extract", "--moments", tmp_path / "m.json", "--example", "toy")[0] == EXIT_INPUT


class TestCertify:
    def test_write_verify_tamper(self, capsys, tmp_path):
        code, out, _ = run(capsys, "certify", "--example", "toy", "--out", tmp_path)
        assert code == EXIT_OK
        proof = tmp_path / "certificate.txt"
        code, out, _ = run(capsys, "certify", "--verify-only", proof)
        assert code == EXIT_OK and "verified" in out
        code, out, _ = run(capsys, "certify", "--verify-only", proof, "--example", "toy")
        assert code == EXIT_OK

        lines = proof.read_text().splitlines()
        g = lines.index("gram") + 1
        first, *rest = lines[g].split()
        lines[g] = " ".join([repr(float(first) + 1e-3)] + rest)
        bad = tmp_path / "tampered.txt"
        bad.write_text("\n".join(lines) + "\n")
        code, out, _ = run(capsys, "certify", "--verify-only", bad)
        assert code == EXIT_VERIFY
        assert "residual 1.000e-03 at 1" in out

    def test_wrong_objective_fails(self, capsys, tmp_path):
        run(capsys, "certify", "--example", "toy", "--out", tmp_path)
        code, _, _ = run(capsys, "certify", "--verify-only", tmp_path / "certificate.txt",
                         PROBLEMS / "contraction.yaml")
        assert code in (EXIT_VERIFY, EXIT_INPUT)

    def test_exact_mode(self, capsys):
        code, out, _ = run(capsys, "certify", PROBLEMS / "contraction.yaml", "--exact")
        assert code == EXIT_OK and "exact residual" in out

    def test_garbage_proof(self, capsys, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("hello\n")
        assert run(capsys, "certify", "--verify-only", p)[0] == EXIT_INPUT


class TestExport:
    def test_stdout_deterministic(self, capsys):
        code, a, _ = run(capsys, "export", "--example", "toy")
        _, b, _ = run(capsys, "export", "--example", "toy")
        assert code == EXIT_OK and a == b
        data = [l for l in a.splitlines() if not l.startswith("*")]
        assert data[1:3] == ["1", "31"]

    def test_file(self, capsys, tmp_path):
        code, out, _ = run(capsys, "export", PROBLEMS / "toy.yaml", "--d", 3, "--out", tmp_path)
        assert code == EXIT_OK
        assert (tmp_path / "toy-d3.dat-s").exists()
