import os
import stat
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from tracepop.examples import toy
from tracepop.relaxation import build_relaxation
from tracepop.sdp.core import (
    INFEASIBLE,
    OPTIMAL,
    STATUSES,
    UNBOUNDED,
    Block,
    ConicProblem,
    ProblemFormatError,
    ProblemSizeError,
    SolverSettings,
    solve,
)
from tracepop.sdp.external import (
    CSDP_STATUS,
    CVXPY_STATUS,
    SDPA_STATUS,
    SolverConfigurationError,
    solve_external,
)
from tracepop.sdp.sdpa import expand_solution, export_sdpa, read_sdpa, reduced_layout

B = Block.from_triplets


def problem(m, c, blocks, A=None, b=None):
    A = None if A is None else sp.csr_matrix(np.array(A, dtype=float))
    return ConicProblem(m, np.array(c, dtype=float), blocks, A, None if b is None else np.array(b, float)).validate()


def scalar_pinned():
    return problem(1, [1], [B(1, [(0, 0, 0, 1.0)])], [[1]], [1])


def disk():
    # [[1, y], [y, 1]] >= 0
    return problem(1, [1], [B(2, [(-1, 0, 0, 1.0), (-1, 1, 1, 1.0), (0, 0, 1, 1.0)])])


def same_data(p, q):
    assert p.m == q.m
    assert np.array_equal(p.c, q.c)
    assert p.offset == q.offset
    assert len(p.blocks) == len(q.blocks)
    for a, b in zip(p.blocks, q.blocks):
        a, b = a.canonical(), b.canonical()
        assert a.size == b.size
        for f in ("var", "row", "col", "val"):
            assert np.array_equal(getattr(a, f), getattr(b, f))
    assert (p.eq_A != q.eq_A).nnz == 0
    assert np.array_equal(p.eq_b, q.eq_b)


class TestBundled:
    def test_pinned_scalar(self):
        r = solve(scalar_pinned())
        assert r.status == OPTIMAL
        assert r.primal_objective == pytest.approx(1, abs=1e-7)

    def test_eigenvalue_condition(self):
        r = solve(disk())
        assert r.status == OPTIMAL
        assert r.primal_objective == pytest.approx(-1, abs=1e-7)
        assert r.dual_objective <= r.primal_objective + 1e-7

    def test_optimality_invariants(self):
        p = build_relaxation(toy(), 2).conic
        s = SolverSettings()
        r = solve(p, s)
        assert r.status == OPTIMAL
        assert abs(r.primal_objective - r.dual_objective) <= s.tol_gap * (1 + abs(r.primal_objective)) * 10
        assert min(np.linalg.eigvalsh(S)[0] for S in p.slack(r.y)) >= -s.tol_feas
        assert np.abs(p.eq_A @ r.y - p.eq_b).max() <= s.tol_feas
        for X in r.X:
            assert np.linalg.eigvalsh(X)[0] >= -s.tol_feas
        np.testing.assert_allclose(p.adjoint(r.X) + p.eq_A.T @ r.eq_multipliers, p.c, atol=1e-6)

    def test_weak_duality_along_iterates(self):
        r = solve(build_relaxation(toy(), 2).conic)
        for h in r.history:
            if "pobj" in h and "dobj" in h:
                assert h["dobj"] <= h["pobj"] + 10 * 1e-8 * (1 + abs(h["pobj"]))

    def test_infeasible_equalities(self):
        p = problem(1, [1], [B(1, [(0, 0, 0, 1.0)])], [[1]], [-1])
        assert solve(p).status == INFEASIBLE

    def test_infeasible_cone(self):
        # y >= 0 and -1 - y >= 0
        p = problem(1, [0], [B(1, [(0, 0, 0, 1.0)]), B(1, [(-1, 0, 0, -1.0), (0, 0, 0, -1.0)])])
        assert solve(p).status == INFEASIBLE

    def test_unbounded(self):
        p = problem(1, [1], [B(1, [(0, 0, 0, -1.0)])])
        assert solve(p).status == UNBOUNDED

    def test_deterministic(self):
        p = build_relaxation(toy(), 2).conic
        a, b = solve(p), solve(p)
        assert np.array_equal(a.y, b.y)
        assert a.iterations == b.iterations

    def test_size_guard(self):
        with pytest.raises(ProblemSizeError):
            solve(disk(), SolverSettings(max_variables=0))

    def test_format_errors(self):
        with pytest.raises(ProblemFormatError):
            problem(1, [1], [B(1, [(3, 0, 0, 1.0)])])
        with pytest.raises(ProblemFormatError):
            problem(1, [np.nan], [B(1, [(0, 0, 0, 1.0)])])

    def test_settings_from_env(self, monkeypatch):
        monkeypatch.setenv("TRACEPOP_TOL_GAP", "1e-5")
        assert SolverSettings.from_env().tol_gap == 1e-5
        assert SolverSettings.from_env(tol_gap=1e-3).tol_gap == 1e-3

    def test_unknown_solver(self):
        with pytest.raises(ValueError):
            solve(disk(), solver="magic")


class TestSdpaExport:
    def test_five_line_file(self):
        p = problem(1, [1], [B(1, [(0, 0, 0, 1.0)])])
        assert export_sdpa(p).splitlines() == ["1", "1", "1", "1", "1 1 1 1 1"]

    def test_toy_has_one_block(self):
        p = build_relaxation(toy(), 2).conic
        text = export_sdpa(p)
        data = [l for l in text.splitlines() if not l.startswith("*")]
        assert data[1] == "1"
        assert data[2] == "31"
        keep, gone, k = reduced_layout(p)
        assert gone == {0: 1.0} and k == 0
        assert len(keep) == p.m - 1

    @pytest.mark.parametrize("d", [2, 3])
    def test_round_trip_toy(self, d):
        p = build_relaxation(toy(), d).conic
        text = export_sdpa(p)
        q = read_sdpa(text)
        same_data(p, q)
        assert export_sdpa(q) == text

    def test_round_trip_with_general_equalities(self):
        from tracepop.algebra import TracePoly
        from tracepop.relaxation import Constraint, ProblemSpec

        s = TracePoly.tr((0, 1)) - TracePoly.constant(0.25)
        spec = ProblemSpec(2, TracePoly.tr((0,)), [Constraint("equality", poly=s)], 1).validate()
        p = build_relaxation(spec, 1).conic
        text = export_sdpa(p)
        assert "*equalities" in text
        same_data(p, read_sdpa(text))

    def test_round_trip_plain_lp_rows(self):
        p = problem(2, [1, 2], [B(1, [(0, 0, 0, 1.0), (1, 0, 0, 1.0)])], [[1, 1], [1, -1]], [1, 0])
        text = export_sdpa(p)
        assert "*equalities 2" in text
        q = read_sdpa(text)
        same_data(p, q)

    def test_expand_solution(self):
        p = build_relaxation(toy(), 2).conic
        y = np.arange(p.m, dtype=float)
        keep, _, _ = reduced_layout(p)
        y2 = expand_solution(p, y[keep])
        assert y2[0] == 1.0 and np.array_equal(y2[1:], y[1:])

    def test_deterministic(self):
        assert export_sdpa(build_relaxation(toy(), 2).conic) == export_sdpa(build_relaxation(toy(), 2).conic)

    def test_read_rejects_garbage(self):
        with pytest.raises(ProblemFormatError):
            read_sdpa("1\n1\n1\n1\n1 1 1 1\n")


class TestExternal:
    def test_status_tables_are_total(self):
        for table in (CSDP_STATUS, SDPA_STATUS, CVXPY_STATUS):
            assert set(table.values()) <= set(STATUSES)
        assert set(CSDP_STATUS) == set(range(11))
        assert {"pdOPT", "pdINF", "pFEAS_dINF", "pINF_dFEAS", "noINFO"} <= set(SDPA_STATUS)
        assert {"optimal", "infeasible", "unbounded", "solver_error"} <= set(CVXPY_STATUS)

    @pytest.mark.parametrize("sid", ["csdp", "sdpa"])
    def test_missing_binary(self, sid, monkeypatch, tmp_path):
        monkeypatch.setenv("PATH", str(tmp_path))
        with pytest.raises(SolverConfigurationError):
            solve_external(disk(), sid, SolverSettings())

    def test_unknown_id(self):
        with pytest.raises(SolverConfigurationError):
            solve_external(disk(), "mosek-9000", SolverSettings())

    def test_fake_csdp_on_path(self, monkeypatch, tmp_path):
        # a stand-in binary that writes a fixed solution file for min y, [y] >= 0
        script = tmp_path / "csdp"
        script.write_text(f"#!{sys.executable}\nimport sys\nopen(sys.argv[2], 'w').write('0.0\\n2 1 1 1 1.0\\n')\n")
        script.chmod(script.stat().st_mode | stat.S_IEXEC)
        monkeypatch.setenv("PATH", str(tmp_path) + os.pathsep + os.environ["PATH"])
        p = problem(1, [1], [B(1, [(0, 0, 0, 1.0)])])
        r = solve(p, solver="external:csdp")
        assert r.status == OPTIMAL
        assert r.solver == "external:csdp"
        assert r.y[0] == 0.0
        assert r.X[0][0, 0] == 1.0
        assert r.dual_objective == 0.0

    @pytest.mark.parametrize("sid", ["cvxpy-clarabel", "cvxpy-scs"])
    def test_cvxpy_agrees_on_toy(self, sid):
        pytest.importorskip("cvxpy")
        p = build_relaxation(toy(), 2).conic
        ours = solve(p)
        theirs = solve(p, SolverSettings(tol_gap=1e-9, tol_feas=1e-9), solver=f"external:{sid}")
        assert theirs.status == OPTIMAL
        tol = 1e-6 if sid == "cvxpy-clarabel" else 1e-4
        assert theirs.primal_objective == pytest.approx(ours.primal_objective, abs=tol)
