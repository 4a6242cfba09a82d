"""Adapters for external SDP solvers.

Every backend receives the problem through an exported SDPA file, so the
bundled writer is exercised on every external solve.  Supported ids:

``csdp``, ``sdpa``
    command-line binaries found on ``PATH``; output files are parsed back.
``cvxpy``, ``cvxpy-clarabel``, ``cvxpy-scs``
    the SDPA file is read back and handed to cvxpy (optional dependency).
"""
from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile
import time
from typing import Dict, List

import numpy as np

from .core import (
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    ConicProblem,
    SolveResult,
    SolverSettings,
)
from .sdpa import expand_solution, export_sdpa, read_sdpa, reduced_layout


class SolverConfigurationError(RuntimeError):
    """External solver unknown, not installed or not importable."""


# External status -> our status.  "Primal" below is each tool's own naming.
CSDP_STATUS: Dict[int, str] = {
    0: OPTIMAL,
    1: UNBOUNDED,  # CSDP primal (our Gram side) infeasible
    2: INFEASIBLE,  # CSDP dual (our moment side) infeasible
    3: OPTIMAL,  # partial success: solved to reduced accuracy
    4: MAX_ITER,
    5: NUMERICAL_FAILURE,
    6: NUMERICAL_FAILURE,
    7: NUMERICAL_FAILURE,
    8: NUMERICAL_FAILURE,
    9: NUMERICAL_FAILURE,
    10: NUMERICAL_FAILURE,
}

SDPA_STATUS: Dict[str, str] = {
    "pdOPT": OPTIMAL,
    "pdFEAS": MAX_ITER,
    "pFEAS": MAX_ITER,
    "dFEAS": MAX_ITER,
    "pFEAS_dINF": UNBOUNDED,
    "pINF_dFEAS": INFEASIBLE,
    "pdINF": INFEASIBLE,
    "pUNBD": UNBOUNDED,
    "dUNBD": INFEASIBLE,
    "noINFO": NUMERICAL_FAILURE,
}

CVXPY_STATUS: Dict[str, str] = {
    "optimal": OPTIMAL,
    "optimal_inaccurate": OPTIMAL,
    "infeasible": INFEASIBLE,
    "infeasible_inaccurate": INFEASIBLE,
    "unbounded": UNBOUNDED,
    "unbounded_inaccurate": UNBOUNDED,
    "infeasible_or_unbounded": INFEASIBLE,
    "user_limit": MAX_ITER,
    "solver_error": NUMERICAL_FAILURE,
}

SOLVER_IDS = ("csdp", "sdpa", "cvxpy", "cvxpy-clarabel", "cvxpy-scs")


def solve_external(p: ConicProblem, solver_id: str, settings: SolverSettings) -> SolveResult:
    p.validate()
    if solver_id in ("csdp", "sdpa"):
        binary = shutil.which(solver_id)
        if binary is None:
            raise SolverConfigurationError(f"external solver binary {solver_id!r} not found on PATH")
        return (_run_csdp if solver_id == "csdp" else _run_sdpa)(p, binary, settings)
    if solver_id.startswith("cvxpy"):
        return _run_cvxpy(p, solver_id, settings)
    raise SolverConfigurationError(f"unknown external solver {solver_id!r}; known: {', '.join(SOLVER_IDS)}")


def _result(p, status, y, X, iterations, message, solver, t0, mu=None) -> SolveResult:
    y = np.asarray(y, dtype=float)
    slack = p.slack(y)
    if mu is None:
        if p.n_eq:
            mu, *_ = np.linalg.lstsq(p.eq_A.toarray().T, p.c - p.adjoint(X), rcond=None)
        else:
            mu = np.zeros(0)
    pobj = float(p.c @ y + p.offset)
    dobj = p.gram_objective(X, mu)
    res = dict(
        primal=float(np.max(np.abs(p.eq_A @ y - p.eq_b), initial=0.0)),
        dual=float(np.linalg.norm(p.c - p.adjoint(X) - p.eq_A.T @ mu)),
        gap=abs(pobj - dobj),
        time=time.perf_counter() - t0,
    )
    if slack:
        res["min_eig"] = min(float(np.linalg.eigvalsh(S)[0]) for S in slack)
    return SolveResult(status, pobj, dobj, y, X, slack, np.asarray(mu, dtype=float), iterations, res, message, solver)


def _sizes(p: ConicProblem) -> List[int]:
    """Block sizes as written to the file (the LP block holds the unfolded rows)."""
    _, _, k = reduced_layout(p)
    return [b.size for b in p.blocks] + ([-2 * k] if k else [])


def _parse_block_entries(text: str, matno_wanted: int, sizes: List[int]):
    mats = [np.zeros((abs(s), abs(s))) for s in sizes]
    for line in text.splitlines():
        t = line.split()
        if len(t) != 5:
            continue
        mno, blk, i, j, v = int(t[0]), int(t[1]), int(t[2]), int(t[3]), float(t[4])
        if mno != matno_wanted:
            continue
        M = mats[blk - 1]
        M[i - 1, j - 1] = v
        M[j - 1, i - 1] = v
    return mats


def _run_csdp(p: ConicProblem, binary: str, settings: SolverSettings) -> SolveResult:
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        src = os.path.join(tmp, "problem.dat-s")
        out = os.path.join(tmp, "problem.sol")
        with open(src, "w") as fh:
            fh.write(export_sdpa(p))
        proc = subprocess.run([binary, src, out], capture_output=True, text=True)
        status = CSDP_STATUS.get(proc.returncode, NUMERICAL_FAILURE)
        if not os.path.exists(out):
            raise SolverConfigurationError(f"csdp produced no solution file: {proc.stderr.strip()}")
        with open(out) as fh:
            lines = fh.read().splitlines()
    y = expand_solution(p, [float(v) for v in lines[0].split()])
    Xs = _parse_block_entries("\n".join(lines[1:]), 2, _sizes(p))
    iters = _grep_int(proc.stdout, r"Iter:\s*(\d+)", last=True)
    return _result(p, status, y, Xs[: len(p.blocks)], iters, f"csdp exit code {proc.returncode}",
                   "external:csdp", t0)


def _grep_int(text: str, pattern: str, last: bool = False) -> int:
    got = re.findall(pattern, text)
    if not got:
        return 0
    return int(got[-1] if last else got[0])


def _sdpa_matrix_block(section: str, sizes: List[int]):
    """Parse ``{ {..} {..} }`` nested brace output of SDPA into matrices."""
    mats = []
    body = section
    for s in sizes:
        if s < 0:
            m = re.search(r"\{([^{}]*)\}", body)
            vals = [float(v) for v in re.split(r"[\s,]+", m.group(1).strip()) if v]
            mats.append(np.diag(vals))
            body = body[m.end():]
        else:
            rows = []
            for _ in range(s):
                m = re.search(r"\{([^{}]*)\}", body)
                rows.append([float(v) for v in re.split(r"[\s,]+", m.group(1).strip()) if v])
                body = body[m.end():]
            mats.append(np.array(rows))
    return mats


def _run_sdpa(p: ConicProblem, binary: str, settings: SolverSettings) -> SolveResult:
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        src = os.path.join(tmp, "problem.dat-s")
        out = os.path.join(tmp, "problem.out")
        with open(src, "w") as fh:
            fh.write(export_sdpa(p))
        proc = subprocess.run([binary, "-ds", src, "-o", out], capture_output=True, text=True)
        if not os.path.exists(out):
            raise SolverConfigurationError(f"sdpa produced no output file: {proc.stderr.strip()}")
        with open(out) as fh:
            text = fh.read()
    phase = re.search(r"phase\.value\s*=\s*(\w+)", text)
    status = SDPA_STATUS.get(phase.group(1) if phase else "noINFO", NUMERICAL_FAILURE)
    xvec = re.search(r"xVec\s*=\s*\{([^}]*)\}", text)
    sizes = _sizes(p)
    if xvec:
        y = expand_solution(p, [float(v) for v in re.split(r"[\s,]+", xvec.group(1).strip()) if v])
    else:
        y = np.zeros(p.m)
    ymat = text.split("yMat", 1)[1] if "yMat" in text else ""
    Ys = _sdpa_matrix_block(ymat, sizes) if ymat else [np.zeros((abs(s), abs(s))) for s in sizes]
    iters = _grep_int(text, r"Iteration\s*=\s*(\d+)")
    return _result(p, status, y, Ys[: len(p.blocks)], iters,
                   f"sdpa phase {phase.group(1) if phase else 'unknown'}", "external:sdpa", t0)


def _run_cvxpy(p: ConicProblem, solver_id: str, settings: SolverSettings) -> SolveResult:
    try:
        import cvxpy as cp
    except ImportError:  # pragma: no cover - depends on environment
        raise SolverConfigurationError("cvxpy is not installed") from None
    backend = {"cvxpy": "CLARABEL", "cvxpy-clarabel": "CLARABEL", "cvxpy-scs": "SCS"}.get(solver_id)
    if backend is None or backend not in cp.installed_solvers():
        raise SolverConfigurationError(f"cvxpy backend for {solver_id!r} is not available")
    t0 = time.perf_counter()
    q = read_sdpa(export_sdpa(p))
    y = cp.Variable(q.m)
    cons = []
    psd = []
    for b in q.blocks:
        st = b.stacked(q.m).tocsc()
        s = b.size
        G = np.asarray(st[:, 0].todense()).ravel().reshape(s, s)
        expr = cp.reshape(st[:, 1:] @ y, (s, s), order="C") + G
        # symmetrize explicitly so cvxpy accepts the cone membership
        con = 0.5 * (expr + expr.T) >> 0
        psd.append(con)
        cons.append(con)
    eq = None
    if q.n_eq:
        eq = q.eq_A @ y == q.eq_b
        cons.append(eq)
    prob = cp.Problem(cp.Minimize(q.c @ y + q.offset), cons)
    kw = {}
    if backend == "CLARABEL":
        kw = dict(tol_gap_abs=settings.tol_gap, tol_gap_rel=settings.tol_gap, tol_feas=settings.tol_feas,
                  max_iter=settings.max_iter)
    elif backend == "SCS":
        kw = dict(eps_abs=settings.tol_feas, eps_rel=settings.tol_gap, max_iters=100000)
    try:
        prob.solve(solver=backend, **kw)
    except cp.error.SolverError as e:
        return _result(p, NUMERICAL_FAILURE, np.zeros(p.m), [np.zeros((b.size, b.size)) for b in p.blocks],
                       0, str(e), f"external:{solver_id}", t0)
    status = CVXPY_STATUS.get(prob.status, NUMERICAL_FAILURE)
    yv = y.value if y.value is not None else np.zeros(p.m)
    X = [np.asarray(c.dual_value) if c.dual_value is not None else np.zeros((b.size, b.size))
         for c, b in zip(psd, q.blocks)]
    stats = prob.solver_stats
    iters = int(stats.num_iters or 0) if stats is not None else 0
    return _result(p, status, yv, X, iters, f"cvxpy/{backend} status {prob.status}", f"external:{solver_id}", t0)
