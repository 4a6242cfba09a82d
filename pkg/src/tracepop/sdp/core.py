"""Backend-neutral conic problem container and solve results.

A :class:`ConicProblem` is an SDP in the moment ("dual") form::

    min  c^T y + offset
    s.t. G_b + sum_i y_i F_{b,i}  >= 0    for every block b
         E y = f

Its Lagrange dual is the Gram ("sum of squares") side::

    max  f^T mu - sum_b <G_b, X_b> + offset
    s.t. sum_b <F_{b,i}, X_b> + (E^T mu)_i = c_i,   X_b >= 0
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible-certificate"
UNBOUNDED = "unbounded-certificate"
MAX_ITER = "max-iter"
NUMERICAL_FAILURE = "numerical-failure"
STATUSES = (OPTIMAL, INFEASIBLE, UNBOUNDED, MAX_ITER, NUMERICAL_FAILURE)


class ProblemFormatError(ValueError):
    pass


class ProblemSizeError(RuntimeError):
    """The dense Schur complement would exceed the configured variable limit."""


@dataclass
class Block:
    """Affine symmetric matrix map stored as upper-triangle triplets.

    ``var[k] == -1`` marks a constant entry.
    """

    size: int
    var: np.ndarray
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray

    @classmethod
    def from_triplets(cls, size: int, triplets: Sequence[tuple]) -> "Block":
        if triplets:
            v, i, j, x = zip(*triplets)
        else:
            v = i = j = x = ()
        return cls(
            size,
            np.asarray(v, dtype=np.int64),
            np.asarray(i, dtype=np.int64),
            np.asarray(j, dtype=np.int64),
            np.asarray(x, dtype=float),
        )

    def canonical(self) -> "Block":
        """Merge duplicates, drop zeros, sort by (var, row, col)."""
        acc: Dict[tuple, float] = {}
        for v, i, j, x in zip(self.var.tolist(), self.row.tolist(), self.col.tolist(), self.val.tolist()):
            if i > j:
                i, j = j, i
            acc[(v, i, j)] = acc.get((v, i, j), 0.0) + x
        items = sorted((k, x) for k, x in acc.items() if x != 0.0)
        return Block.from_triplets(self.size, [(v, i, j, x) for (v, i, j), x in items])

    def stacked(self, m: int) -> sp.csc_matrix:
        """Full-symmetric vec representation, shape (size^2, m + 1); column 0 is constant."""
        s = self.size
        rows = np.concatenate([self.row * s + self.col, (self.col * s + self.row)[self.row != self.col]])
        cols = np.concatenate([self.var + 1, (self.var + 1)[self.row != self.col]])
        vals = np.concatenate([self.val, self.val[self.row != self.col]])
        return sp.csc_matrix((vals, (rows, cols)), shape=(s * s, m + 1))

    def matrix(self, y: np.ndarray) -> np.ndarray:
        """Evaluate the block at ``y``."""
        s = self.size
        coef = np.where(self.var < 0, 1.0, 0.0)
        mask = self.var >= 0
        coef[mask] = y[self.var[mask]]
        M = np.zeros((s, s))
        np.add.at(M, (self.row, self.col), coef * self.val)
        off = self.row != self.col
        np.add.at(M, (self.col[off], self.row[off]), (coef * self.val)[off])
        return M


@dataclass
class ConicProblem:
    m: int
    c: np.ndarray
    blocks: List[Block]
    eq_A: sp.csr_matrix = None
    eq_b: np.ndarray = None
    offset: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.eq_A is None:
            self.eq_A = sp.csr_matrix((0, self.m))
            self.eq_b = np.zeros(0)
        else:
            self.eq_A = sp.csr_matrix(self.eq_A, dtype=float)
            self.eq_b = np.asarray(self.eq_b, dtype=float)

    def validate(self):
        if self.c.shape != (self.m,):
            raise ProblemFormatError("objective length does not match variable count")
        if not np.all(np.isfinite(self.c)) or not np.isfinite(self.offset):
            raise ProblemFormatError("non-finite objective data")
        for b in self.blocks:
            if b.size <= 0:
                raise ProblemFormatError("block sizes must be positive")
            if len(b.var) and (b.var.max() >= self.m or b.var.min() < -1):
                raise ProblemFormatError("block references unknown variable")
            if len(b.row) and (min(b.row.min(), b.col.min()) < 0 or max(b.row.max(), b.col.max()) >= b.size):
                raise ProblemFormatError("block entry outside matrix")
            if np.any(b.row > b.col):
                raise ProblemFormatError("block entries must be stored with row <= col")
            if not np.all(np.isfinite(b.val)):
                raise ProblemFormatError("non-finite block data")
        if self.eq_A.shape != (len(self.eq_b), self.m):
            raise ProblemFormatError("equality data shape mismatch")
        if not (np.all(np.isfinite(self.eq_A.data)) and np.all(np.isfinite(self.eq_b))):
            raise ProblemFormatError("non-finite equality data")
        return self

    @property
    def n_eq(self) -> int:
        return self.eq_A.shape[0]

    def block_sizes(self) -> List[int]:
        return [b.size for b in self.blocks]

    def slack(self, y: np.ndarray) -> List[np.ndarray]:
        return [b.matrix(y) for b in self.blocks]

    def gram_objective(self, X: Sequence[np.ndarray], mu: np.ndarray) -> float:
        zero = np.zeros(self.m)
        g = sum(float(np.vdot(b.matrix(zero), Xb)) for b, Xb in zip(self.blocks, X))
        return float(self.eq_b @ mu) - g + self.offset

    def adjoint(self, X: Sequence[np.ndarray]) -> np.ndarray:
        """``(sum_b <F_{b,i}, X_b>)_i``."""
        out = np.zeros(self.m)
        for b, Xb in zip(self.blocks, X):
            mask = b.var >= 0
            w = np.where(b.row == b.col, 1.0, 2.0)[mask]
            np.add.at(out, b.var[mask], b.val[mask] * w * Xb[b.row[mask], b.col[mask]])
        return out


@dataclass
class SolverSettings:
    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.95
    verbose: bool = False
    # dense Schur complement is max_variables^2 doubles
    max_variables: int = 12000

    @classmethod
    def from_env(cls, **overrides) -> "SolverSettings":
        """Defaults overridable by ``TRACEPOP_TOL_GAP``, ``TRACEPOP_TOL_FEAS``, ``TRACEPOP_MAX_ITER``."""
        kw = {}
        if "TRACEPOP_TOL_GAP" in os.environ:
            kw["tol_gap"] = float(os.environ["TRACEPOP_TOL_GAP"])
        if "TRACEPOP_TOL_FEAS" in os.environ:
            kw["tol_feas"] = float(os.environ["TRACEPOP_TOL_FEAS"])
        if "TRACEPOP_MAX_ITER" in os.environ:
            kw["max_iter"] = int(os.environ["TRACEPOP_MAX_ITER"])
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


@dataclass
class SolveResult:
    status: str
    primal_objective: float  # moment side, c^T y + offset
    dual_objective: float  # Gram side
    y: np.ndarray
    X: List[np.ndarray]  # Gram matrices, one per block
    S: List[np.ndarray]  # slack matrices G + F(y)
    eq_multipliers: np.ndarray
    iterations: int
    residuals: Dict[str, float] = field(default_factory=dict)
    message: str = ""
    solver: str = "bundled"
    history: List[dict] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective)


def solve(problem: ConicProblem, settings: Optional[SolverSettings] = None, solver: str = "bundled") -> SolveResult:
    """Solve with the bundled interior-point method or an external backend.

    ``solver`` is ``"bundled"`` or ``"external:<id>"``.
    """
    settings = settings or SolverSettings()
    if solver in ("bundled", None):
        from .ipm import solve_ipm

        return solve_ipm(problem, settings)
    if solver.startswith("external:"):
        from .external import solve_external

        return solve_external(problem, solver.split(":", 1)[1], settings)
    raise ValueError(f"unknown solver {solver!r}")
