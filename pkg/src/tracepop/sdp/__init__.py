"""Conic problem container, bundled solver, SDPA I/O and external adapters."""
from .core import (
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_FAILURE,
    OPTIMAL,
    STATUSES,
    UNBOUNDED,
    Block,
    ConicProblem,
    ProblemFormatError,
    ProblemSizeError,
    SolveResult,
    SolverSettings,
    solve,
)
