"""Moment relaxations of pure trace polynomial optimization problems.

One decision variable per reduced pure trace monomial ("trace class").  The
tracial Hankel block, localizing blocks and boundedness blocks all read from
the same variable vector, so the Hankel identifications are implicit and only
the normalization ``L(1) = 1`` (plus any general equalities) is explicit.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .algebra import (
    ONE,
    TraceMonomial,
    TracePoly,
    Word,
    _check_tuple,
    _WordCache,
    default_names,
    deglex_key,
    evaluate_monomial_trace,
    format_poly,
    tracial_degree,
)
from .basis import (
    DEFAULT_BASIS_CAP,
    INVOLUTION,
    PROJECTION,
    HankelStructure,
    MomentBasis,
    enumerate_basis,
    hankel_classes,
    reduce_cyclic,
)
from .sdp.core import Block, ConicProblem, SolveResult, SolverSettings, solve

INEQUALITY = "inequality"
EQUALITY = "equality"
CONSTRAINT_KINDS = (INEQUALITY, EQUALITY, PROJECTION, INVOLUTION)

PER_K = "per-k"
SINGLE = "single"
NO_BOUND = "none"
BOUNDEDNESS_MODES = (PER_K, SINGLE, NO_BOUND)

HANKEL = "hankel"
PURE_LOCALIZER = "pure-localizer"
TRACE_LOCALIZER = "trace-localizer"
BOUNDEDNESS = "boundedness"


class RelaxationError(ValueError):
    pass


@dataclass
class Constraint:
    """``poly >= 0`` / ``poly = 0``, or a square-reduction tag on ``var``."""

    kind: str
    poly: Optional[TracePoly] = None
    var: Optional[int] = None

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise RelaxationError(f"unknown constraint kind {self.kind!r}")
        if self.kind in (PROJECTION, INVOLUTION):
            if self.var is None:
                raise RelaxationError(f"{self.kind} constraint needs a variable")
        elif self.poly is None:
            raise RelaxationError(f"{self.kind} constraint needs a polynomial")

    def as_poly(self) -> TracePoly:
        """The constraint polynomial (``x^2 - x`` / ``x^2 - 1`` for tags)."""
        if self.poly is not None:
            return self.poly
        x = TracePoly.var(self.var)
        return x * x - (x if self.kind == PROJECTION else 1)


def _rule_of_equality(s: TracePoly) -> Optional[Tuple[int, str]]:
    """Recognize ``c (x_j^2 - x_j)`` and ``c (x_j^2 - 1)``."""
    if len(s) != 2:
        return None
    sq = [m for m in s.terms if not m.factors and len(m.tail) == 2 and m.tail[0] == m.tail[1]]
    if len(sq) != 1:
        return None
    j = sq[0].tail[0]
    c = s.terms[sq[0]]
    lin = TraceMonomial((), (j,))
    if s.terms.get(lin) == -c:
        return j, PROJECTION
    if s.terms.get(ONE) == -c:
        return j, INVOLUTION
    return None


@dataclass
class ProblemSpec:
    """Minimize (or maximize) a pure trace polynomial over a tracial set.

    The feasible set is cut out by ``constraints`` together with the
    boundedness conditions ``N - x_j^2 >= 0`` where ``N = bound``.
    """

    n: int
    objective: TracePoly
    constraints: List[Constraint] = field(default_factory=list)
    bound: float = 1.0
    sense: str = "min"
    names: Optional[List[str]] = None
    title: str = ""

    def __post_init__(self):
        if self.names is None:
            self.names = default_names(self.n)

    def validate(self) -> "ProblemSpec":
        if self.sense not in ("min", "max"):
            raise RelaxationError("sense must be 'min' or 'max'")
        if not self.bound > 0:
            raise RelaxationError("bound N must be positive")
        if self.objective.n_vars() > self.n:
            raise RelaxationError("objective uses undeclared variables")
        if not self.objective.is_symmetric:
            raise RelaxationError("objective must be symmetric")
        for c in self.constraints:
            if c.poly is not None:
                if c.poly.n_vars() > self.n:
                    raise RelaxationError("constraint uses undeclared variables")
                if not c.poly.is_symmetric:
                    raise RelaxationError(f"constraint {format_poly(c.poly, self.names)} is not symmetric")
            elif not 0 <= c.var < self.n:
                raise RelaxationError("tag references an undeclared variable")
        self.rules()
        return self

    def rules(self) -> Dict[int, str]:
        """Square-reduction rules from tags and recognizable equalities."""
        out: Dict[int, str] = {}
        for c in self.constraints:
            got = None
            if c.kind in (PROJECTION, INVOLUTION):
                got = (c.var, c.kind)
            elif c.kind == EQUALITY:
                got = _rule_of_equality(c.poly)
            if got is None:
                continue
            j, kind = got
            if out.get(j, kind) != kind:
                raise RelaxationError(f"conflicting square rules for {self.names[j]}")
            out[j] = kind
        return out

    def residual_constraints(self) -> List[Constraint]:
        """Constraints not absorbed into square-reduction rules."""
        out = []
        for c in self.constraints:
            if c.kind in (PROJECTION, INVOLUTION):
                continue
            if c.kind == EQUALITY and _rule_of_equality(c.poly) is not None:
                continue
            out.append(c)
        return out

    @property
    def min_objective(self) -> TracePoly:
        return self.objective if self.sense == "min" else -self.objective


@dataclass
class RelaxationOptions:
    boundedness: str = PER_K
    # skip boundedness for variables already bounded by a square rule
    skip_tagged: bool = True
    basis_cap: int = DEFAULT_BASIS_CAP

    def __post_init__(self):
        if self.boundedness not in BOUNDEDNESS_MODES:
            raise RelaxationError(f"boundedness mode must be one of {BOUNDEDNESS_MODES}")


@dataclass
class BlockInfo:
    """Bookkeeping for one PSD block: entry (i, j) is ``L(Tr(u_i* g u_j))``."""

    kind: str
    basis: List[TraceMonomial]
    generator: TracePoly
    label: str

    @property
    def size(self) -> int:
        return len(self.basis)


@dataclass
class EqualityRow:
    """Row ``L(Tr(u* g v)) = rhs``; the normalization row has ``g = 1``, ``u = v = 1``."""

    u: TraceMonomial
    v: TraceMonomial
    generator: TracePoly
    rhs: float
    label: str


class _Registry:
    """Trace class variables, keyed by reduced pure monomials."""

    def __init__(self, reps: List[TraceMonomial], index: Dict[TraceMonomial, int], rules):
        self.reps = list(reps)
        self.index = dict(index)
        self.rules = rules

    def key(self, factors: Sequence[Word]) -> TraceMonomial:
        fs = [reduce_cyclic(f, self.rules) for f in factors]
        return TraceMonomial(tuple(sorted((f for f in fs if f), key=deglex_key)), ())

    def var(self, key: TraceMonomial) -> int:
        i = self.index.get(key)
        if i is None:
            i = len(self.reps)
            self.index[key] = i
            self.reps.append(key)
        return i

    def pair(self, u: TraceMonomial, g: TracePoly, v: TraceMonomial) -> Dict[int, float]:
        """Linear form of ``L(Tr(u* g v))`` over class variables."""
        out: Dict[int, float] = {}
        for m, c in g.terms.items():
            w = u.tail[::-1] + m.tail + v.tail
            fs = list(u.factors) + list(v.factors) + list(m.factors)
            if w:
                fs.append(w)
            i = self.var(self.key(fs))
            out[i] = out.get(i, 0.0) + float(c)
        return {i: c for i, c in out.items() if c != 0.0}

    def of_pure(self, f: TracePoly, grow: bool = True) -> Dict[int, float]:
        out: Dict[int, float] = {}
        for m, c in f.terms.items():
            key = self.key(m.factors + ((m.tail,) if m.tail else ()))
            i = self.index.get(key)
            if i is None:
                if not grow:
                    raise KeyError(key)
                i = self.var(key)
            out[i] = out.get(i, 0.0) + float(c)
        return out


@dataclass
class AssembledRelaxation:
    spec: ProblemSpec
    d: int
    options: RelaxationOptions
    general: bool
    conic: ConicProblem
    basis: MomentBasis
    hankel: HankelStructure
    blocks: List[BlockInfo]
    eq_rows: List[EqualityRow]
    class_reps: List[TraceMonomial]
    class_index: Dict[TraceMonomial, int]
    rules: Dict[int, str]
    build_time: float = 0.0

    @property
    def sign(self) -> int:
        return 1 if self.spec.sense == "min" else -1

    @property
    def n_classes(self) -> int:
        return len(self.class_reps)

    def hankel_equations(self) -> int:
        """Entry identifications of the Hankel block (full-matrix count)."""
        return self.hankel.equation_count()

    def solver_equations(self) -> int:
        """Hankel identifications plus the normalization equation."""
        return self.hankel_equations() + 1

    def key(self, m: TraceMonomial) -> TraceMonomial:
        reg = _Registry([], {}, self.rules)
        return reg.key(m.factors + ((m.tail,) if m.tail else ()))

    def moment(self, f: TracePoly, y: np.ndarray) -> float:
        """``L(f)`` for a polynomial within the relaxation's degree range.

        Non-pure monomials are traced first.
        """
        total = 0.0
        for m, c in f.terms.items():
            i = self.class_index.get(self.key(m))
            if i is None:
                raise KeyError(f"monomial of degree {m.degree} not in the moment range")
            total += float(c) * float(y[i])
        return total

    def hankel_matrix(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float)[self.hankel.classes]

    def block_matrices(self, y: np.ndarray) -> List[np.ndarray]:
        return self.conic.slack(np.asarray(y, dtype=float))

    def bound_of(self, result: SolveResult) -> float:
        """Bound in the problem's own sense, taken from the Gram (SOS) side."""
        return self.sign * result.dual_objective

    def value_of(self, result: SolveResult) -> float:
        """Moment-side objective value in the problem's own sense."""
        return self.sign * result.primal_objective

    def summary(self) -> Dict[str, object]:
        return dict(
            d=self.d,
            basis_size=len(self.basis),
            classes=self.hankel.n_classes,
            variables=self.conic.m,
            hankel_equations=self.hankel_equations(),
            solver_equations=self.solver_equations(),
            blocks=[(b.kind, b.size, b.label) for b in self.blocks],
            explicit_equalities=self.conic.n_eq,
        )


def _ceil_half(k: int) -> int:
    return (k + 1) // 2


def minimal_order(spec: ProblemSpec, options: Optional[RelaxationOptions] = None) -> int:
    options = options or RelaxationOptions()
    degs = [tracial_degree(spec.objective)]
    for c in spec.residual_constraints():
        degs.append(tracial_degree(c.poly))
    out = max(_ceil_half(k) for k in degs) if degs else 0
    if _bounded_vars(spec, options):
        out = max(out, 1)
    return max(out, 1)


def _bounded_vars(spec: ProblemSpec, options: RelaxationOptions) -> List[int]:
    if options.boundedness == NO_BOUND:
        return []
    rules = spec.rules()
    return [j for j in range(spec.n) if not (options.skip_tagged and j in rules)]


def _add_block(reg: _Registry, info: BlockInfo, triplets_out: List[Tuple[int, list]]):
    trip = []
    B = info.basis
    for i in range(len(B)):
        for j in range(i, len(B)):
            for var, c in reg.pair(B[i], info.generator, B[j]).items():
                trip.append((var, i, j, c))
    triplets_out.append((len(B), trip))


def _build(spec: ProblemSpec, d: int, options: Optional[RelaxationOptions], general: bool) -> AssembledRelaxation:
    t0 = time.perf_counter()
    options = options or RelaxationOptions()
    spec.validate()
    if not spec.objective.is_pure:
        raise RelaxationError("objective must be a pure trace polynomial")
    dmin = minimal_order(spec, options)
    if d < dmin:
        raise RelaxationError(f"relaxation order {d} is below the minimal order {dmin}")
    rules = spec.rules()
    cons = spec.residual_constraints()
    if not general:
        for c in cons:
            if not c.poly.is_pure:
                raise RelaxationError(
                    "constraint is not a pure trace polynomial; use the general relaxation"
                )

    basis = enumerate_basis(spec.n, d, rules, cap=options.basis_cap)
    hankel = hankel_classes(basis)
    reg = _Registry(hankel.class_reps, hankel.class_index, rules)
    one = TracePoly.constant(1)

    infos: List[BlockInfo] = [BlockInfo(HANKEL, basis.entries, one, "tracial Hankel")]
    raw: List[Tuple[int, list]] = []
    # Hankel block straight from the class labels
    trip = []
    N = len(basis)
    for i in range(N):
        for j in range(i, N):
            trip.append((int(hankel.classes[i, j]), i, j, 1.0))
    raw.append((N, trip))

    eq_rows: List[EqualityRow] = [EqualityRow(ONE, ONE, one, 1.0, "normalization")]
    pure_cache: Dict[int, MomentBasis] = {}

    def pure_basis(k: int) -> List[TraceMonomial]:
        if k not in pure_cache:
            pure_cache[k] = enumerate_basis(spec.n, k, rules, pure_only=True, cap=options.basis_cap)
        return pure_cache[k].entries

    def trace_basis(k: int) -> List[TraceMonomial]:
        return basis.up_to(k).entries

    for idx, c in enumerate(cons):
        s = c.poly
        ds = _ceil_half(tracial_degree(s))
        k = d - ds
        B = trace_basis(k) if general else pure_basis(k)
        kind = TRACE_LOCALIZER if general else PURE_LOCALIZER
        label = f"{c.kind} {idx}: {format_poly(s, spec.names)}"
        if c.kind == INEQUALITY:
            info = BlockInfo(kind, B, s, label)
            infos.append(info)
            _add_block(reg, info, raw)
        else:
            seen = set()
            for i in range(len(B)):
                for j in range(i, len(B)):
                    form = reg.pair(B[i], s, B[j])
                    key = tuple(sorted(form.items()))
                    if not form or key in seen:
                        continue
                    seen.add(key)
                    eq_rows.append(EqualityRow(B[i], B[j], s, 0.0, label))

    N_bound = spec.bound
    for j in _bounded_vars(spec, options):
        name = spec.names[j]
        if options.boundedness == PER_K:
            for k in range(1, d + 1):
                g = TracePoly.constant(_exact_power(N_bound, k)) - TracePoly.tr((j,) * (2 * k))
                info = BlockInfo(BOUNDEDNESS, pure_basis(d - k), g, f"N^{k} - tr({name}^{2 * k})")
                infos.append(info)
                _add_block(reg, info, raw)
        else:
            x = TracePoly.var(j)
            g = TracePoly.constant(_exact_power(N_bound, 1)) - x * x
            info = BlockInfo(BOUNDEDNESS, trace_basis(d - 1), g, f"N - {name}^2")
            infos.append(info)
            _add_block(reg, info, raw)

    try:
        obj = reg.of_pure(spec.min_objective, grow=False)
    except KeyError:
        raise RelaxationError("objective degree exceeds 2d") from None

    m = len(reg.reps)
    blocks = [Block.from_triplets(size, trip).canonical() for size, trip in raw]
    c = np.zeros(m)
    for i, v in obj.items():
        c[i] += v
    rows, cols, vals, rhs = [], [], [], []
    for r, row in enumerate(eq_rows):
        form = reg.pair(row.u, row.generator, row.v)
        for i, v in form.items():
            rows.append(r)
            cols.append(i)
            vals.append(v)
        rhs.append(row.rhs)
    E = sp.csr_matrix((vals, (rows, cols)), shape=(len(eq_rows), m))
    conic = ConicProblem(m, c, blocks, E, np.array(rhs), 0.0).validate()
    return AssembledRelaxation(
        spec=spec,
        d=d,
        options=options,
        general=general,
        conic=conic,
        basis=basis,
        hankel=hankel,
        blocks=infos,
        eq_rows=eq_rows,
        class_reps=reg.reps,
        class_index=reg.index,
        rules=rules,
        build_time=time.perf_counter() - t0,
    )


def _exact_power(N, k):
    if isinstance(N, (int, Fraction)):
        return Fraction(N) ** k
    return float(N) ** k


def build_pure_relaxation(spec: ProblemSpec, d: int, options: Optional[RelaxationOptions] = None) -> AssembledRelaxation:
    """Hankel block, pure trace localizers over T-words, boundedness blocks."""
    return _build(spec, d, options, general=False)


def build_general_relaxation(spec: ProblemSpec, d: int, options: Optional[RelaxationOptions] = None) -> AssembledRelaxation:
    """As :func:`build_pure_relaxation`, with trace localizers ``L(Tr(u* s v))``
    indexed by all tracial words, so constraints may be non-pure."""
    return _build(spec, d, options, general=True)


def build_relaxation(spec: ProblemSpec, d: int, options: Optional[RelaxationOptions] = None) -> AssembledRelaxation:
    """Pure builder when every residual constraint is pure, general otherwise."""
    general = any(not c.poly.is_pure for c in spec.residual_constraints())
    return _build(spec, d, options, general=general)


def evaluation_functional(mats, relax: AssembledRelaxation) -> np.ndarray:
    """Moment vector ``y_i = Tr(rep_i)(A)`` with the normalized trace."""
    mats, k = _check_tuple(mats, relax.spec.n)
    cache = _WordCache([np.asarray(A, dtype=float) for A in mats], k)
    return np.array([float(evaluate_monomial_trace(m, cache)) for m in relax.class_reps])


def tracial_state_moments(components, relax: AssembledRelaxation) -> np.ndarray:
    """Moments of a convex combination ``sum_j lam_j Tr(.)(A^(j))``.

    ``components`` is a sequence of ``(matrices, weight)``.  Each monomial is a
    product of traces, so this evaluates at the weighted direct sum, not the
    convex combination of per-component functionals.
    """
    comps = [(list(A), float(w)) for A, w in components]
    caches = []
    for A, w in comps:
        mats, k = _check_tuple(A, relax.spec.n)
        caches.append((_WordCache([np.asarray(X, dtype=float) for X in mats], k), w))

    def tr(u):
        return sum(w * float(c.tr(u)) for c, w in caches)

    out = []
    for m in relax.class_reps:
        v = 1.0
        for u in m.factors:
            v *= tr(u)
        out.append(v)
    return np.array(out)


@dataclass
class RelaxationResult:
    d: int
    status: str
    bound: float
    value: float
    result: SolveResult
    relaxation: AssembledRelaxation

    @property
    def optimal(self) -> bool:
        return self.result.optimal


def solve_relaxation(
    relax: AssembledRelaxation,
    settings: Optional[SolverSettings] = None,
    solver: str = "bundled",
) -> RelaxationResult:
    res = solve(relax.conic, settings, solver)
    return RelaxationResult(relax.d, res.status, relax.bound_of(res), relax.value_of(res), res, relax)


def solve_hierarchy(
    spec: ProblemSpec,
    orders: Sequence[int],
    options: Optional[RelaxationOptions] = None,
    settings: Optional[SolverSettings] = None,
    solver: str = "bundled",
    general: Optional[bool] = None,
) -> List[RelaxationResult]:
    out = []
    for d in orders:
        if general is None:
            relax = build_relaxation(spec, d, options)
        else:
            relax = _build(spec, d, options, general)
        out.append(solve_relaxation(relax, settings, solver))
    return out
