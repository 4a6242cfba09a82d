"""Sum-of-hermitian-squares certificates and the univariate positivity split.

A certificate for the bound ``m`` states, modulo the square rules,

    a_min - m = sum_terms sum_{p,q} G[p, q] * Tr(u_p* g u_q)

where every term carries a basis ``u``, a generator ``g`` and a Gram matrix
``G``.  ``G`` is PSD for the square-type terms and arbitrary for equality
terms (``g`` is an equality constraint).  Tags name the term shape:

=============  ==========================================  ===============
tag            element                                      basis
=============  ==========================================  ===============
trace_square   ``Tr(f f*)``                                 tracial words
pure_square    ``a^2 s`` with ``a`` pure                    pure words
general        ``Tr(f s f*)``                               tracial words
boundedness    ``a^2 (N^k - Tr(x^2k))`` or ``Tr(f (N - x^2) f*)``
equality       ``c Tr(u* s v)``, ``s = 0`` a constraint     two words
=============  ==========================================  ===============

Proof files are plain text::

    tracepop-certificate 1
    vars x1 x2 x3
    N 1
    d 2
    sense min
    rules x1=projection ...          (may be empty)
    objective <expression>
    m <number>
    terms <count>
    term <tag>
    generator <expression>
    basis <size>
    <one monomial per line>
    gram
    <one matrix row per line>
    end

Numbers are Python float reprs or exact ``p/q``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from gmpy2 import mpq

from .algebra import (
    ONE,
    TraceMonomial,
    TracePoly,
    deglex_key,
    format_monomial,
    format_poly,
    involution,
    tracial_degree,
    universal_trace,
)
from .basis import reduce_cyclic, reduce_poly
from .relaxation import (
    BOUNDEDNESS,
    HANKEL,
    PURE_LOCALIZER,
    TRACE_LOCALIZER,
    AssembledRelaxation,
    ProblemSpec,
    RelaxationError,
    RelaxationOptions,
    build_relaxation,
    solve_relaxation,
)
from .sdp.core import SolveResult, SolverSettings

TRACE_SQUARE = "trace_square"
PURE_SQUARE = "pure_square"
GENERAL = "general"
BOUNDED = "boundedness"
EQUALITY_TERM = "equality"
TAGS = (TRACE_SQUARE, PURE_SQUARE, GENERAL, BOUNDED, EQUALITY_TERM)

_TAG_OF_BLOCK = {
    HANKEL: TRACE_SQUARE,
    PURE_LOCALIZER: PURE_SQUARE,
    TRACE_LOCALIZER: GENERAL,
    BOUNDEDNESS: BOUNDED,
}

CLIP_TOL = 1e-7
DEFAULT_DENOMINATOR = 10**6


class CertificateError(RuntimeError):
    pass


@dataclass
class CertificateTerm:
    tag: str
    generator: TracePoly
    basis: List[TraceMonomial]
    gram: object  # float ndarray, or list of lists of Fraction
    label: str = ""

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def is_exact(self) -> bool:
        return not isinstance(self.gram, np.ndarray)

    def gram_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.gram]) if self.is_exact else self.gram

    def squares(self, tol: float = 1e-12) -> List[Tuple[float, TracePoly]]:
        """``(weight, f)`` pairs with ``G = sum weight * f f^T`` (PSD tags)."""
        lam, V = np.linalg.eigh(self.gram_array())
        out = []
        for k in range(len(lam)):
            if lam[k] <= tol * max(1.0, abs(lam).max()):
                continue
            f = TracePoly({u: float(V[p, k]) for p, u in enumerate(self.basis)})
            out.append((float(lam[k]), f))
        return out

    def polynomial(self) -> TracePoly:
        """Symbolic expansion ``sum G[p,q] Tr(u_p* g u_q)`` (slow, unreduced)."""
        total = TracePoly()
        G = self.gram
        for p, u in enumerate(self.basis):
            left = involution(TracePoly.from_monomial(u)) * self.generator
            for q, v in enumerate(self.basis):
                c = G[p][q]
                if c:
                    total = total + universal_trace(left * TracePoly.from_monomial(v)) * c
        return total


@dataclass
class Certificate:
    """``a_min - m`` as a sum of tagged terms; ``a_min = a`` or ``-a`` for max."""

    n: int
    N: object
    d: int
    m: object
    sense: str
    names: List[str]
    rules: Dict[int, str]
    objective: TracePoly
    terms: List[CertificateTerm] = field(default_factory=list)

    @property
    def sign(self) -> int:
        return 1 if self.sense == "min" else -1

    @property
    def bound(self) -> float:
        """The certified bound in the objective's own sense."""
        return self.sign * float(self.m)

    @property
    def min_objective(self) -> TracePoly:
        return self.objective if self.sense == "min" else -self.objective

    def validate(self) -> "Certificate":
        for t in self.terms:
            if t.tag not in TAGS:
                raise CertificateError(f"unknown term tag {t.tag!r}")
            G = t.gram_array()
            if G.shape != (t.size, t.size):
                raise CertificateError(f"{t.tag} term: Gram shape {G.shape} does not match basis size {t.size}")
            if not np.array_equal(G, G.T):
                raise CertificateError(f"{t.tag} term: Gram matrix is not symmetric")
            if not t.generator.is_symmetric:
                raise CertificateError(f"{t.tag} term: generator is not symmetric")
            if t.tag == PURE_SQUARE or (t.tag == BOUNDED and t.generator.is_pure):
                if not all(u.is_pure for u in t.basis):
                    raise CertificateError(f"{t.tag} term needs a pure basis")
            if t.tag == TRACE_SQUARE and t.generator != TracePoly.constant(1):
                raise CertificateError("trace_square term must have generator 1")
        return self

    def summary(self) -> str:
        counts: Dict[str, int] = {}
        for t in self.terms:
            counts[t.tag] = counts.get(t.tag, 0) + 1
        parts = ", ".join(f"{k}: {v}" for k, v in sorted(counts.items()))
        return f"bound {self.bound:.10g} ({self.sense}), {len(self.terms)} terms ({parts})"


# -- extraction -------------------------------------------------------------------

def extract_certificate(
    relax: AssembledRelaxation,
    result: SolveResult,
    clip_tol: float = CLIP_TOL,
    reject_factor: float = 100.0,
) -> Certificate:
    """Read a certificate off the Gram side of an optimal solve.

    Negative eigenvalues are clipped to zero; anything below
    ``-reject_factor * clip_tol`` aborts with the offending eigenvalue.
    """
    if not result.optimal:
        raise CertificateError(f"solver status is {result.status}, not optimal")
    if len(result.X) != len(relax.blocks):
        raise CertificateError("result does not match the relaxation's blocks")
    terms = []
    for info, X in zip(relax.blocks, result.X):
        X = 0.5 * (np.asarray(X, dtype=float) + np.asarray(X, dtype=float).T)
        lam, V = np.linalg.eigh(X)
        if lam.size and lam[0] < -reject_factor * clip_tol:
            raise CertificateError(f"Gram block '{info.label}' is indefinite: eigenvalue {lam[0]:.3e}")
        lam = np.where(lam < 0, 0.0, lam)
        G = (V * lam) @ V.T
        G = 0.5 * (G + G.T)
        terms.append(CertificateTerm(_TAG_OF_BLOCK[info.kind], info.generator, list(info.basis), G, info.label))
    mu = np.asarray(result.eq_multipliers, dtype=float)
    if mu.size != len(relax.eq_rows):
        raise CertificateError("missing equality multipliers")
    for row, c in zip(relax.eq_rows[1:], mu[1:]):
        if c == 0.0:
            continue
        if row.u == row.v:
            basis, G = [row.u], np.array([[c]])
        else:
            basis, G = [row.u, row.v], np.array([[0.0, c / 2], [c / 2, 0.0]])
        terms.append(CertificateTerm(EQUALITY_TERM, row.generator, basis, G, row.label))
    spec = relax.spec
    return Certificate(
        n=spec.n,
        N=spec.bound,
        d=relax.d,
        m=float(mu[0]),
        sense=spec.sense,
        names=list(spec.names),
        rules=dict(relax.rules),
        objective=spec.objective,
        terms=terms,
    ).validate()


# -- verification -------------------------------------------------------------------

@dataclass
class VerificationReport:
    residual: object  # float, or Fraction in exact mode
    worst: Optional[TraceMonomial]
    exact: bool
    repair: float = 0.0  # largest Schur entry dropped to keep exact Grams PSD
    n_monomials: int = 0

    def passed(self, tol: float) -> bool:
        return float(self.residual) <= tol

    def describe(self, names=None) -> str:
        where = format_monomial(self.worst, names) if self.worst is not None else "-"
        kind = "exact" if self.exact else "float"
        s = f"{kind} residual {float(self.residual):.3e} at {where}"
        if self.exact and self.repair:
            s += f" (PSD repair {self.repair:.3e})"
        return s


class _Keys:
    """Reduced class keys of ``Tr(u* m v)``, cached."""

    def __init__(self, rules):
        self.rules = rules
        self.cache: Dict[tuple, TraceMonomial] = {}

    def of_factors(self, fs) -> TraceMonomial:
        red = [reduce_cyclic(f, self.rules) for f in fs]
        return TraceMonomial(tuple(sorted((f for f in red if f), key=deglex_key)), ())

    def pair(self, u: TraceMonomial, m: TraceMonomial, v: TraceMonomial) -> TraceMonomial:
        k = (u, m, v)
        got = self.cache.get(k)
        if got is None:
            w = u.tail[::-1] + m.tail + v.tail
            fs = list(u.factors) + list(v.factors) + list(m.factors)
            if w:
                fs.append(w)
            got = self.of_factors(fs)
            self.cache[k] = got
        return got


def _accumulate(B, generator: TracePoly, G, keys: _Keys, acc: Dict[TraceMonomial, object]):
    gens = list(generator.terms.items())
    for p in range(len(B)):
        row = G[p]
        for q in range(len(B)):
            c = row[q]
            if not c:
                continue
            for mono, gc in gens:
                k = keys.pair(B[p], mono, B[q])
                acc[k] = acc.get(k, 0) + c * gc


def _exact(x, max_den: int) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(float(x)).limit_denominator(max_den)


def exact_psd_repair(G: List[List[Fraction]]) -> Tuple[List[List[Fraction]], Fraction]:
    """Pivoted exact LDL^T; a non-positive trailing Schur complement is dropped.

    Returns the repaired (exactly PSD) matrix and the largest dropped entry.
    Elimination runs on gmpy2 rationals; ``Fraction`` is orders of magnitude
    slower once denominators grow.
    """
    n = len(G)
    S = [[mpq(x.numerator, x.denominator) for x in map(Fraction, row)] for row in G]
    active = list(range(n))
    while active:
        piv = max(active, key=lambda i: S[i][i])
        dpiv = S[piv][piv]
        if dpiv <= 0:
            break
        active.remove(piv)
        col = {i: S[i][piv] for i in active}
        for i in active:
            ci = col[i]
            if not ci:
                continue
            f = ci / dpiv
            Si = S[i]
            for j in active:
                cj = col[j]
                if cj:
                    Si[j] -= f * cj
    out = [[Fraction(x) for x in row] for row in G]
    dropped = Fraction(0)
    for i in active:
        for j in active:
            v = S[i][j]
            if v:
                v = Fraction(int(v.numerator), int(v.denominator))
                dropped = max(dropped, abs(v))
                out[i][j] -= v
    return out, dropped


def rationalize(cert: Certificate, max_denominator: int = DEFAULT_DENOMINATOR) -> Tuple[Certificate, Fraction]:
    """Exact copy: entries rounded by continued fractions, PSD terms repaired."""
    terms = []
    worst = Fraction(0)
    for t in cert.terms:
        G = [[_exact(x, max_denominator) for x in row] for row in (t.gram if t.is_exact else t.gram.tolist())]
        for i in range(len(G)):
            for j in range(i):
                G[i][j] = G[j][i]
        if t.tag != EQUALITY_TERM:
            G, dropped = exact_psd_repair(G)
            worst = max(worst, dropped)
        gen = t.generator if t.generator.is_exact else t.generator.to_exact(max_denominator)
        terms.append(CertificateTerm(t.tag, gen, list(t.basis), G, t.label))
    obj = cert.objective if cert.objective.is_exact else cert.objective.to_exact(max_denominator)
    out = Certificate(cert.n, cert.N, cert.d, _exact(cert.m, max_denominator), cert.sense, list(cert.names),
                      dict(cert.rules), obj, terms)
    return out, worst


def verify_certificate(
    cert: Certificate,
    a: Optional[TracePoly] = None,
    spec: Optional[ProblemSpec] = None,
    exact: bool = False,
    max_denominator: int = DEFAULT_DENOMINATOR,
) -> VerificationReport:
    """Expand ``m + sum terms`` and compare with ``a_min`` coefficient-wise.

    ``a`` defaults to the certificate's own objective and ``spec`` only
    supplies the square rules (defaults to the recorded ones).  Float mode
    reports the largest absolute coefficient mismatch.  Exact mode first
    rationalizes the data (see :func:`rationalize`) and reports the exact
    mismatch as a ``Fraction``.
    """
    cert.validate()
    rules = spec.rules() if spec is not None else cert.rules
    target = cert.min_objective if a is None else (a if cert.sense == "min" else -a)
    repair = Fraction(0)
    if exact:
        cert, repair = rationalize(cert, max_denominator)
        if not target.is_exact:
            target = target.to_exact(max_denominator)
        m = cert.m
    else:
        m = float(cert.m)
        target = target.to_float()
    keys = _Keys(rules)
    acc: Dict[TraceMonomial, object] = {ONE: m}
    for t in cert.terms:
        G = t.gram if exact else t.gram_array()
        gen_terms = t.generator if exact else t.generator.to_float()
        _accumulate(t.basis, gen_terms, G, keys, acc)
    for mono, c in target.terms.items():
        k = keys.of_factors(mono.factors + ((mono.tail,) if mono.tail else ()))
        acc[k] = acc.get(k, 0) - c
    worst, res = None, (Fraction(0) if exact else 0.0)
    for k, v in acc.items():
        if abs(v) > res:
            res, worst = abs(v), k
    return VerificationReport(res, worst, exact, float(repair), len(acc))


# -- proof files ---------------------------------------------------------------------

_MAGIC = "tracepop-certificate 1"


def _num(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "0" if x == 0.0 else repr(x)


def _read_num(s: str):
    if "/" in s:
        return Fraction(s)
    if re.fullmatch(r"[-+]?\d+", s):
        return int(s)
    return float(s)


def dumps_certificate(cert: Certificate) -> str:
    names = cert.names
    lines = [
        _MAGIC,
        "vars " + " ".join(names),
        f"N {_num(cert.N)}",
        f"d {cert.d}",
        f"sense {cert.sense}",
        "rules " + " ".join(f"{names[j]}={k}" for j, k in sorted(cert.rules.items())),
        f"objective {format_poly(cert.objective, names)}",
        f"m {_num(cert.m)}",
        f"terms {len(cert.terms)}",
    ]
    for t in cert.terms:
        lines.append(f"term {t.tag}")
        if t.label:
            lines.append(f"# {t.label}")
        lines.append(f"generator {format_poly(t.generator, names)}")
        lines.append(f"basis {t.size}")
        lines.extend(format_monomial(u, names) for u in t.basis)
        lines.append("gram")
        rows = t.gram if t.is_exact else t.gram.tolist()
        lines.extend(" ".join(_num(x) for x in row) for row in rows)
        lines.append("end")
    return "\n".join(lines) + "\n"


def write_certificate(cert: Certificate, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_certificate(cert))


def _monomial(text: str, names) -> TraceMonomial:
    from .parse import parse_poly

    f = parse_poly(text, names, exact=False)
    if len(f) != 1 or list(f.terms.values())[0] != 1:
        raise CertificateError(f"basis entry {text!r} is not a monomial")
    return next(iter(f.terms))


def loads_certificate(text: str) -> Certificate:
    from .parse import ParseError, parse_poly

    lines = [ln.rstrip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip()]
    if not lines or lines[0].strip() != _MAGIC:
        raise CertificateError("not a tracepop certificate file")
    pos = 1

    def skip_comments():
        nonlocal pos
        while pos < len(lines) and lines[pos].lstrip().startswith("#"):
            pos += 1

    def field_(key):
        nonlocal pos
        skip_comments()
        if pos >= len(lines):
            raise CertificateError(f"missing '{key}' line")
        head, _, rest = lines[pos].partition(" ")
        if head != key:
            raise CertificateError(f"expected '{key}', found {lines[pos]!r}")
        pos += 1
        return rest.strip()

    try:
        names = field_("vars").split()
        N = _read_num(field_("N"))
        d = int(field_("d"))
        sense = field_("sense")
        rules = {}
        for item in field_("rules").split():
            v, _, kind = item.partition("=")
            rules[names.index(v)] = kind
        objective = parse_poly(field_("objective"), names, exact=False)
        m = _read_num(field_("m"))
        count = int(field_("terms"))
        terms = []
        for _ in range(count):
            tag = field_("term")
            label = ""
            if pos < len(lines) and lines[pos].startswith("# "):
                label = lines[pos][2:]
            gen = parse_poly(field_("generator"), names, exact=False)
            size = int(field_("basis"))
            basis = [_monomial(lines[pos + i].strip(), names) for i in range(size)]
            pos += size
            field_("gram")
            rows = [[_read_num(x) for x in lines[pos + i].split()] for i in range(size)]
            pos += size
            field_("end")
            if any(isinstance(x, Fraction) for r in rows for x in r):
                gram = [[Fraction(x) for x in r] for r in rows]
            else:
                gram = np.array(rows, dtype=float).reshape(size, size)
            terms.append(CertificateTerm(tag, gen, basis, gram, label))
    except (ValueError, IndexError, ParseError) as e:
        raise CertificateError(f"malformed certificate (line {pos + 1}): {e}") from None
    if sense not in ("min", "max"):
        raise CertificateError(f"bad sense {sense!r}")
    return Certificate(len(names), N, d, m, sense, names, rules, objective, terms).validate()


def read_certificate(path) -> Certificate:
    with open(path) as fh:
        return loads_certificate(fh.read())


# -- univariate split ----------------------------------------------------------------

def _poly_mul(p: Sequence[Fraction], q: Sequence[Fraction]) -> List[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _poly_eval(coeffs: Sequence, t):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


@dataclass
class UnivariateSplit:
    """``t = s1(t) - s2(t)`` with ``s2 = (eps/2)(t-1)^(2n)``, ``n = ceil(1/eps)``.

    Coefficient lists are exact and run from the constant term upwards.
    ``s1 = lead * (A^2 + B^2)`` is a two-square decomposition with float
    coefficients from pairing the complex roots of ``s1``.
    """

    eps: Fraction
    n: int
    s2: List[Fraction]
    s1: List[Fraction]
    lead: float
    A: np.ndarray
    B: np.ndarray

    def eval_s1(self, t):
        return _poly_eval([float(c) for c in self.s1], np.asarray(t, dtype=float))

    def eval_s2(self, t):
        return _poly_eval([float(c) for c in self.s2], np.asarray(t, dtype=float))

    def eval_squares(self, t):
        t = np.asarray(t, dtype=float)
        return self.lead * (_poly_eval(self.A, t) ** 2 + _poly_eval(self.B, t) ** 2)

    def identity_holds(self) -> bool:
        diff = [a - b for a, b in zip(self.s1, self.s2)]
        return diff[1] == 1 and all(c == 0 for i, c in enumerate(diff) if i != 1)

    def apply(self, which: str, a: TracePoly, rules=None) -> TracePoly:
        """``s1(a)`` or ``s2(a)`` for a trace polynomial, reduced by ``rules``."""
        coeffs = self.s2 if which == "s2" else self.s1
        return _poly_of(coeffs, a, rules)


def _as_fraction(eps) -> Fraction:
    if isinstance(eps, float):
        return Fraction(repr(eps))
    return Fraction(eps)


def univariate_split(eps) -> UnivariateSplit:
    e = _as_fraction(eps)
    if e <= 0:
        raise ValueError("eps must be positive")
    n = math.ceil(1 / e)
    base = [Fraction(-1), Fraction(1)]
    s2 = [e / 2]
    for _ in range(2 * n):
        s2 = _poly_mul(s2, base)
    s1 = list(s2)
    s1[1] += 1
    roots = np.roots([float(c) for c in reversed(s1)])
    upper = sorted((r for r in roots if r.imag > 0), key=lambda r: (r.real, r.imag))
    if len(upper) != n:
        raise ArithmeticError("s1 has real roots; pairing failed")
    q = np.array([1.0 + 0j])
    for r in upper:
        q = np.convolve(q, np.array([-r, 1.0]))  # low-to-high coefficients
    return UnivariateSplit(e, n, s2, s1, float(s1[-1]), q.real.copy(), q.imag.copy())


def _poly_of(coeffs: Sequence[Fraction], a: TracePoly, rules=None, max_degree: Optional[int] = None) -> TracePoly:
    """Horner evaluation of a univariate polynomial at a trace polynomial."""
    rules = rules or {}
    out = TracePoly()
    for c in reversed(coeffs):
        out = reduce_poly(out * a, rules) + TracePoly.constant(c)
        if max_degree is not None and tracial_degree(out) > max_degree:
            raise DegreeExplosionError(
                f"s2(a) exceeds degree {max_degree}; lower 1/eps or raise the relaxation order"
            )
    return out


class DegreeExplosionError(RelaxationError):
    pass


@dataclass
class PositivityVerdict:
    verdict: str  # "positive" or "inconclusive"
    bound: float  # lower bound on eps - Tr(s2(a/scale)) over the feasible set
    eps: Fraction
    n: int
    scale: object
    d: int
    status: str
    trace_s2: TracePoly

    @property
    def positive(self) -> bool:
        return self.verdict == "positive"

    def eigenvalue_floor(self, k: int) -> Optional[float]:
        """Lower bound on the eigenvalues of ``a(A)`` for ``k x k`` feasible ``A``.

        ``Tr(s2(a/scale)) <= eps`` with the normalized trace forces every
        eigenvalue ``lam`` of ``a/scale`` to satisfy ``(lam - 1)^(2n) <= 2k``.
        """
        if not self.positive:
            return None
        return float(self.scale) * (1.0 - (2.0 * k) ** (1.0 / (2 * self.n)))


def verify_operator_positivity(
    a: TracePoly,
    spec: ProblemSpec,
    d: int,
    eps=Fraction(1, 2),
    scale=1,
    options: Optional[RelaxationOptions] = None,
    settings: Optional[SolverSettings] = None,
    solver: str = "bundled",
    tol: float = 0.0,
) -> PositivityVerdict:
    """One-sided check of ``eps - Tr(s2(a/scale)) >= 0`` on the feasible set.

    The objective is built symbolically (reduced by the square rules) and its
    minimum is bounded from below by the order-``d`` relaxation.  ``positive``
    means that bound is ``>= -tol``.  This certifies the trace inequality, not
    ``a >= 0`` itself; see :meth:`PositivityVerdict.eigenvalue_floor`.
    """
    if not a.is_symmetric:
        raise RelaxationError("a must be symmetric")
    split = univariate_split(eps)
    rules = spec.rules()
    exact_scale = scale if isinstance(scale, (int, Fraction)) else None
    if exact_scale is not None and a.is_exact:
        scaled = a * (Fraction(1) / Fraction(exact_scale))
    else:
        scaled = a.to_float() * (1.0 / float(scale))
    s2 = _poly_of(split.s2, scaled, rules, max_degree=2 * d)
    tr_s2 = reduce_poly(universal_trace(s2), rules)
    objective = TracePoly.constant(split.eps if tr_s2.is_exact else float(split.eps)) - tr_s2
    check = ProblemSpec(spec.n, objective, list(spec.constraints), spec.bound, "min", list(spec.names),
                        f"operator positivity of {format_poly(a, spec.names)}")
    relax = build_relaxation(check, d, options)
    res = solve_relaxation(relax, settings, solver)
    bound = res.bound if res.optimal else -math.inf
    verdict = "positive" if res.optimal and bound >= -tol else "inconclusive"
    return PositivityVerdict(verdict, bound, split.eps, split.n, scale, d, res.status, tr_s2)

