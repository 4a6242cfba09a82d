"""Words, star-cyclic classes and (pure) trace polynomials.

Variables are 0-based internally (``x1`` is letter ``0``).  A word is a plain
tuple of letters; the empty tuple is the word ``1``.  A trace monomial is a
sorted multiset of canonical trace factors times a noncommutative tail.
"""
from __future__ import annotations

import numbers
from fractions import Fraction
from typing import Dict, Iterable, Mapping, NamedTuple, Sequence, Tuple

import numpy as np

Word = Tuple[int, ...]


def deglex_key(w: Word):
    return (len(w), w)


def canonical_cyclic(w: Sequence[int]) -> Word:
    """Degree-lex minimum over all rotations of ``w`` and of its reversal."""
    w = tuple(w)
    if len(w) <= 1:
        return w
    r = w[::-1]
    best = w
    for i in range(len(w)):
        a = w[i:] + w[:i]
        if a < best:
            best = a
        b = r[i:] + r[:i]
        if b < best:
            best = b
    return best


class TraceMonomial(NamedTuple):
    """``prod_i Tr(factors[i]) * tail``; build through :func:`monomial`."""

    factors: Tuple[Word, ...]
    tail: Word

    @property
    def degree(self) -> int:
        return sum(len(f) for f in self.factors) + len(self.tail)

    @property
    def is_pure(self) -> bool:
        return not self.tail

    def sort_key(self):
        return (
            self.degree,
            tuple(deglex_key(f) for f in self.factors),
            deglex_key(self.tail),
        )

    def star(self) -> "TraceMonomial":
        return TraceMonomial(self.factors, self.tail[::-1])

    def trace(self) -> "TraceMonomial":
        return monomial(self.factors + (self.tail,), ())


ONE = TraceMonomial((), ())


def _sorted_factors(factors: Iterable[Word]) -> Tuple[Word, ...]:
    return tuple(sorted(factors, key=deglex_key))


def monomial(factors: Iterable[Sequence[int]] = (), tail: Sequence[int] = ()) -> TraceMonomial:
    """Canonical monomial: factors canonicalized, empty traces dropped, sorted."""
    fs = [canonical_cyclic(f) for f in factors]
    return TraceMonomial(_sorted_factors(f for f in fs if f), tuple(tail))


def mul_monomials(a: TraceMonomial, b: TraceMonomial) -> TraceMonomial:
    if a.factors and b.factors:
        factors = _sorted_factors(a.factors + b.factors)
    else:
        factors = a.factors or b.factors
    return TraceMonomial(factors, a.tail + b.tail)


def _is_exact(c) -> bool:
    return isinstance(c, (int, Fraction)) and not isinstance(c, bool)


def _normalize_coeff(c):
    if isinstance(c, bool):
        return int(c)
    if isinstance(c, (int, Fraction, float)):
        return c
    if isinstance(c, np.integer):
        return int(c)
    if isinstance(c, np.floating):
        return float(c)
    if isinstance(c, numbers.Rational):
        return Fraction(c.numerator, c.denominator)
    if isinstance(c, numbers.Real):
        return float(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


class MixedCoefficientError(TypeError):
    pass


class TracePoly:
    """Sparse linear combination of trace monomials.

    Coefficients are ``int``/``Fraction`` (exact) or ``float``.  Combining a
    polynomial holding non-integer rationals with one holding floats raises
    :class:`MixedCoefficientError`; use :meth:`to_float` / :meth:`to_exact`.
    """

    __slots__ = ("terms", "_has_float", "_has_frac")

    def __init__(self, terms: Mapping[TraceMonomial, object] | None = None):
        clean: Dict[TraceMonomial, object] = {}
        if terms:
            for m, c in terms.items():
                c = _normalize_coeff(c)
                if c != 0:
                    clean[m] = c
        self.terms = clean
        self._has_float = any(isinstance(c, float) for c in clean.values())
        self._has_frac = any(
            isinstance(c, Fraction) and c.denominator != 1 for c in clean.values()
        )

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, c) -> "TracePoly":
        return cls({ONE: c})

    @classmethod
    def var(cls, j: int) -> "TracePoly":
        return cls({TraceMonomial((), (j,)): 1})

    @classmethod
    def word(cls, w: Sequence[int]) -> "TracePoly":
        return cls({TraceMonomial((), tuple(w)): 1})

    @classmethod
    def tr(cls, w: Sequence[int]) -> "TracePoly":
        return cls({monomial([w]): 1})

    @classmethod
    def from_monomial(cls, m: TraceMonomial, c=1) -> "TracePoly":
        return cls({m: c})

    # -- coefficient domain -------------------------------------------------
    def _check_mix(self, other: "TracePoly"):
        if (self._has_float and other._has_frac) or (self._has_frac and other._has_float):
            raise MixedCoefficientError(
                "mixing exact rational and float coefficients; convert explicitly"
            )

    @property
    def is_exact(self) -> bool:
        return not self._has_float

    def to_float(self) -> "TracePoly":
        return TracePoly({m: float(c) for m, c in self.terms.items()})

    def to_exact(self, max_denominator: int | None = None) -> "TracePoly":
        out = {}
        for m, c in self.terms.items():
            q = Fraction(c)
            if max_denominator is not None:
                q = q.limit_denominator(max_denominator)
            out[m] = q
        return TracePoly(out)

    # -- ring operations --------------------------------------------------
    def _coerce(self, other) -> "TracePoly":
        if isinstance(other, TracePoly):
            return other
        return TracePoly.constant(_normalize_coeff(other))

    def __add__(self, other):
        other = self._coerce(other)
        self._check_mix(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return TracePoly(out)

    __radd__ = __add__

    def __neg__(self):
        return TracePoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, TracePoly):
            return scale(other, self)
        self._check_mix(other)
        out: Dict[TraceMonomial, object] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = mul_monomials(ma, mb)
                out[m] = out.get(m, 0) + ca * cb
        return TracePoly(out)

    def __rmul__(self, other):
        return scale(other, self)

    def __truediv__(self, other):
        if isinstance(other, TracePoly):
            raise TypeError("division by a polynomial")
        other = _normalize_coeff(other)
        if _is_exact(other):
            return scale(Fraction(1) / other, self)
        return scale(1.0 / other, self)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        out = TracePoly.constant(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, TracePoly):
            return self.terms == other.terms
        if isinstance(other, numbers.Number):
            return self.terms == TracePoly.constant(other).terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.sorted_terms())

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda mc: mc[0].sort_key())

    # -- structure ----------------------------------------------------------
    @property
    def is_pure(self) -> bool:
        return all(m.is_pure for m in self.terms)

    @property
    def is_symmetric(self) -> bool:
        return involution(self) == self

    @property
    def degree(self) -> int:
        return tracial_degree(self)

    def constant_term(self):
        return self.terms.get(ONE, 0)

    def max_abs_coeff(self):
        return max((abs(c) for c in self.terms.values()), default=0)

    def n_vars(self) -> int:
        top = -1
        for m in self.terms:
            for f in m.factors:
                top = max(top, max(f))
            if m.tail:
                top = max(top, max(m.tail))
        return top + 1

    def map_monomials(self, fn) -> "TracePoly":
        out: Dict[TraceMonomial, object] = {}
        for m, c in self.terms.items():
            m2 = fn(m)
            out[m2] = out.get(m2, 0) + c
        return TracePoly(out)

    def star(self) -> "TracePoly":
        return involution(self)

    def trace(self) -> "TracePoly":
        return universal_trace(self)

    def evaluate(self, mats):
        return evaluate(self, mats)

    def to_str(self, names: Sequence[str] | None = None) -> str:
        return format_poly(self, names)

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"TracePoly({self.to_str()!r})"


def add(f: TracePoly, g: TracePoly) -> TracePoly:
    return f + g


def mul(f: TracePoly, g: TracePoly) -> TracePoly:
    return f * g


def scale(c, f: TracePoly) -> TracePoly:
    c = _normalize_coeff(c)
    if isinstance(c, float) and f._has_frac:
        raise MixedCoefficientError("float scalar times exact rational polynomial")
    if isinstance(c, Fraction) and c.denominator != 1 and f._has_float:
        raise MixedCoefficientError("rational scalar times float polynomial")
    return TracePoly({m: c * v for m, v in f.terms.items()})


def involution(f: TracePoly) -> TracePoly:
    """Fix trace factors, reverse every tail."""
    return f.map_monomials(TraceMonomial.star)


def universal_trace(f: TracePoly) -> TracePoly:
    """Linear map sending each tail ``v`` to the factor ``Tr(v)``."""
    return f.map_monomials(TraceMonomial.trace)


def tracial_degree(f: TracePoly) -> int:
    return max((m.degree for m in f.terms), default=0)


# -- evaluation ---------------------------------------------------------------

def _check_tuple(mats, n_needed: int):
    mats = [np.asarray(A) for A in mats]
    if len(mats) < n_needed:
        raise ValueError(f"need {n_needed} matrices, got {len(mats)}")
    if not mats:
        return mats, 1
    k = mats[0].shape[0]
    for A in mats:
        if A.ndim != 2 or A.shape != (k, k):
            raise ValueError("matrices must be square and of equal size")
        if A.dtype == object:
            sym = bool(np.all(A == A.T))
        else:
            sym = np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(A).max(initial=0))))
        if not sym:
            raise ValueError("matrices must be symmetric")
    return mats, k


class _WordCache:
    """Matrix products of words with prefix reuse; normalized traces."""

    def __init__(self, mats, k):
        self.mats = mats
        self.k = k
        dtype = mats[0].dtype if mats else float
        self.eye = np.eye(k, dtype=dtype) if dtype != object else _object_eye(k)
        self.prods: Dict[Word, np.ndarray] = {(): self.eye}
        self.traces: Dict[Word, object] = {}

    def prod(self, w: Word):
        got = self.prods.get(w)
        if got is None:
            got = self.prod(w[:-1]) @ self.mats[w[-1]]
            self.prods[w] = got
        return got

    def tr(self, w: Word):
        got = self.traces.get(w)
        if got is None:
            P = self.prod(w)
            got = np.trace(P) / self.k if P.dtype != object else _object_trace(P) / self.k
            self.traces[w] = got
        return got


def _object_eye(k):
    E = np.zeros((k, k), dtype=object)
    for i in range(k):
        E[i, i] = 1
    return E


def _object_trace(P):
    s = 0
    for i in range(P.shape[0]):
        s = s + P[i, i]
    return s


def evaluate(f: TracePoly, mats):
    """Substitute matrices for the letters, normalized trace for ``Tr``.

    Returns a scalar when ``f`` is pure and a ``k x k`` matrix otherwise.
    Object arrays (``Fraction`` or sympy entries) are evaluated exactly.
    """
    mats, k = _check_tuple(mats, f.n_vars())
    cache = _WordCache(mats, k)
    pure = f.is_pure
    total = 0 if pure else None
    for m, c in f.terms.items():
        s = c
        for u in m.factors:
            s = s * cache.tr(u)
        if pure:
            total = total + s
        else:
            term = cache.prod(m.tail) * s
            total = term if total is None else total + term
    if total is None:
        total = cache.eye * 0
    return total


def evaluate_monomial_trace(m: TraceMonomial, cache: _WordCache):
    s = 1
    for u in m.factors:
        s = s * cache.tr(u)
    if m.tail:
        s = s * cache.tr(m.tail)
    return s


# -- printing -------------------------------------------------------------------

def default_names(n: int):
    return [f"x{i + 1}" for i in range(n)]


def format_word(w: Word, names: Sequence[str]) -> str:
    parts = []
    i = 0
    while i < len(w):
        j = i
        while j < len(w) and w[j] == w[i]:
            j += 1
        run = j - i
        parts.append(names[w[i]] if run == 1 else f"{names[w[i]]}^{run}")
        i = j
    return "*".join(parts)


def format_monomial(m: TraceMonomial, names: Sequence[str] | None = None) -> str:
    if names is None:
        names = default_names(max(_max_letter(m) + 1, 1))
    parts = []
    i = 0
    fs = m.factors
    while i < len(fs):
        j = i
        while j < len(fs) and fs[j] == fs[i]:
            j += 1
        s = f"tr({format_word(fs[i], names)})"
        parts.append(s if j - i == 1 else f"{s}^{j - i}")
        i = j
    if m.tail:
        parts.append(format_word(m.tail, names))
    return "*".join(parts) if parts else "1"


def _max_letter(m: TraceMonomial) -> int:
    top = max((max(f) for f in m.factors), default=-1)
    if m.tail:
        top = max(top, max(m.tail))
    return top


def _format_coeff(c) -> str:
    if isinstance(c, float):
        return repr(c)
    if isinstance(c, Fraction) and c.denominator != 1:
        return f"{c.numerator}/{c.denominator}"
    return str(int(c))


def format_poly(f: TracePoly, names: Sequence[str] | None = None) -> str:
    if not f.terms:
        return "0"
    if names is None:
        names = default_names(max(f.n_vars(), 1))
    out = []
    for idx, (m, c) in enumerate(f.sorted_terms()):
        neg = c < 0
        a = -c if neg else c
        mono = format_monomial(m, names)
        if mono == "1":
            body = _format_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_format_coeff(a)}*{mono}"
        if idx == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)
