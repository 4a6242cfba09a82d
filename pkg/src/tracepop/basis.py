"""Tracial word bases, square-reduction rules and Hankel trace classes."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .algebra import (
    ONE,
    TraceMonomial,
    TracePoly,
    Word,
    canonical_cyclic,
    deglex_key,
    format_monomial,
)

PROJECTION = "projection"  # x_j^2 -> x_j
INVOLUTION = "involution"  # x_j^2 -> 1
RULE_KINDS = (PROJECTION, INVOLUTION)

DEFAULT_BASIS_CAP = 20000


class BasisOverflowError(RuntimeError):
    pass


@dataclass(frozen=True)
class RewriteRule:
    kind: str
    var: int

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")


Rules = Mapping[int, str]


def rules_from(rules) -> Dict[int, str]:
    """Accept a mapping var -> kind or an iterable of :class:`RewriteRule`."""
    if rules is None:
        return {}
    if isinstance(rules, Mapping):
        out = dict(rules)
    else:
        out = {}
        for r in rules:
            if r.var in out:
                raise ValueError(f"two rules for variable {r.var}")
            out[r.var] = r.kind
    for k in out.values():
        if k not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {k!r}")
    return out


def reduce(w: Sequence[int], rules: Rules) -> Word:
    """Fixed point of x_j^2 -> x_j / x_j^2 -> 1 on a word."""
    if not rules:
        return tuple(w)
    stack: List[int] = []
    for a in w:
        if stack and stack[-1] == a:
            kind = rules.get(a)
            if kind == PROJECTION:
                continue
            if kind == INVOLUTION:
                stack.pop()
                continue
        stack.append(a)
    return tuple(stack)


def reduce_cyclic(w: Sequence[int], rules: Rules) -> Word:
    """Reduce a word inside a trace, including across the wrap-around."""
    w = reduce(w, rules)
    while len(w) >= 2 and w[0] == w[-1] and w[0] in rules:
        if rules[w[0]] == PROJECTION:
            w = w[:-1]
        else:
            w = w[1:-1]
        w = reduce(w, rules)
    return canonical_cyclic(w)


def reduce_monomial(m: TraceMonomial, rules: Rules) -> TraceMonomial:
    if not rules:
        return m
    fs = [reduce_cyclic(f, rules) for f in m.factors]
    return TraceMonomial(tuple(sorted((f for f in fs if f), key=deglex_key)), reduce(m.tail, rules))


def reduce_poly(f: TracePoly, rules: Rules) -> TracePoly:
    if not rules:
        return f
    return f.map_monomials(lambda m: reduce_monomial(m, rules))


# -- enumeration ----------------------------------------------------------------

def reduced_words(n: int, max_len: int, rules: Rules) -> List[Word]:
    """All rule-reduced words of length <= max_len in deg-lex order."""
    out: List[Word] = [()]
    frontier: List[Word] = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for a in range(n):
                if w and w[-1] == a and a in rules:
                    continue
                nxt.append(w + (a,))
        out.extend(nxt)
        frontier = nxt
    return out


def trace_factor_words(n: int, max_len: int, rules: Rules) -> List[Word]:
    """Canonical reduced trace arguments of length 1..max_len."""
    seen = set()
    for w in reduced_words(n, max_len, rules):
        c = reduce_cyclic(w, rules)
        if c:
            seen.add(c)
    return sorted(seen, key=deglex_key)


@dataclass
class MomentBasis:
    n: int
    d: int
    rules: Dict[int, str]
    entries: List[TraceMonomial]
    pure_only: bool = False
    index: Dict[TraceMonomial, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {m: i for i, m in enumerate(self.entries)}

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def up_to(self, d: int) -> "MomentBasis":
        """Sub-basis of entries with degree <= d (a prefix by construction)."""
        ents = [m for m in self.entries if m.degree <= d]
        return MomentBasis(self.n, d, self.rules, ents, self.pure_only)

    def listing(self, names: Sequence[str] | None = None) -> str:
        """One entry per line: ``index<TAB>degree<TAB>monomial``."""
        return "\n".join(
            f"{i}\t{m.degree}\t{format_monomial(m, names)}" for i, m in enumerate(self.entries)
        )


def enumerate_basis(
    n: int,
    d: int,
    rules=None,
    pure_only: bool = False,
    cap: int = DEFAULT_BASIS_CAP,
) -> MomentBasis:
    """Rule-reduced tracial words of tracial degree <= d, sorted deg-lex."""
    if d < 0:
        raise ValueError("degree must be non-negative")
    rules = rules_from(rules)
    factors = trace_factor_words(n, d, rules)
    tails = [()] if pure_only else reduced_words(n, d, rules)

    # pure parts: multisets of factors with total length <= budget
    by_budget: Dict[int, List[Tuple[Word, ...]]] = {}

    def pure_parts(budget: int):
        got = by_budget.get(budget)
        if got is not None:
            return got
        parts: List[Tuple[Word, ...]] = [()]

        def rec(start: int, remaining: int, acc: Tuple[Word, ...]):
            for i in range(start, len(factors)):
                f = factors[i]
                if len(f) > remaining:
                    break
                cur = acc + (f,)
                parts.append(cur)
                if len(parts) > cap:
                    raise BasisOverflowError(f"basis exceeds cap {cap}")
                rec(i, remaining - len(f), cur)

        rec(0, budget, ())
        by_budget[budget] = parts
        return parts

    entries = []
    for t in tails:
        for p in pure_parts(d - len(t)):
            entries.append(TraceMonomial(p, t))
        if len(entries) > cap:
            raise BasisOverflowError(f"basis of degree {d} in {n} variables exceeds cap {cap}")
    entries.sort(key=TraceMonomial.sort_key)
    return MomentBasis(n, d, rules, entries, pure_only)


def count_bound_check(n: int, d: int) -> Tuple[int, int]:
    """Crude bounds on the number of tracial words of degree <= d."""
    if n == 1:
        lower = d + 1
    else:
        lower = (n ** (d + 1) - 1) // (n - 1)
    upper = ((2 * n) ** (d + 1) - 1) // (2 * n - 1)
    return lower, upper


# -- Hankel structure -------------------------------------------------------------

def pair_trace(u: TraceMonomial, v: TraceMonomial, rules: Rules) -> TraceMonomial:
    """Reduced pure monomial of Tr(u* v)."""
    w = u.tail[::-1] + v.tail
    fs = list(u.factors) + list(v.factors)
    if w:
        fs.append(w)
    if rules:
        fs = [reduce_cyclic(f, rules) for f in fs]
    else:
        fs = [canonical_cyclic(f) for f in fs]
    return TraceMonomial(tuple(sorted((f for f in fs if f), key=deglex_key)), ())


@dataclass
class HankelStructure:
    basis: MomentBasis
    classes: np.ndarray  # (N, N) int, class id per entry
    class_reps: List[TraceMonomial]
    class_index: Dict[TraceMonomial, int]

    @property
    def n_classes(self) -> int:
        return len(self.class_reps)

    def equation_count(self) -> int:
        """Linear equations under the full-matrix convention: N^2 - #classes."""
        N = len(self.basis)
        return N * N - self.n_classes

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.classes.ravel(), minlength=self.n_classes)


def hankel_classes(basis: MomentBasis) -> HankelStructure:
    N = len(basis)
    rules = basis.rules
    classes = np.empty((N, N), dtype=np.int64)
    reps: List[TraceMonomial] = []
    index: Dict[TraceMonomial, int] = {}
    ents = basis.entries
    for i in range(N):
        u = ents[i]
        for j in range(i, N):
            key = pair_trace(u, ents[j], rules)
            cid = index.get(key)
            if cid is None:
                cid = len(reps)
                index[key] = cid
                reps.append(key)
            classes[i, j] = cid
            classes[j, i] = cid
    assert not reps or reps[0] == ONE
    return HankelStructure(basis, classes, reps, index)
