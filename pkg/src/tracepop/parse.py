"""Trace polynomial expressions and YAML problem files.

Expression grammar::

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;        (* "/" needs a constant divisor *)
    unary  = ("+" | "-") unary | power ;
    power  = atom [ "^" integer ] ;
    atom   = number | variable | ("tr" | "Tr") "(" expr ")" | "(" expr ")" ;
    number = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;

``tr`` is linear and applies the universal trace to its argument, so
``tr(x1 + x2)`` expands to ``tr(x1) + tr(x2)``.  Decimal literals become exact
rationals unless ``exact=False``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .algebra import ONE, TracePoly, universal_trace

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9']*)|(?P<op>[-+*/^()]))"
)


class ParseError(ValueError):
    pass


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(s: str) -> List[_Tok]:
    out = []
    pos = 0
    s = s.rstrip()
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {s[pos:pos + 1]!r} at {pos}")
        kind = m.lastgroup
        out.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(_Tok("end", "", len(s)))
    return out


class _Parser:
    def __init__(self, text: str, names: Sequence[str], exact: bool):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.index = {n: k for k, n in enumerate(names)}
        self.exact = exact

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, text: Optional[str] = None) -> _Tok:
        t = self.toks[self.i]
        if text is not None and t.text != text:
            raise ParseError(f"expected {text!r} at {t.pos}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def parse(self) -> TracePoly:
        f = self.expr()
        if self.peek().kind != "end":
            t = self.peek()
            raise ParseError(f"unexpected {t.text!r} at {t.pos}")
        return f

    def expr(self) -> TracePoly:
        f = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            g = self.term()
            f = f + g if op == "+" else f - g
        return f

    def term(self) -> TracePoly:
        f = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            g = self.unary()
            if op == "*":
                f = f * g
            else:
                if not g or set(g.terms) != {ONE}:
                    raise ParseError("division only by a nonzero constant")
                f = f / g.constant_term()
        return f

    def unary(self) -> TracePoly:
        t = self.peek().text
        if t == "-":
            self.take()
            return -self.unary()
        if t == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> TracePoly:
        f = self.atom()
        if self.peek().text == "^":
            self.take()
            t = self.take()
            if t.kind != "num" or not t.text.isdigit():
                raise ParseError(f"exponent must be a non-negative integer at {t.pos}")
            f = f ** int(t.text)
        return f

    def number(self, text: str):
        if re.fullmatch(r"\d+", text):
            return int(text)
        return Fraction(text) if self.exact else float(text)

    def atom(self) -> TracePoly:
        t = self.take()
        if t.kind == "num":
            return TracePoly.constant(self.number(t.text))
        if t.kind == "name":
            if t.text in ("tr", "Tr"):
                self.take("(")
                inner = self.expr()
                self.take(")")
                return universal_trace(inner)
            k = self.index.get(t.text)
            if k is None:
                raise ParseError(f"undeclared variable {t.text!r} at {t.pos}")
            return TracePoly.var(k)
        if t.text == "(":
            f = self.expr()
            self.take(")")
            return f
        raise ParseError(f"unexpected {t.text or 'end of input'!r} at {t.pos}")


def parse_poly(text: str, names: Sequence[str], exact: bool = True) -> TracePoly:
    """Parse an expression over the declared variable names."""
    if any(n in ("tr", "Tr") for n in names):
        raise ParseError("'tr' is reserved")
    return _Parser(str(text), names, exact).parse()


# -- problem files -------------------------------------------------------------

def load_problem(path):
    """Read a YAML problem file; returns ``(spec, order, options dict)``."""
    import yaml

    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return problem_from_dict(doc)


def problem_from_dict(doc: Dict) -> Tuple["ProblemSpec", Optional[int], Dict]:
    from .relaxation import CONSTRAINT_KINDS, Constraint, ProblemSpec, RelaxationError

    if not isinstance(doc, dict):
        raise ParseError("problem file must be a mapping")
    unknown = set(doc) - {"title", "vars", "objective", "sense", "constraints", "bound", "order", "options"}
    if unknown:
        raise ParseError(f"unknown keys: {', '.join(sorted(unknown))}")
    names = doc.get("vars")
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    if not names or not all(isinstance(n, str) for n in names):
        raise ParseError("'vars' must list variable names")
    if len(set(names)) != len(names):
        raise ParseError("duplicate variable names")
    if "objective" not in doc:
        raise ParseError("missing 'objective'")
    obj = parse_poly(doc["objective"], names)
    cons = []
    for item in doc.get("constraints") or []:
        if not isinstance(item, dict) or "kind" not in item:
            raise ParseError("each constraint needs a 'kind'")
        kind = item["kind"]
        if kind not in CONSTRAINT_KINDS:
            raise ParseError(f"unknown constraint kind {kind!r}")
        if kind in ("projection", "involution"):
            vs = item.get("var", item.get("vars"))
            vs = vs if isinstance(vs, list) else str(vs).replace(",", " ").split()
            for v in vs:
                if v not in names:
                    raise ParseError(f"undeclared variable {v!r}")
                cons.append(Constraint(kind, var=names.index(v)))
        else:
            if "expr" not in item:
                raise ParseError(f"{kind} constraint needs 'expr'")
            cons.append(Constraint(kind, poly=parse_poly(item["expr"], names)))
    bound = doc.get("bound", 1)
    if isinstance(bound, str):
        bound = Fraction(bound)
    sense = doc.get("sense", "min")
    try:
        spec = ProblemSpec(len(names), obj, cons, bound, sense, list(names), doc.get("title", "")).validate()
    except RelaxationError as e:
        raise ParseError(str(e)) from None
    order = doc.get("order")
    options = doc.get("options") or {}
    return spec, (int(order) if order is not None else None), options
