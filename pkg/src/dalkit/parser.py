"""Concrete text grammar for terms, formulas, programs and sequents.

The parser is a small packrat (memoizing, backtracking) recursive descent
parser.  Backtracking is needed in a few places where a prefix is shared
between categories: ``(`` may open a term, a formula or a program, and ``[``
may open a box or a vector comparison.  Errors report the farthest position
reached together with the set of tokens that would have been accepted there.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .syntax import (
    FALSE,
    MINUS_ONE,
    ONE,
    TRUE,
    ZERO,
    And,
    Assign,
    Box,
    Choice,
    Const,
    Dap,
    Differential,
    Forall,
    Formula,
    Leq,
    Not,
    Plus,
    Program,
    Refines,
    Seq,
    Sequent,
    Star,
    Term,
    Test,
    Times,
    Var,
    conj,
    eq,
    exists,
    geq,
    gt,
    iff,
    implies,
    lt,
    mutual,
    neq,
    or_,
    power,
    sub,
)


class DalSyntaxError(SyntaxError):
    def __init__(self, message: str, line: int, col: int, expected: frozenset[str] = frozenset()):
        self.line = line
        self.col = col
        self.expected = expected
        detail = f"{message} at line {line}, column {col}"
        if expected:
            detail += "; expected one of: " + ", ".join(sorted(expected))
        super().__init__(detail)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    text: str
    pos: int


KEYWORDS = {"forall", "exists", "true", "false"}

_UNICODE = {
    "′": "'",
    "≤": "<=",
    "≥": ">=",
    "≠": "!=",
    "¬": "!",
    "∧": "&",
    "∨": "|",
    "→": "->",
    "↔": "<->",
    "⊢": "|-",
    "·": "*",
    "∀": "forall ",
    "∃": "exists ",
}

# order matters: longer operators first
_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+|//[^\n]*"),
    ("NUM", r"\d+\.\d+|\d+/\d+|\d+"),
    ("IDENT", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("REFLE", r"<=\["),
    ("REFEQ", r"==\["),
    ("IFF", r"<->"),
    ("TURNSTILE", r"\|-"),
    ("ASSIGN", r":="),
    ("CHOICE", r"\+\+"),
    ("IMPLIES", r"->"),
    ("LE", r"<="),
    ("GE", r">="),
    ("NE", r"!="),
    ("OP", r"[-+*/^<>=!&|;?:,.'(){}\[\]]"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{k}>{p})" for k, p in _TOKEN_SPEC))


def _normalize_unicode(text: str) -> str:
    for u, a in _UNICODE.items():
        text = text.replace(u, a)
    return text


def tokenize(text: str) -> list[Token]:
    text = _normalize_unicode(text)
    out: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = _line_col(text, pos)
            raise DalSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind != "WS":
            tok_text = m.group()
            if kind == "OP" or kind in ("LE", "GE", "NE", "IMPLIES", "IFF", "CHOICE", "ASSIGN", "TURNSTILE"):
                kind = tok_text
            elif kind == "IDENT" and tok_text in KEYWORDS:
                kind = tok_text
            out.append(Token(kind, tok_text, pos))
        pos = m.end()
    out.append(Token("EOF", "", len(text)))
    return out


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Fail(Exception):
    pass


_FAIL = _Fail()


@dataclass
class SystemDecl:
    """A ``system name { states ...; params ...; eq ...; }`` block."""

    name: str
    states: tuple[Var, ...]
    params: tuple[Var, ...]
    equations: list[Term] = field(default_factory=list)


class Parser:
    def __init__(self, text: str):
        self.text = _normalize_unicode(text)
        self.toks = tokenize(self.text)
        self.i = 0
        self.memo: dict[tuple[str, int], tuple[object, int] | None] = {}
        self.far = 0
        self.far_expected: set[str] = set()

    # -------------------------------------------------------------- helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, *expected: str):
        if self.i > self.far:
            self.far = self.i
            self.far_expected = set(expected)
        elif self.i == self.far:
            self.far_expected.update(expected)
        raise _FAIL

    def expect(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            self.fail(repr(kind) if kind not in ("IDENT", "NUM", "EOF") else kind)
        self.i += 1
        return t

    def accept(self, kind: str) -> Token | None:
        t = self.peek()
        if t.kind == kind:
            self.i += 1
            return t
        # record the alternative for diagnostics
        if self.i > self.far:
            self.far = self.i
            self.far_expected = {repr(kind) if kind not in ("IDENT", "NUM", "EOF") else kind}
        elif self.i == self.far:
            self.far_expected.add(repr(kind) if kind not in ("IDENT", "NUM", "EOF") else kind)
        return None

    def attempt(self, fn: Callable[[], object]):
        save = self.i
        try:
            return fn()
        except _Fail:
            self.i = save
            return None

    def memo_rule(self, name: str, fn: Callable[[], object]):
        key = (name, self.i)
        if key in self.memo:
            hit = self.memo[key]
            if hit is None:
                raise _FAIL
            self.i = hit[1]
            return hit[0]
        start = self.i
        try:
            res = fn()
        except _Fail:
            self.memo[key] = None
            self.i = start
            raise
        self.memo[key] = (res, self.i)
        return res

    def error(self) -> DalSyntaxError:
        tok = self.toks[min(self.far, len(self.toks) - 1)]
        line, col = _line_col(self.text, tok.pos)
        what = "end of input" if tok.kind == "EOF" else repr(tok.text)
        return DalSyntaxError(f"unexpected {what}", line, col, frozenset(self.far_expected))

    def run(self, fn: Callable[[], object]):
        try:
            res = fn()
            self.expect("EOF")
            return res
        except _Fail:
            raise self.error() from None

    # -------------------------------------------------------------- terms
    def variable(self) -> Var:
        t = self.expect("IDENT")
        if self.peek().kind == "'":
            self.i += 1
            if self.peek().kind == "'":
                self.fail("no second prime")
            return Var(t.text, True)
        return Var(t.text)

    def unprimed_variable(self) -> Var:
        t = self.expect("IDENT")
        if self.peek().kind == "'":
            self.fail("unprimed variable")
        return Var(t.text)

    def number(self) -> Fraction:
        t = self.expect("NUM")
        return Fraction(t.text)

    def term(self) -> Term:
        return self.memo_rule("term", self._sum)

    def _sum(self) -> Term:
        left = self._product()
        while True:
            if self.accept("+"):
                left = Plus(left, self._product())
            elif self.accept("-"):
                left = sub(left, self._product())
            else:
                return left

    def _product(self) -> Term:
        left = self._unary()
        while True:
            k = self.peek().kind
            if k == "*":
                save = self.i
                self.i += 1
                right = self.attempt(self._unary)
                if right is None:
                    # a trailing '*' is a program star, not a product
                    self.i = save
                    return left
                left = Times(left, right)
            elif k == "/":
                self.i += 1
                neg = bool(self.accept("-"))
                c = self.number()
                if c == 0:
                    self.fail("nonzero divisor")
                left = Times(left, Const(1 / (-c if neg else c)))
            else:
                return left

    def _unary(self) -> Term:
        if self.peek().kind == "-":
            # "-3/4" is a literal unless it is the base of a power
            if self.peek(1).kind == "NUM" and self.peek(2).kind != "^":
                self.i += 1
                return Const(-self.number())
            self.i += 1
            return Times(MINUS_ONE, self._unary())
        return self._power()

    def _power(self) -> Term:
        base = self._postfix()
        if self.accept("^"):
            t = self.expect("NUM")
            if not t.text.isdigit():
                self.fail("natural-number exponent")
            return power(base, int(t.text))
        return base

    def _postfix(self) -> Term:
        t = self.peek()
        if t.kind == "NUM":
            return Const(self.number())
        if t.kind == "IDENT":
            return self.variable()
        if t.kind == "(":
            self.i += 1
            inner = self.term()
            self.expect(")")
            if self.accept("'"):
                if self.peek().kind == "'":
                    self.fail("no second prime")
                return Differential(inner)
            return inner
        self.fail("NUM", "IDENT", "'('", "'-'")
        raise AssertionError

    def term_vector(self) -> tuple[Term, ...]:
        self.expect("[")
        items = [self.term()]
        while self.accept(","):
            items.append(self.term())
        self.expect("]")
        return tuple(items)

    def term_matrix(self) -> tuple[tuple[Term, ...], ...]:
        self.expect("[")
        rows = [self.term_vector()]
        while self.accept(","):
            rows.append(self.term_vector())
        self.expect("]")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            self.fail("rectangular matrix")
        return tuple(rows)

    def var_list(self) -> tuple[Var, ...]:
        items = [self.unprimed_variable()]
        while self.accept(","):
            items.append(self.unprimed_variable())
        if len(set(items)) != len(items):
            self.fail("duplicate-free variable list")
        return tuple(items)

    def var_tuple(self) -> tuple[Var, ...]:
        """``[x, y]`` (possibly empty) as used in payloads."""
        self.expect("[")
        if self.accept("]"):
            return ()
        xs = self.var_list()
        self.expect("]")
        return xs

    # -------------------------------------------------------------- formulas
    def formula(self) -> Formula:
        return self.memo_rule("formula", self._iff)

    def _iff(self) -> Formula:
        left = self._implies()
        if self.accept("<->"):
            return iff(left, self._iff())
        return left

    def _implies(self) -> Formula:
        left = self._or()
        if self.accept("->"):
            return implies(left, self._implies())
        return left

    def _or(self) -> Formula:
        left = self._and()
        if self.accept("|"):
            return or_(left, self._or())
        return left

    def _and(self) -> Formula:
        left = self._unary_formula()
        if self.accept("&"):
            return And(left, self._and())
        return left

    def unary_formula(self) -> Formula:
        return self.memo_rule("unary_formula", self._unary_formula_raw)

    def _unary_formula(self) -> Formula:
        return self.unary_formula()

    def _unary_formula_raw(self) -> Formula:
        k = self.peek().kind
        if k == "!":
            self.i += 1
            return Not(self.unary_formula())
        if k in ("forall", "exists"):
            self.i += 1
            x = self.variable()
            self.expect(".")
            body = self.formula()
            return Forall(x, body) if k == "forall" else exists(x, body)
        if k == "[":
            vec = self.attempt(self._vector_comparison)
            if vec is not None:
                return vec
            self.i += 1
            prog = self.program()
            self.expect("]")
            return Box(prog, self.unary_formula())
        return self._atom_formula()

    def _atom_formula(self) -> Formula:
        k = self.peek().kind
        if k == "true":
            self.i += 1
            return TRUE
        if k == "false":
            self.i += 1
            return FALSE
        res = self.attempt(self._comparison)
        if res is not None:
            return res
        res = self.attempt(self._refinement)
        if res is not None:
            return res
        if self.accept("("):
            inner = self.formula()
            self.expect(")")
            return inner
        self.fail("formula")
        raise AssertionError

    _CMP = ("<=", "<", ">=", ">", "=", "!=")

    def _cmp_op(self) -> str:
        k = self.peek().kind
        if k in self._CMP:
            self.i += 1
            return k
        self.fail(*(repr(c) for c in self._CMP))
        raise AssertionError

    @staticmethod
    def _build_cmp(op: str, a: Term, b: Term) -> Formula:
        match op:
            case "<=":
                return Leq(a, b)
            case "<":
                return lt(a, b)
            case ">=":
                return geq(a, b)
            case ">":
                return gt(a, b)
            case "=":
                return eq(a, b)
            case "!=":
                return neq(a, b)
        raise ValueError(op)

    def _comparison(self) -> Formula:
        a = self.term()
        op = self._cmp_op()
        b = self.term()
        return self._build_cmp(op, a, b)

    def _vector_comparison(self) -> Formula:
        left = self.term_vector()
        op = self._cmp_op()
        if op == "!=":
            self.fail("vector comparison operator")
        if self.peek().kind == "[":
            right = self.term_vector()
            if len(right) != len(left):
                self.fail("vector of matching length")
        else:
            t = self.term()
            if t != ZERO:
                self.fail("0 or a vector")
            right = tuple(ZERO for _ in left)
        return conj([self._build_cmp(op, a, b) for a, b in zip(left, right)])

    def _refinement(self) -> Formula:
        a = self.program()
        k = self.peek().kind
        if k not in ("REFLE", "REFEQ"):
            self.fail("'<=['", "'==['")
        self.i += 1
        xs = () if self.peek().kind == "]" else self.var_list()
        self.expect("]")
        b = self.program()
        return Refines(a, b, xs) if k == "REFLE" else mutual(a, b, xs)

    # -------------------------------------------------------------- programs
    def program(self) -> Program:
        return self.memo_rule("program", self._choice)

    def _choice(self) -> Program:
        left = self._seq()
        if self.accept("++"):
            return Choice(left, self._choice())
        return left

    def _seq(self) -> Program:
        left = self._star()
        if self.accept(";"):
            return Seq(left, self._seq())
        return left

    def _star(self) -> Program:
        p = self._prog_atom()
        while self.peek().kind == "*":
            self.i += 1
            p = Star(p)
        return p

    def _prog_atom(self) -> Program:
        t = self.peek()
        if t.kind == "?":
            self.i += 1
            return Test(self.unary_formula())
        if t.kind == "{":
            self.i += 1
            xs = self.var_list()
            self.expect(":")
            f = self.formula()
            self.expect("}")
            return Dap(xs, f)
        if t.kind == "(":
            self.i += 1
            p = self.program()
            self.expect(")")
            return p
        if t.kind == "IDENT" and self.peek(1).kind == ":=":
            x = Var(t.text)
            self.i += 2
            return Assign(x, self.term())
        self.fail("'?'", "'{'", "'('", "assignment")
        raise AssertionError

    # -------------------------------------------------------------- sequents
    def formula_list(self, stop: str) -> tuple[Formula, ...]:
        if self.peek().kind in (stop, "EOF"):
            return ()
        items = [self.formula()]
        while self.accept(","):
            items.append(self.formula())
        return tuple(items)

    def sequent(self) -> Sequent:
        ante = self.formula_list("|-")
        self.expect("|-")
        succ = self.formula_list("EOF")
        return Sequent(ante, succ)

    # -------------------------------------------------------------- files
    def system(self) -> SystemDecl:
        kw = self.expect("IDENT")
        if kw.text != "system":
            self.fail("'system'")
        name = self.expect("IDENT").text
        self.expect("{")
        states: tuple[Var, ...] = ()
        params: tuple[Var, ...] = ()
        eqs: list[Term] = []
        while not self.accept("}"):
            head = self.expect("IDENT")
            if head.text == "states":
                states = self.var_list()
            elif head.text == "params":
                params = self.var_list()
            elif head.text == "eq":
                a = self.term()
                if self.accept("="):
                    b = self.term()
                    eqs.append(a if b == ZERO else sub(a, b))
                else:
                    eqs.append(a)
            else:
                self.i -= 1
                self.fail("'states'", "'params'", "'eq'", "'}'")
            self.expect(";")
        return SystemDecl(name, states, params, eqs)

    def systems(self) -> list[SystemDecl]:
        out = [self.system()]
        while self.peek().kind != "EOF":
            out.append(self.system())
        return out


def parse(text: str, category: str = "formula"):
    """Parse ``text`` as a term, formula, program or sequent."""
    p = Parser(text)
    match category:
        case "term":
            return p.run(p.term)
        case "formula":
            return p.run(p.formula)
        case "program":
            return p.run(p.program)
        case "sequent":
            return p.run(p.sequent)
        case "vector":
            return p.run(p.term_vector)
        case "matrix":
            return p.run(p.term_matrix)
        case "vars":
            return p.run(p.var_tuple)
        case "var":
            return p.run(p.variable)
    raise ValueError(f"unknown category {category!r}")


def parse_term(text: str) -> Term:
    return parse(text, "term")


def parse_formula(text: str) -> Formula:
    return parse(text, "formula")


def parse_program(text: str) -> Program:
    return parse(text, "program")


def parse_sequent(text: str) -> Sequent:
    return parse(text, "sequent")


def parse_systems(text: str) -> list[SystemDecl]:
    p = Parser(text)
    return p.run(p.systems)


def parse_goal_file(text: str) -> Sequent:
    """A goal file holds one sequent, or one formula meaning ``|- formula``."""
    p = Parser(text)
    if any(t.kind == "|-" for t in p.toks):
        return p.run(p.sequent)
    return Sequent((), (p.run(p.formula),))


__all__ = [
    "DalSyntaxError",
    "Parser",
    "SystemDecl",
    "Token",
    "parse",
    "parse_formula",
    "parse_goal_file",
    "parse_program",
    "parse_sequent",
    "parse_systems",
    "parse_term",
    "tokenize",
    "ONE",
]
