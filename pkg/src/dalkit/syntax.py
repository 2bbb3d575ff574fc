"""Abstract syntax of differential-algebraic refinement logic.

Terms, formulas and programs are immutable, hashable dataclasses; structural
equality is plain ``==``.  Only the core connectives are represented: every
piece of surface sugar (``=``, ``<``, ``|``, ``->``, ``exists`` ...) is
expanded by the helper constructors below, which the parser also uses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
RESERVED = frozenset({"forall", "exists", "true", "false"})


class SyntaxNode:
    __slots__ = ()


# ---------------------------------------------------------------- terms


class Term(SyntaxNode):
    __slots__ = ()

    def __add__(self, other: TermLike) -> Term:
        return Plus(self, as_term(other))

    def __radd__(self, other: TermLike) -> Term:
        return Plus(as_term(other), self)

    def __mul__(self, other: TermLike) -> Term:
        return Times(self, as_term(other))

    def __rmul__(self, other: TermLike) -> Term:
        return Times(as_term(other), self)

    def __sub__(self, other: TermLike) -> Term:
        return sub(self, as_term(other))

    def __rsub__(self, other: TermLike) -> Term:
        return sub(as_term(other), self)

    def __neg__(self) -> Term:
        return neg(self)

    def __pow__(self, n: int) -> Term:
        return power(self, n)


@dataclass(frozen=True, slots=True)
class Const(Term):
    value: Fraction

    def __post_init__(self) -> None:
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True, slots=True, order=True)
class Var(Term):
    """A variable; ``primed=True`` marks the differential variable x'."""

    name: str
    primed: bool = False

    def __post_init__(self) -> None:
        if not _IDENT.match(self.name) or self.name in RESERVED:
            raise ValueError(f"invalid variable name {self.name!r}")

    def prime(self) -> Var:
        if self.primed:
            raise ValueError(f"cannot prime differential variable {self.name}'")
        return Var(self.name, True)

    @property
    def base(self) -> Var:
        return Var(self.name) if self.primed else self

    def __str__(self) -> str:
        return self.name + ("'" if self.primed else "")


@dataclass(frozen=True, slots=True)
class Plus(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Times(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Differential(Term):
    arg: Term


# ---------------------------------------------------------------- formulas


class Formula(SyntaxNode):
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Leq(Formula):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Forall(Formula):
    var: Var
    body: Formula


@dataclass(frozen=True, slots=True)
class Box(Formula):
    program: Program
    body: Formula


@dataclass(frozen=True, slots=True)
class Refines(Formula):
    """Partial refinement ``left <=[vars] right``."""

    left: Program
    right: Program
    vars: tuple[Var, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", check_var_tuple(self.vars))


# ---------------------------------------------------------------- programs


class Program(SyntaxNode):
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Assign(Program):
    var: Var
    term: Term

    def __post_init__(self) -> None:
        if self.var.primed:
            raise ValueError("assignment to a differential variable")


@dataclass(frozen=True, slots=True)
class Test(Program):
    cond: Formula


@dataclass(frozen=True, slots=True)
class Dap(Program):
    """Differential-algebraic program ``{x1,...,xn : constraint}``."""

    vars: tuple[Var, ...]
    constraint: Formula

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", check_var_tuple(self.vars))


@dataclass(frozen=True, slots=True)
class Choice(Program):
    left: Program
    right: Program


@dataclass(frozen=True, slots=True)
class Seq(Program):
    left: Program
    right: Program


@dataclass(frozen=True, slots=True)
class Star(Program):
    body: Program


@dataclass(frozen=True, slots=True)
class Sequent:
    antecedent: tuple[Formula, ...] = ()
    succedent: tuple[Formula, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "antecedent", tuple(self.antecedent))
        object.__setattr__(self, "succedent", tuple(self.succedent))


TermLike = Union[Term, int, Fraction]
TermVector = tuple[Term, ...]
TermMatrix = tuple[tuple[Term, ...], ...]


def check_var_tuple(xs: Iterable[Var]) -> tuple[Var, ...]:
    xs = tuple(xs)
    for x in xs:
        if not isinstance(x, Var):
            raise TypeError(f"expected a variable, got {x!r}")
        if x.primed:
            raise ValueError(f"variable tuple may not contain differential variable {x}")
    if len(set(xs)) != len(xs):
        raise ValueError("variable tuple contains duplicates")
    return xs


def as_term(e: TermLike) -> Term:
    if isinstance(e, Term):
        return e
    if isinstance(e, (int, Fraction)):
        return Const(Fraction(e))
    raise TypeError(f"not a term: {e!r}")


# ---------------------------------------------------------------- sugar

ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))
MINUS_ONE = Const(Fraction(-1))
TRUE = Leq(ZERO, ZERO)
FALSE = Not(TRUE)


def neg(e: Term) -> Term:
    return Times(MINUS_ONE, e)


def sub(e: Term, g: Term) -> Term:
    return Plus(e, Times(MINUS_ONE, g))


def power(e: Term, n: int) -> Term:
    if n < 0:
        raise ValueError("negative exponent")
    if n == 0:
        return ONE
    out = e
    for _ in range(n - 1):
        out = Times(out, e)
    return out


def eq(e: TermLike, g: TermLike) -> Formula:
    e, g = as_term(e), as_term(g)
    return And(Leq(e, g), Leq(g, e))


def lt(e: TermLike, g: TermLike) -> Formula:
    return Not(Leq(as_term(g), as_term(e)))


def gt(e: TermLike, g: TermLike) -> Formula:
    return Not(Leq(as_term(e), as_term(g)))


def geq(e: TermLike, g: TermLike) -> Formula:
    return Leq(as_term(g), as_term(e))


def neq(e: TermLike, g: TermLike) -> Formula:
    return Not(eq(e, g))


def or_(p: Formula, q: Formula) -> Formula:
    return Not(And(Not(p), Not(q)))


def implies(p: Formula, q: Formula) -> Formula:
    return Not(And(p, Not(q)))


def iff(p: Formula, q: Formula) -> Formula:
    return And(implies(p, q), implies(q, p))


def exists(x: Var, p: Formula) -> Formula:
    return Not(Forall(x, Not(p)))


def mutual(a: Program, b: Program, xs: Sequence[Var]) -> Formula:
    return And(Refines(a, b, tuple(xs)), Refines(b, a, tuple(xs)))


def conj(parts: Sequence[Formula]) -> Formula:
    """Right-nested conjunction; the empty conjunction is ``true``."""
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def vec_eq_zero(es: Sequence[Term]) -> Formula:
    return conj([eq(e, ZERO) for e in es])


def vec_leq_zero(es: Sequence[Term]) -> Formula:
    return conj([Leq(e, ZERO) for e in es])


def vec_prec_zero(es: Sequence[Term], strict: bool) -> Formula:
    if strict:
        return conj([lt(e, ZERO) for e in es])
    return vec_leq_zero(es)


def term_sum(es: Sequence[Term]) -> Term:
    """Left-folded sum; the empty sum is 0."""
    es = list(es)
    if not es:
        return ZERO
    out = es[0]
    for e in es[1:]:
        out = Plus(out, e)
    return out


def mat_vec(rows: TermMatrix, xs: Sequence[Term]) -> tuple[Term, ...]:
    """Matrix-vector product as a term vector (row i is sum_j a_ij * x_j)."""
    out = []
    for row in rows:
        if len(row) != len(xs):
            raise ValueError("matrix/vector dimension mismatch")
        out.append(term_sum([Times(a, x) for a, x in zip(row, xs)]))
    return tuple(out)


def primed(xs: Iterable[Var]) -> tuple[Var, ...]:
    return tuple(x.prime() for x in xs)


def var(name: str) -> Var:
    """``var("x")`` or ``var("x'")``."""
    if name.endswith("'"):
        return Var(name[:-1], True)
    return Var(name)


def variables(names: str) -> tuple[Var, ...]:
    return tuple(var(n) for n in names.replace(",", " ").split())


def conjuncts(f: Formula) -> list[Formula]:
    """Flatten nested ``And`` nodes (equalities are split too)."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def match_eq(f: Formula) -> tuple[Term, Term] | None:
    """Recognise the desugared equality ``e <= g & g <= e``."""
    if (
        isinstance(f, And)
        and isinstance(f.left, Leq)
        and isinstance(f.right, Leq)
        and f.left.left == f.right.right
        and f.left.right == f.right.left
    ):
        return f.left.left, f.left.right
    return None


def match_implies(f: Formula) -> tuple[Formula, Formula] | None:
    if isinstance(f, Not) and isinstance(f.arg, And) and isinstance(f.arg.right, Not):
        return f.arg.left, f.arg.right.arg
    return None


def match_exists(f: Formula) -> tuple[Var, Formula] | None:
    if isinstance(f, Not) and isinstance(f.arg, Forall) and isinstance(f.arg.body, Not):
        return f.arg.var, f.arg.body.arg
    return None


def match_mutual(f: Formula) -> tuple[Program, Program, tuple[Var, ...]] | None:
    if (
        isinstance(f, And)
        and isinstance(f.left, Refines)
        and isinstance(f.right, Refines)
        and f.left.left == f.right.right
        and f.left.right == f.right.left
        and f.left.vars == f.right.vars
    ):
        return f.left.left, f.left.right, f.left.vars
    return None
