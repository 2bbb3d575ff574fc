"""Variable analyses and structural transformations over syntax trees."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

from .syntax import (
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
)


class DifferentialCapture(ValueError):
    """Substitution would rewrite a variable underneath a differential."""


class CaptureError(ValueError):
    """Substitution would capture a variable under a quantifier."""


class UnsupportedSubstitution(ValueError):
    pass


# ---------------------------------------------------------------- free variables


def free_vars(node) -> frozenset[Var]:
    """Free variables.  Boxes and refinements do not bind (superset policy)."""
    match node:
        case Const():
            return frozenset()
        case Var():
            return frozenset({node})
        case Plus(left=a, right=b) | Times(left=a, right=b):
            return free_vars(a) | free_vars(b)
        case Differential(arg=a):
            inner = free_vars(a)
            return inner | frozenset(v.prime() for v in inner if not v.primed)
        case Leq(left=a, right=b):
            return free_vars(a) | free_vars(b)
        case Not(arg=p):
            return free_vars(p)
        case And(left=p, right=q):
            return free_vars(p) | free_vars(q)
        case Forall(var=x, body=p):
            return free_vars(p) - {x}
        case Box(program=a, body=p):
            return free_vars(a) | free_vars(p)
        case Refines(left=a, right=b, vars=xs):
            return free_vars(a) | free_vars(b) | frozenset(xs) | frozenset(x.prime() for x in xs)
        case Assign(term=e):
            return free_vars(e)
        case Test(cond=f):
            return free_vars(f)
        case Dap(vars=xs, constraint=f):
            return frozenset(xs) | frozenset(x.prime() for x in xs) | free_vars(f)
        case Choice(left=a, right=b) | Seq(left=a, right=b):
            return free_vars(a) | free_vars(b)
        case Star(body=a):
            return free_vars(a)
        case Sequent(antecedent=ante, succedent=succ):
            out: frozenset[Var] = frozenset()
            for f in ante + succ:
                out |= free_vars(f)
            return out
        case tuple() | list():
            out = frozenset()
            for item in node:
                out |= free_vars(item)
            return out
    raise TypeError(f"free_vars: unsupported node {node!r}")


def bound_vars(prog: Program) -> frozenset[Var]:
    match prog:
        case Assign(var=x):
            return frozenset({x})
        case Test():
            return frozenset()
        case Dap(vars=xs):
            return frozenset(xs) | frozenset(x.prime() for x in xs)
        case Choice(left=a, right=b) | Seq(left=a, right=b):
            return bound_vars(a) | bound_vars(b)
        case Star(body=a):
            return bound_vars(a)
    raise TypeError(f"bound_vars: not a program {prog!r}")


def all_vars(node) -> frozenset[Var]:
    """Every variable occurring anywhere, bound or free (the signature)."""
    match node:
        case Forall(var=x, body=p):
            return all_vars(p) | {x}
        case Assign(var=x, term=e):
            return all_vars(e) | {x}
        case Var() | Const():
            return free_vars(node)
        case Sequent(antecedent=ante, succedent=succ):
            return all_vars(tuple(ante) + tuple(succ))
        case tuple() | list():
            out = frozenset()
            for item in node:
                out |= all_vars(item)
            return out
    out = free_vars(node)
    for child in children(node):
        out |= all_vars(child)
    return out


def children(node) -> tuple:
    match node:
        case Plus(left=a, right=b) | Times(left=a, right=b) | Leq(left=a, right=b):
            return (a, b)
        case And(left=a, right=b) | Choice(left=a, right=b) | Seq(left=a, right=b):
            return (a, b)
        case Differential(arg=a) | Not(arg=a) | Star(body=a) | Test(cond=a):
            return (a,)
        case Forall(body=p):
            return (p,)
        case Box(program=a, body=p):
            return (a, p)
        case Refines(left=a, right=b):
            return (a, b)
        case Assign(term=e):
            return (e,)
        case Dap(constraint=f):
            return (f,)
    return ()


def has_differential(node) -> bool:
    if isinstance(node, Differential):
        return True
    return any(has_differential(c) for c in children(node))


def has_modality(node) -> bool:
    if isinstance(node, (Box, Refines)):
        return True
    return any(has_modality(c) for c in children(node) if isinstance(c, Formula))


def primed_vars(node) -> frozenset[Var]:
    return frozenset(v for v in all_vars(node) if v.primed)


def is_first_order(f: Formula) -> bool:
    return not has_modality(f)


# ---------------------------------------------------------------- rebuilding


def map_terms(node, fn: Callable[[Term], Term]):
    """Apply ``fn`` to every maximal term inside a formula or program."""
    match node:
        case Term():
            return fn(node)
        case Leq(left=a, right=b):
            return Leq(fn(a), fn(b))
        case Not(arg=p):
            return Not(map_terms(p, fn))
        case And(left=p, right=q):
            return And(map_terms(p, fn), map_terms(q, fn))
        case Forall(var=x, body=p):
            return Forall(x, map_terms(p, fn))
        case Box(program=a, body=p):
            return Box(map_terms(a, fn), map_terms(p, fn))
        case Refines(left=a, right=b, vars=xs):
            return Refines(map_terms(a, fn), map_terms(b, fn), xs)
        case Assign(var=x, term=e):
            return Assign(x, fn(e))
        case Test(cond=f):
            return Test(map_terms(f, fn))
        case Dap(vars=xs, constraint=f):
            return Dap(xs, map_terms(f, fn))
        case Choice(left=a, right=b):
            return Choice(map_terms(a, fn), map_terms(b, fn))
        case Seq(left=a, right=b):
            return Seq(map_terms(a, fn), map_terms(b, fn))
        case Star(body=a):
            return Star(map_terms(a, fn))
        case Sequent(antecedent=ante, succedent=succ):
            return Sequent(tuple(map_terms(f, fn) for f in ante), tuple(map_terms(f, fn) for f in succ))
        case tuple():
            return tuple(map_terms(x, fn) for x in node)
    raise TypeError(f"map_terms: unsupported node {node!r}")


def fold_term(e: Term) -> Term:
    """Fold operations whose operands are both constants."""
    match e:
        case Plus(left=a, right=b):
            a, b = fold_term(a), fold_term(b)
            if isinstance(a, Const) and isinstance(b, Const):
                return Const(a.value + b.value)
            return Plus(a, b)
        case Times(left=a, right=b):
            a, b = fold_term(a), fold_term(b)
            if isinstance(a, Const) and isinstance(b, Const):
                return Const(a.value * b.value)
            return Times(a, b)
        case Differential(arg=a):
            return Differential(fold_term(a))
    return e


def const_normalize(node):
    """Rational-constant normalization: the kernel's only notion of equality."""
    return map_terms(node, fold_term)


def same_up_to_constants(a, b) -> bool:
    return a == b or const_normalize(a) == const_normalize(b)


# ---------------------------------------------------------------- AC normal form


def ac_key(node):
    """Hashable canonical key modulo associativity, commutativity and
    idempotence of conjunction (anywhere in the tree) and constant folding."""
    match node:
        case And():
            parts = []
            stack = [node]
            while stack:
                f = stack.pop()
                if isinstance(f, And):
                    stack.extend((f.left, f.right))
                else:
                    parts.append(ac_key(f))
            uniq = frozenset(parts)
            if len(uniq) == 1:
                return next(iter(uniq))
            return ("and", uniq)
        case Leq(left=a, right=b):
            return ("leq", fold_term(a), fold_term(b))
        case Not(arg=p):
            return ("not", ac_key(p))
        case Forall(var=x, body=p):
            return ("all", x, ac_key(p))
        case Box(program=a, body=p):
            return ("box", ac_key(a), ac_key(p))
        case Refines(left=a, right=b, vars=xs):
            return ("ref", ac_key(a), ac_key(b), xs)
        case Assign(var=x, term=e):
            return ("asg", x, fold_term(e))
        case Test(cond=f):
            return ("test", ac_key(f))
        case Dap(vars=xs, constraint=f):
            return ("dap", xs, ac_key(f))
        case Choice(left=a, right=b):
            return ("choice", ac_key(a), ac_key(b))
        case Seq(left=a, right=b):
            return ("seq", ac_key(a), ac_key(b))
        case Star(body=a):
            return ("star", ac_key(a))
    raise TypeError(f"ac_key: unsupported node {node!r}")


def ac_equivalent(a, b) -> bool:
    return ac_key(a) == ac_key(b)


# ---------------------------------------------------------------- substitution


def _occurs_under_differential(e: Term, x: Var, under: bool = False) -> bool:
    match e:
        case Var():
            return under and e == x
        case Const():
            return False
        case Plus(left=a, right=b) | Times(left=a, right=b):
            return _occurs_under_differential(a, x, under) or _occurs_under_differential(b, x, under)
        case Differential(arg=a):
            return _occurs_under_differential(a, x, True)
    raise TypeError(e)


def substitute(e: Term, x: Var, g: Term, strict: bool = True) -> Term:
    """Replace ``x`` by ``g`` in ``e``.

    The calculus has no rule for substitution underneath a differential, so
    any occurrence of ``x`` inside a ``Differential`` node is rejected when
    ``strict`` (the default).
    """
    if strict and _occurs_under_differential(e, x):
        raise DifferentialCapture(f"{x} occurs under a differential")
    return _subst(e, x, g)


def _subst(e: Term, x: Var, g: Term) -> Term:
    match e:
        case Var():
            return g if e == x else e
        case Const():
            return e
        case Plus(left=a, right=b):
            return Plus(_subst(a, x, g), _subst(b, x, g))
        case Times(left=a, right=b):
            return Times(_subst(a, x, g), _subst(b, x, g))
        case Differential(arg=a):
            return Differential(_subst(a, x, g))
    raise TypeError(e)


def substitute_formula(f: Formula, x: Var, g: Term) -> Formula:
    """Capture-avoiding substitution into a first-order formula."""
    gv = free_vars(g)
    # x' is a different variable, but a differential of an x-term would
    # silently change meaning; substitute() rejects that case

    def go(p: Formula) -> Formula:
        match p:
            case Leq(left=a, right=b):
                return Leq(substitute(a, x, g), substitute(b, x, g))
            case Not(arg=q):
                return Not(go(q))
            case And(left=q, right=r):
                return And(go(q), go(r))
            case Forall(var=y, body=q):
                if y == x:
                    return p
                if x not in free_vars(q):
                    return p
                if y in gv:
                    raise CaptureError(f"substituting for {x} would capture {y}")
                return Forall(y, go(q))
            case Box() | Refines():
                raise UnsupportedSubstitution("substitution into modal formulas is not supported")
        raise TypeError(p)

    return go(f)


def fresh_var(base: str, avoid) -> Var:
    names = {v.name for v in avoid}
    if base not in names:
        return Var(base)
    i = 1
    while f"{base}_{i}" in names:
        i += 1
    return Var(f"{base}_{i}")


def const_value(e: Term) -> Fraction | None:
    f = fold_term(e)
    return f.value if isinstance(f, Const) else None
