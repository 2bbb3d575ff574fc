"""Pretty printer producing text that parses back to the identical tree.

Desugared patterns (``e <= g & g <= e``, ``!(P & !Q)`` ...) are re-sugared
where the sugar parses back to exactly the same core tree.
"""

from __future__ import annotations

from fractions import Fraction

from .syntax import (
    FALSE,
    MINUS_ONE,
    TRUE,
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
    match_eq,
    match_implies,
    match_mutual,
)

# term precedence levels
_SUM, _PROD, _UNARY, _ATOM = 1, 2, 3, 4
# formula precedence levels
_QUANT, _IFF, _IMP, _OR, _AND, _FUNARY, _FATOM = 0, 1, 2, 3, 4, 5, 6
# program precedence levels
_CHOICE, _SEQ, _STAR, _PATOM = 1, 2, 3, 4


def fmt_fraction(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _paren(s: str, cond: bool) -> str:
    return f"({s})" if cond else s


def print_term(e: Term, ctx: int = _SUM) -> str:
    match e:
        case Const(value=c):
            s = fmt_fraction(c)
            # a negative literal is a unary-level construct
            return _paren(s, c < 0 and ctx > _UNARY)
        case Var():
            return str(e)
        case Differential(arg=a):
            return f"({print_term(a)})'"
        case Plus(left=a, right=Times(left=Const() as m, right=b)) if m == MINUS_ONE:
            s = f"{print_term(a, _SUM)} - {print_term(b, _PROD)}"
            return _paren(s, ctx > _SUM)
        case Plus(left=a, right=b):
            s = f"{print_term(a, _SUM)} + {print_term(b, _PROD)}"
            return _paren(s, ctx > _SUM)
        case Times(left=Const() as m, right=b) if m == MINUS_ONE:
            inner = print_term(b, _UNARY)
            # "-2" would read back as a literal
            if isinstance(b, Const) and not inner.startswith("("):
                inner = f"({inner})"
            return _paren("-" + inner, ctx > _UNARY)
        case Times(left=a, right=b):
            s = f"{print_term(a, _PROD)} * {print_term(b, _UNARY)}"
            return _paren(s, ctx > _PROD)
    raise TypeError(f"not a term: {e!r}")


def print_vector(es) -> str:
    return "[" + ", ".join(print_term(e) for e in es) + "]"


def print_matrix(rows) -> str:
    return "[" + ", ".join(print_vector(r) for r in rows) + "]"


def print_vars(xs) -> str:
    return "[" + ", ".join(str(x) for x in xs) + "]"


def print_formula(f: Formula, ctx: int = _QUANT) -> str:
    if f == TRUE:
        return "true"
    if f == FALSE:
        return "false"
    m = match_eq(f)
    if m is not None:
        return f"{print_term(m[0])} = {print_term(m[1])}"
    m3 = match_mutual(f)
    if m3 is not None:
        a, b, xs = m3
        return _paren(_refinement(a, b, xs, "=="), ctx > _FATOM)
    match f:
        case Leq(left=a, right=b):
            return f"{print_term(a)} <= {print_term(b)}"
        case Not(arg=Leq(left=b, right=a)):
            return f"{print_term(a)} < {print_term(b)}"
        case Not(arg=inner) if match_eq(inner) is not None:
            a, b = match_eq(inner)
            return f"{print_term(a)} != {print_term(b)}"
        case Not(arg=And(left=Not(arg=p), right=Not(arg=q))):
            s = f"{print_formula(p, _AND)} | {print_formula(q, _OR)}"
            return _paren(s, ctx > _OR)
        case Not(arg=Forall(var=x, body=Not(arg=p))):
            s = f"exists {x}. {print_formula(p, _QUANT)}"
            return _paren(s, ctx > _QUANT)
        case Not() if match_implies(f) is not None:
            p, q = match_implies(f)
            s = f"{print_formula(p, _OR)} -> {print_formula(q, _IMP)}"
            return _paren(s, ctx > _IMP)
        case Not(arg=p):
            return _paren("!" + print_formula(p, _FUNARY), ctx > _FUNARY)
        case And(left=p, right=q):
            ip, iq = match_implies(p), match_implies(q)
            if ip is not None and iq is not None and ip[0] == iq[1] and ip[1] == iq[0]:
                s = f"{print_formula(ip[0], _IMP)} <-> {print_formula(ip[1], _IFF)}"
                return _paren(s, ctx > _IFF)
            s = f"{print_formula(p, _FUNARY)} & {print_formula(q, _AND)}"
            return _paren(s, ctx > _AND)
        case Forall(var=x, body=p):
            s = f"forall {x}. {print_formula(p, _QUANT)}"
            return _paren(s, ctx > _QUANT)
        case Box(program=a, body=p):
            s = f"[{print_program(a)}]{print_formula(p, _FUNARY)}"
            return _paren(s, ctx > _FUNARY)
        case Refines(left=a, right=b, vars=xs):
            return _paren(_refinement(a, b, xs, "<="), ctx > _FATOM)
    raise TypeError(f"not a formula: {f!r}")


def _refinement(a: Program, b: Program, xs, op: str) -> str:
    return f"{print_program(a)} {op}[{', '.join(str(x) for x in xs)}] {print_program(b)}"


def print_program(p: Program, ctx: int = _CHOICE) -> str:
    match p:
        case Assign(var=x, term=e):
            return _paren(f"{x} := {print_term(e)}", ctx > _SEQ)
        case Test(cond=f):
            return f"?({print_formula(f)})"
        case Dap(vars=xs, constraint=f):
            return "{" + ", ".join(str(x) for x in xs) + " : " + print_formula(f) + "}"
        case Choice(left=a, right=b):
            return _paren(f"{print_program(a, _SEQ)} ++ {print_program(b, _CHOICE)}", ctx > _CHOICE)
        case Seq(left=a, right=b):
            return _paren(f"{print_program(a, _STAR)}; {print_program(b, _SEQ)}", ctx > _SEQ)
        case Star(body=a):
            return print_program(a, _PATOM) + "*"
    raise TypeError(f"not a program: {p!r}")


def print_sequent(s: Sequent) -> str:
    ante = ", ".join(print_formula(f) for f in s.antecedent)
    succ = ", ".join(print_formula(f) for f in s.succedent)
    return f"{ante} |- {succ}".strip()


def pretty(node) -> str:
    """Print any syntax tree (term, formula, program or sequent)."""
    if isinstance(node, Term):
        return print_term(node)
    if isinstance(node, Formula):
        return print_formula(node)
    if isinstance(node, Program):
        return print_program(node)
    if isinstance(node, Sequent):
        return print_sequent(node)
    raise TypeError(f"cannot print {node!r}")
