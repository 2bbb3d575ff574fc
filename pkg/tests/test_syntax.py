from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dalkit.analysis import DifferentialCapture, bound_vars, free_vars, substitute
from dalkit.calculus import eval_term
from dalkit.parser import DalSyntaxError, parse, parse_systems
from dalkit.printer import pretty, print_sequent
from dalkit.syntax import (
    And,
    Assign,
    Const,
    Dap,
    Differential,
    Leq,
    Plus,
    Refines,
    Seq,
    Sequent,
    Test as QTest,
    Var,
    eq,
    mutual,
    primed,
    variables,
)

from conftest import formulas, programs, terms

x, y, z, v = variables("x y z v")


def test_differential_of_variable_parses():
    assert parse("(x)'", "term") == Differential(x)


def test_dap_equality_desugars_to_leq_pair():
    prog = parse("{x,y : x^2+y^2-1 = 0}", "program")
    assert isinstance(prog, Dap) and prog.vars == (x, y)
    f = prog.constraint
    assert isinstance(f, And) and isinstance(f.left, Leq) and f.left.left == f.right.right


def test_mutual_refinement_desugars():
    a, b = parse("x := 1", "program"), parse("x := 2", "program")
    f = parse("x := 1 ==[x] x := 2", "formula")
    assert f == And(Refines(a, b, (x,)), Refines(b, a, (x,)))
    assert f == mutual(a, b, (x,))


def test_printer_examples():
    assert pretty(Differential(Plus(x, y))).replace(" ", "") == "(x+y)'"
    assert pretty(Const(Fraction(-1, 2))) == "-1/2"


def test_syntax_error_reports_position():
    with pytest.raises(DalSyntaxError) as exc:
        parse("x + * y", "term")
    assert "line 1, column 5" in str(exc.value) and "expected" in str(exc.value)


def test_primed_assignment_rejected():
    with pytest.raises(DalSyntaxError):
        parse("x' := 1", "program")


def test_variable_invariants():
    assert x.prime().base == x
    with pytest.raises(ValueError):
        x.prime().prime()
    with pytest.raises(ValueError):
        Var("1abc")


def test_dap_vars_unprimed_and_unique():
    with pytest.raises(ValueError):
        Dap((x, x), eq(x, 0))
    with pytest.raises(ValueError):
        Dap((x.prime(),), eq(x, 0))


def test_rational_literals_lowest_terms():
    assert parse("6/4", "term") == Const(Fraction(3, 2))


def test_comments_are_ignored():
    assert parse("x + 1 // trailing", "term") == parse("x + 1", "term")


def test_system_block():
    (decl,) = parse_systems("system s { states x, y; params m; eq m*x' - y = 0; eq x^2 - 1 = 0; }")
    assert decl.name == "s" and decl.states == (x, y) and len(decl.equations) == 2


@settings(max_examples=1000, deadline=None)
@given(terms())
def test_term_round_trip(t):
    assert parse(pretty(t), "term") == t


@settings(max_examples=1000, deadline=None)
@given(formulas)
def test_formula_round_trip(f):
    assert parse(pretty(f), "formula") == f


@settings(max_examples=300, deadline=None)
@given(programs)
def test_program_round_trip(p):
    assert parse(pretty(p), "program") == p


def test_sequent_round_trip():
    s = Sequent((eq(x, 1), eq(y, 0)), (parse("[{x : x' = 1}] x >= 1", "formula"),))
    assert parse(print_sequent(s), "sequent") == s


def test_pendulum_dap_round_trip(fixtures):
    from dalkit.reduction import DaeSystem

    (decl,) = parse_systems((fixtures / "pendulum.dal").read_text())
    sys = DaeSystem.from_decl(decl)
    prog = Dap(sys.state_vars, sys.formula())
    assert parse(pretty(prog), "program") == prog


# ---------------------------------------------------------------- variable analyses


def test_free_vars_examples():
    assert free_vars(parse("x + y'", "term")) == {x, y.prime()}
    assert free_vars(parse("(x*y)'", "term")) == {x, y, x.prime(), y.prime()}
    box = parse("[{x : x' <= 1}] y <= 0", "formula")
    assert free_vars(box) == {x, x.prime(), y}


def test_bound_vars_examples():
    assert bound_vars(Dap((x, y), eq(x, 0))) == {x, y, x.prime(), y.prime()}
    assert bound_vars(QTest(eq(x, 0))) == frozenset()
    assert bound_vars(Seq(Assign(x, Const(Fraction(1))), Dap((y,), eq(y, 0)))) == {x, y, y.prime()}


@settings(max_examples=300, deadline=None)
@given(terms())
def test_differential_free_vars_rule(t):
    assert free_vars(Differential(t)) == free_vars(t) | set(primed(w.base for w in free_vars(t) if not w.primed)) | {
        w for w in free_vars(t) if w.primed
    }


@settings(max_examples=200, deadline=None)
@given(programs, programs)
def test_bound_vars_of_sequence_is_union(a, b):
    assert bound_vars(Seq(a, b)) == bound_vars(a) | bound_vars(b)


def _naive_fv(node):
    # independent recursive oracle over dataclass fields
    from dalkit.syntax import Forall

    if isinstance(node, Var):
        return {node}
    if isinstance(node, Differential):
        inner = _naive_fv(node.arg)
        return inner | {w.prime() for w in inner if not w.primed}
    if isinstance(node, Forall):
        return _naive_fv(node.body) - {node.var}
    if isinstance(node, Dap):
        return _naive_fv(node.constraint) | set(node.vars) | set(primed(node.vars))
    if isinstance(node, Assign):
        return _naive_fv(node.term)
    if isinstance(node, Refines):
        return _naive_fv(node.left) | _naive_fv(node.right) | set(node.vars) | set(primed(node.vars))
    out = set()
    for name in getattr(node, "__dataclass_fields__", {}):
        val = getattr(node, name)
        if hasattr(val, "__dataclass_fields__"):
            out |= _naive_fv(val)
    return out


@settings(max_examples=300, deadline=None)
@given(formulas)
def test_free_vars_is_superset_of_naive_oracle(f):
    # the analysis may be conservative; it must never miss a free variable
    assert _naive_fv(f) <= set(free_vars(f))


# ---------------------------------------------------------------- substitution


def test_substitute_examples():
    assert substitute(parse("x'*y", "term"), y, Const(Fraction(3))) == parse("x'*3", "term")
    with pytest.raises(DifferentialCapture):
        substitute(parse("(x)'", "term"), x, parse("y+1", "term"))
    assert substitute(parse("2*x*v", "term"), v, x.prime()) == parse("2*x*x'", "term")


@settings(max_examples=100, deadline=None)
@given(terms(allow_diff=False), terms(allow_diff=False), st.lists(st.integers(-5, 5), min_size=12, max_size=12))
def test_substitution_commutes_with_evaluation(e, g, vals):
    from conftest import NAMES

    state = {}
    for k, n in enumerate(NAMES):
        state[Var(n)] = Fraction(vals[k])
        state[Var(n, True)] = Fraction(vals[k + 6])
    lhs = eval_term(substitute(e, x, g), state, exact=True)
    s2 = dict(state)
    s2[x] = eval_term(g, state, exact=True)
    assert lhs == eval_term(e, s2, exact=True)
