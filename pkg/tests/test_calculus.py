import random
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings

from dalkit.calculus import (
    MissingVariable,
    NonSquare,
    determinant,
    differential,
    eval_matrix,
    eval_term,
    exact_det,
    jacobian,
    partial,
)
from dalkit.parser import parse, parse_systems
from dalkit.polynomial import NestedDifferential, PrimedInput, Ring, normalize, poly_equal
from dalkit.reduction import DaeSystem, closure_check
from dalkit.syntax import Const, Differential, Plus, Times, mat_vec, primed, variables

from conftest import consts, plain_vars, terms
from oracles import same, sympy_time_derivative, to_sympy

x, y, z, v, w, m, l = variables("x y z v w m l")
T = lambda s: parse(s, "term")  # noqa: E731


def test_differential_examples():
    assert poly_equal(differential(T("x^2 + y^2 - 1")), T("2*x*x' + 2*y*y'"))
    assert poly_equal(differential(T("z^2*y")), T("2*z'*z*y + z^2*y'"))
    assert poly_equal(differential(T("5")), T("0"))


def test_differential_rejects_bad_input():
    with pytest.raises(PrimedInput):
        differential(T("x'"))
    with pytest.raises(NestedDifferential):
        differential(Differential(x))


def test_differential_output_has_no_differential_nodes():
    from dalkit.analysis import has_differential

    assert not has_differential(differential(T("(x+y)*(x*z+3)")))


@settings(max_examples=200, deadline=None)
@given(terms(allow_diff=False, leaves=consts | plain_vars))
def test_differential_matches_sympy_chain_rule(e):
    assert same(to_sympy(differential(e)), sympy_time_derivative(e))


@settings(max_examples=200, deadline=None)
@given(terms(allow_diff=False, leaves=consts | plain_vars), terms(allow_diff=False, leaves=consts | plain_vars))
def test_leibniz_and_linearity(e, g):
    assert poly_equal(differential(Times(e, g)), Plus(Times(differential(e), g), Times(e, differential(g))))
    assert poly_equal(differential(Plus(e, g)), Plus(differential(e), differential(g)))


def test_partial_examples():
    assert partial(T("x*y"), x) == T("1*y + x*0")
    assert poly_equal(partial(T("x*y"), x), y)
    assert poly_equal(partial(T("x^2 + y^2 - l^2"), x), T("2*x"))
    assert poly_equal(partial(T("7"), x), T("0"))


def test_jacobian_examples(fixtures):
    assert [[poly_equal(a, b) for a, b in zip(row, [y, x])] for row in jacobian([T("x*y")], (x, y))] == [[True, True]]
    assert all(poly_equal(a, T("0")) for a in jacobian([T("x^2+y^2-1")], primed((x, y)))[0])


@settings(max_examples=100, deadline=None)
@given(terms(allow_diff=False, leaves=consts | plain_vars), terms(allow_diff=False, leaves=consts | plain_vars))
def test_jacobian_axiom_consistency(e, g):
    from dalkit.analysis import free_vars

    xs = tuple(sorted(free_vars(e) | free_vars(g) | {x}, key=str))
    jac = jacobian([e, g], xs)
    for lhs, rhs in zip([differential(e), differential(g)], mat_vec(jac, primed(xs))):
        assert poly_equal(lhs, rhs)


def test_determinant_examples():
    a, b, c, d = variables("a b c d")
    assert determinant(((a,),)) == a
    assert poly_equal(determinant(((a, b), (c, d))), T("a*d - b*c"))
    with pytest.raises(NonSquare):
        determinant(((a, b),))


def test_pendulum_closure_determinant(fixtures):
    (decl,) = parse_systems((fixtures / "pendulum.dal").read_text())
    from dalkit.reduction import reduce

    res = reduce(DaeSystem.from_decl(decl), max_rounds=2, certify=False)
    det = closure_check(res.reduced_system).det
    assert poly_equal(det, T("m^2*l^2"))
    rng = np.random.default_rng(1)
    jac = closure_check(res.reduced_system).jacobian
    for _ in range(50):
        s = {var_: float(rng.uniform(-2, 2)) for var_ in res.reduced_system.ring().vars}
        ref = np.linalg.det(np.array(eval_matrix(jac, s), dtype=float))
        got = eval_term(det, s)
        assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref))


def _random_matrix(rng: random.Random, n: int):
    names = variables("a b c d")

    def entry():
        t = Const(Fraction(rng.randint(-5, 5)))
        for _ in range(rng.randint(0, 2)):
            t = Plus(t, Times(Const(Fraction(rng.randint(-3, 3))), Times(rng.choice(names), rng.choice(names + (Const(Fraction(1)),)))))
        return t

    return tuple(tuple(entry() for _ in range(n)) for _ in range(n))


@pytest.mark.parametrize("seed", range(4))
def test_determinant_matches_lu_and_sympy(seed):
    rng = random.Random(seed)
    for _ in range(25):
        n = rng.randint(1, 4)
        mat = _random_matrix(rng, n)
        state = {vv: Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for vv in variables("a b c d")}
        exact = eval_term(determinant(mat), state, exact=True)
        assert exact == exact_det(eval_matrix(mat, state, exact=True))
        ref = sp.Matrix([[to_sympy(e) for e in row] for row in mat]).det()
        assert same(to_sympy(determinant(mat)), ref)
        fl = {k: float(q) for k, q in state.items()}
        lu = np.linalg.det(np.array(eval_matrix(mat, fl), dtype=float))
        assert abs(float(exact) - lu) <= 1e-9 * max(1.0, abs(lu))


def test_normalize_examples():
    assert not normalize(T("(x+y)^2 - x^2 - 2*x*y - y^2"))
    assert poly_equal(T("2*x*v + 2*y*w"), T("2*(x*v + y*w)"))
    assert poly_equal(T("x*x'"), T("x'*x"))


def test_normalize_rejects_differential():
    with pytest.raises(NestedDifferential):
        normalize(Differential(x))


def test_polynomial_has_no_zero_coefficients():
    p = normalize(T("x - x + y"))
    assert all(c != 0 for c in p.terms.values())
    assert not normalize(T("0")).terms


def test_monomial_orders():
    ring = Ring((x.prime(), x, y), order="lex")
    p = normalize(T("x^3 + x'"), ring)
    assert p.lm == (1, 0, 0)
    ring = Ring((x.prime(), x, y), order="grevlex")
    assert normalize(T("x^3 + x'"), ring).lm == (0, 3, 0)


def test_eval_examples():
    assert eval_term(T("x+y"), {x: 1, y: 2}) == 3
    assert eval_term(T("(x^2)'"), {x: 3, x.prime(): 2}) == 12
    with pytest.raises(MissingVariable):
        eval_term(T("x+y"), {x: 1})


def test_eval_exact_mode_stays_rational():
    r = eval_term(T("1/3*x + 1/6"), {x: Fraction(1, 2)}, exact=True)
    assert r == Fraction(1, 3) and isinstance(r, Fraction)
