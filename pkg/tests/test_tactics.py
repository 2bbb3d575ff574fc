import random
from fractions import Fraction

import pytest

from dalkit import tactics
from dalkit.kernel import check
from dalkit.parser import parse
from dalkit.syntax import (
    And,
    Box,
    Const,
    Dap,
    Differential,
    Leq,
    Plus,
    Refines,
    Sequent,
    Times,
    ZERO,
    conj,
    eq,
    mutual,
    variables,
)
from dalkit.tactics import (
    ChainMismatch,
    ShapeMismatch,
    SideCondition,
    dhc_post,
    graft,
    ir_premises,
    ir_systems,
    open_leaves,
    rule_sequence,
    real_leaf,
    refl,
    refl_mutual,
    tac_da,
    tac_dhc,
    tac_di,
    tac_di_eq,
    tac_dw,
    tac_ir,
)

from goldens import DA, DHC_LEFT, DI_LEFT, DI_RIGHT, DW, REFL, ir_golden

x, y, z, v, w = variables("x y z v w")
xs = (x, y)
F = lambda s: parse(s, "formula")  # noqa: E731
T = lambda s: parse(s, "term")  # noqa: E731
S = lambda s: parse(s, "sequent")  # noqa: E731

def _circle():
    f = F("x^2 + y^2 - 1 = 0")
    e = T("x^2 + y^2 - 1")
    return f, e


def _closed(root):
    return check(root).status == "proved"


# ---------------------------------------------------------------- goldens


def test_library_goldens_match_transcription():
    assert tactics.GOLDEN_DW == DW
    assert tactics.GOLDEN_DA == DA
    assert tactics.GOLDEN_DI == DI_LEFT + DI_RIGHT
    assert tactics.GOLDEN_DHC == DHC_LEFT + DI_RIGHT
    assert tactics.golden_ir(0) == REFL * 2


def test_dw_golden_and_premise():
    f = F("x^2 + y^2 - 1 = 0")
    goal = Sequent((F("x = 1"),), (Box(Dap(xs, f), F("x^2 + y^2 = 1")),))
    root = tac_dw(goal)
    assert rule_sequence(root) == DW
    (leaf,) = open_leaves(root)
    assert leaf.goal == Sequent((f,), (F("x^2 + y^2 = 1"),))
    assert _closed(graft(root, real_leaf))


def test_dw_with_f_equal_p_closes_by_id():
    f = F("x <= y")
    root = tac_dw(Sequent((), (Box(Dap(xs, f), f),)), then=lambda g: tactics.close_by_id(g))
    assert _closed(root)


def test_da_golden_and_premises():
    f = F("x' = v & y' = w & 2*x*x' + 2*y*y' = 0")
    r = And(f, F("2*x*v + 2*y*w = 0"))
    goal = Sequent((), (Refines(Dap(xs, f), Dap(xs, r), xs),))
    root = tac_da(goal, r)
    assert rule_sequence(root) == DA
    fr, rg = (leaf.goal for leaf in open_leaves(root))
    assert fr == Sequent((f,), (r,))
    assert rg == Sequent((), (Refines(Dap(xs, r), Dap(xs, r), xs),))
    # the algebraic reduction closes: F |- R by ideal membership, R <= R by refl
    assert _closed(tac_da(goal, r, then_fr=real_leaf, then_rg=refl))


def test_da_with_r_equal_f_is_degenerate():
    f, g = F("x <= 1"), F("x <= 2")
    goal = Sequent((), (Refines(Dap(xs, f), Dap(xs, g), xs),))
    _, rg = (leaf.goal for leaf in open_leaves(tac_da(goal, f)))
    assert rg == goal


def test_di_golden_and_safety_premises():
    # invariant z^2*y - 1 on the ghost-extended safety dynamics
    ys = (x, y, z)
    f = F("x' + y = 0 & x*y - 1 = 0 & z' + 1/2*y^2*z = 0")
    e = T("z^2*y - 1")
    goal = Sequent((F("z^2*y = 1"),), (mutual(Dap(ys, f), Dap(ys, And(f, conj([F("z^2*y - 1 <= 0")]))), ys),))
    root = tac_di(goal, (e,))
    assert rule_sequence(root) == DI_LEFT + DI_RIGHT
    box, init = (leaf.goal for leaf in open_leaves(root))
    assert init.succedent == (F("z^2*y - 1 <= 0"),)
    assert box.succedent == (Box(Dap(ys, f), F("(z^2*y - 1)' <= 0")),)


def test_di_equality_uses_two_inequalities():
    f = F("x' = y & y' = -x")
    e = T("x^2 + y^2 - 1")
    p = conj([F("x^2 + y^2 - 1 <= 0"), F("-1*(x^2 + y^2 - 1) <= 0")])
    goal = Sequent((F("x^2 + y^2 = 1"),), (mutual(Dap(xs, f), Dap(xs, And(f, p)), xs),))

    def box(g):
        return tac_dw(g, 0, real_leaf)

    root = tac_di_eq(goal, e, then_init=real_leaf, then_box=box)
    assert _closed(root)


def test_di_zero_term_closes_trivially():
    f = F("x' = 1")
    goal = Sequent((), (mutual(Dap((x,), f), Dap((x,), And(f, F("0 <= 0"))), (x,)),))
    root = tac_di(goal, (ZERO,), then_init=real_leaf, then_box=lambda g: tac_dw(g, 0, real_leaf))
    assert _closed(root)


def test_di_rejects_primed_term():
    f = F("x' = 1")
    goal = Sequent((), (mutual(Dap((x,), f), Dap((x,), And(f, F("x' <= 0"))), (x,)),))
    with pytest.raises(SideCondition):
        tac_di(goal, (x.prime(),))


def test_dhc_circle_example():
    f, e = _circle()
    goal = Sequent((F("2*x*x' + 2*y*y' = 0"),), (mutual(Dap(xs, f), Dap(xs, And(f, dhc_post((e,)))), xs),))
    root = tac_dhc(goal, (e,))
    assert rule_sequence(root) == DHC_LEFT + DI_RIGHT
    box, init = (leaf.goal for leaf in open_leaves(root))
    assert init.succedent == (eq(Differential(e), ZERO),)
    assert box.succedent == (Box(Dap(xs, f), eq(e, ZERO)),)
    done = tac_dhc(goal, (e,), then_init=real_leaf, then_box=lambda g: tac_dw(g, 0, real_leaf))
    assert _closed(done)


def test_dhc_term_without_state_reduces_to_trivial_premise():
    f = F("x' = 1")
    e = T("z - 3")
    goal = Sequent((), (mutual(Dap((x,), f), Dap((x,), And(f, dhc_post((e,), (z,)))), (x,)),))
    root = tac_dhc(goal, (e,), ps=(z,))
    _, init = (leaf.goal for leaf in open_leaves(root))
    assert check(real_leaf(Sequent(init.antecedent + (F("z' = 0"),), init.succedent))).status == "proved"


def test_dhc_shape_mismatch():
    f, e = _circle()
    goal = Sequent((), (mutual(Dap(xs, f), Dap(xs, And(f, F("x = 0"))), xs),))
    with pytest.raises(ShapeMismatch):
        tac_dhc(goal, (e,))


def test_dw_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        tac_dw(S("|- x = 1"))


def test_refl():
    f = F("x' = y")
    goal = Sequent((), (Refines(Dap(xs, f), Dap(xs, f), xs),))
    assert rule_sequence(refl(goal)) == REFL and _closed(refl(goal))
    assert _closed(refl_mutual(Sequent((), (mutual(Dap(xs, f), Dap(xs, f), xs),))))
    with pytest.raises(ShapeMismatch):
        refl(Sequent((), (Refines(Dap(xs, f), Dap(xs, F("x' = 1")), xs),)))


# ---------------------------------------------------------------- index reduction


def _ir_goal(f0, chain, gamma=()):
    systems = ir_systems(f0, chain)
    return Sequent(tuple(gamma), (mutual(Dap(xs, systems[-1]), Dap(xs, f0), xs),)), systems


@pytest.mark.parametrize("m", [0, 1, 2])
def test_ir_golden(m):
    f0 = F("x' = v & y' = w & x^2 + y^2 - 1 = 0")
    chain = [(T("x^2 + y^2 - 1"), ()), (T("2*x*v + 2*y*w"), (v, w))][:m]
    goal, systems = _ir_goal(f0, chain)
    root = tac_ir(goal, f0, chain, systems=systems)
    assert rule_sequence(root) == ir_golden(m) == tactics.golden_ir(m)
    init, alg = ir_premises(f0, chain)
    for leaf in open_leaves(root):
        assert leaf.goal.succedent in ((init,), (alg,))


def test_ir_circle_certificate_proved():
    f, e = _circle()
    chain = [(e, ())]
    goal, systems = _ir_goal(f, chain, gamma=(F("2*x*x' + 2*y*y' = 0"),))
    assert _closed(tac_ir(goal, f, chain, then_init=real_leaf, then_alg=real_leaf))


def test_ir_chain_mismatch():
    f, e = _circle()
    chain = [(e, ())]
    goal, systems = _ir_goal(f, chain)
    with pytest.raises(ChainMismatch):
        tac_ir(goal, f, chain, systems=[f, And(f, F("x = 0"))])
    with pytest.raises(ChainMismatch):
        tac_ir(goal, f, chain, systems=[f])


# ---------------------------------------------------------------- fuzzing


def _rand_poly(rng: random.Random, names):
    t = Const(Fraction(rng.randint(-3, 3)))
    for _ in range(rng.randint(1, 3)):
        mono = Const(Fraction(rng.choice([-2, -1, 1, 2, 3])))
        for _ in range(rng.randint(1, 2)):
            mono = Times(mono, rng.choice(names))
        t = Plus(t, mono)
    return t


def test_fuzz_dw_200_goals():
    rng = random.Random(11)
    for _ in range(200):
        e, g = _rand_poly(rng, (x, y)), _rand_poly(rng, (x, y))
        p = eq(e, ZERO)
        f = And(eq(g, ZERO), p) if rng.random() < 0.5 else And(p, eq(g, ZERO))
        root = tac_dw(Sequent((), (Box(Dap(xs, f), p),)))
        assert rule_sequence(root) == DW
        assert _closed(graft(root, real_leaf))


def test_fuzz_da_di_dhc():
    rng = random.Random(5)
    for _ in range(20):
        e, g = _rand_poly(rng, (x, y)), _rand_poly(rng, (x, y))
        f = F("x' = y & y' = x")
        r = And(f, eq(g, g))
        goal = Sequent((), (Refines(Dap(xs, f), Dap(xs, r), xs),))
        assert _closed(tac_da(goal, r, then_fr=real_leaf, then_rg=refl))

        # dHC with the hidden constraint as hypothesis and E = 0 in the system
        fe = And(f, eq(e, ZERO))
        goal = Sequent((eq(Differential(e), ZERO),), (mutual(Dap(xs, fe), Dap(xs, And(fe, dhc_post((e,)))), xs),))
        root = tac_dhc(goal, (e,), then_init=real_leaf, then_box=lambda h: tac_dw(h, 0, real_leaf))
        assert _closed(root)

        # dI with e <= 0 as an invariant of a system that keeps e' <= 0
        p = Leq(e, ZERO)
        fi = And(f, Leq(Differential(e), ZERO))
        goal = Sequent((p,), (mutual(Dap(xs, fi), Dap(xs, And(fi, p)), xs),))
        root = tac_di(goal, (e,), then_init=real_leaf, then_box=lambda h: tac_dw(h, 0, real_leaf))
        assert _closed(root)
