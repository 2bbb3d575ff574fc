"""Builder for the bundled safety certificate.

System ``{x, y : x' = -y ∧ xy = 1}`` started at ``x = y = 1, x' = -1, y' = 1``
stays in ``y > 0``.  The argument adds the ghost ``z' = -y²z/2`` with
``z²y = 1`` initially, proves ``z²y = 1`` invariant using the hidden
constraint ``(xy)' = 0``, and concludes ``y > 0`` arithmetically.
"""

from __future__ import annotations

from fractions import Fraction

from .kernel import ProofNode
from .kernel.axioms import instantiate_axiom
from .kernel.script import dump_script
from .parser import parse
from .syntax import (
    And,
    Box,
    Const,
    Dap,
    Formula,
    Leq,
    Refines,
    Sequent,
    Times,
    conj,
    eq,
    match_exists,
    match_implies,
    mutual,
    neg,
    sub,
    var,
)
from .tactics import (
    Cont,
    by,
    close_by_id,
    dhc_post,
    real_leaf,
    step,
    tac_dhc,
    tac_di_eq,
    tac_dw,
)

SAFETY_GOAL = "x = 1, y = 1, x' = -1, y' = 1 |- [{x, y : x' = -y & x*y = 1}] y > 0"


def _box_via_mutual(goal: Sequent, i: int, prove_mutual: Cont) -> ProofNode:
    """``Γ ⊢ [{x:F}]P`` from ``Γ ⊢ {x:F} ≈ {x:F∧P}``, then R and dW."""
    box = goal.succedent[i]
    a, p = box.program, box.body
    b = Dap(a.vars, And(a.constraint, p))
    m = mutual(a, b, a.vars)
    n = len(goal.antecedent)

    def use(g: Sequent) -> ProofNode:
        return step(
            g,
            "andL",
            (n,),
            then=[
                by(
                    "R",
                    (i,),
                    {"a": a, "b": b, "xs": a.vars, "P": p},
                    then=[lambda h: close_by_id(h, i), lambda h: tac_dw(h, i, real_leaf)],
                )
            ],
        )

    return step(goal, "cut", (), {"C": m}, then=[lambda g: _only_last(g, lambda h: prove_mutual(h, 0)), use])


def safety_proof() -> ProofNode:
    goal = parse(SAFETY_GOAL, "sequent")
    x, y, z = var("x"), var("y"), var("z")
    sys0 = goal.succedent[0].program
    xs = sys0.vars
    half = Const(Fraction(-1, 2))
    # z' = (-y²/2) z + 0 with A = I
    coeff = Times(half, Times(y, y))
    dg_inst = {"xs": xs, "zs": (z,), "F": sys0.constraint, "A": ((Const(Fraction(1)),),), "B": ((coeff,),), "C": (Const(Fraction(0)),)}
    dg = instantiate_axiom("DG", dg_inst)
    # DG reads [S] det A ≠ 0 → ∀z ∃z'. S ≤ S_ghost
    _, dg_concl = match_implies(dg)
    _, refinement = match_exists(dg_concl.body)
    assert isinstance(refinement, Refines)
    ghost = refinement.right
    inv = sub(Times(Times(z, z), y), Const(Fraction(1)))  # z²y - 1
    hidden = sub(Times(x, y), Const(Fraction(1)))  # xy - 1
    positive = goal.succedent[0].body

    def prove_ghost_box(g: Sequent) -> ProofNode:
        # [S_g] y > 0 by K with the invariant z²y = 1
        inv_f = eq(Times(Times(z, z), y), Const(Fraction(1)))
        left = by("G", (0,), then=[by("implyR", (0,), then=[real_leaf])])
        return step(
            g,
            "K",
            (0,),
            {"a": ghost, "P": inv_f, "Q": positive},
            then=[left, lambda h: _invariant(h)],
        )

    def _invariant(g: Sequent) -> ProofNode:
        # [S_g] z²y = 1: unfold to the two-sided invariant form, then dI
        two = conj([Leq(inv, Const(Fraction(0))), Leq(neg(inv), Const(Fraction(0)))])
        target = Box(ghost, two)

        def di_box(h: Sequent) -> ProofNode:
            dd = h.succedent[0].body
            d_hidden = dhc_post((hidden,))
            return step(
                h,
                "K",
                (0,),
                {"a": ghost, "P": d_hidden, "Q": dd},
                then=[
                    lambda k: tac_dw(k, 0, by("implyR", (0,), then=[real_leaf])),
                    lambda k: _box_via_mutual(
                        k,
                        0,
                        lambda m, j: tac_dhc(m, (hidden,), j, (), real_leaf, lambda b: tac_dw(b, 0, real_leaf)),
                    ),
                ],
            )

        def by_di(h: Sequent) -> ProofNode:
            return _box_via_mutual(h, 0, lambda m, j: tac_di_eq(m, inv, j, (), real_leaf, di_box))

        return step(
            g,
            "cut",
            (),
            {"C": target},
            then=[
                lambda h: step(h, "weakenR", (0,), then=[by_di]),
                lambda h: _weaken_box(h, target),
            ],
        )

    def _weaken_box(h: Sequent, two_box: Formula) -> ProofNode:
        # [S_g](two-sided) ⊢ [S_g] z²y = 1 via K with P = two-sided
        post = h.succedent[0].body
        return step(
            h,
            "K",
            (0,),
            {"a": ghost, "P": two_box.body, "Q": post},
            then=[
                by("G", (0,), then=[by("implyR", (0,), then=[real_leaf])]),
                lambda k: close_by_id(k, 0),
            ],
        )

    def after_dg(g: Sequent) -> ProofNode:
        # antecedent ends with ∀z ∃z'. S ≤ S_g
        n = len(g.antecedent) - 1
        return step(
            g,
            "allL",
            (n,),
            {"t": z},
            then=[
                by(
                    "existsL",
                    (n + 1,),
                    then=[
                        lambda h: step(
                            h,
                            "R",
                            (0,),
                            {"a": sys0, "b": ghost, "xs": xs, "P": positive},
                            then=[lambda k: close_by_id(k, 0), prove_ghost_box],
                        )
                    ],
                )
            ],
        )

    def prove_dg(g: Sequent) -> ProofNode:
        j = len(g.succedent) - 1
        return step(g, "DG", (j,), dg_inst, then=[by("G", (j,), then=[real_leaf])])

    def after_ghost_init(g: Sequent) -> ProofNode:
        n = len(g.antecedent) - 1
        return step(
            g,
            "existsL",
            (n,),
            then=[by("cut", (), {"C": dg_concl}, then=[lambda h: _only_last(h, prove_dg), after_dg])],
        )

    ghost_init = parse("exists z. z^2*y = 1", "formula")
    return step(
        goal,
        "cut",
        (),
        {"C": ghost_init},
        then=[
            lambda g: _only_last(g, lambda h: step(h, "existsR", (0,), {"t": Const(Fraction(1))}, then=[real_leaf])),
            after_ghost_init,
        ],
    )


def _only_last(g: Sequent, then: Cont) -> ProofNode:
    """Drop every succedent formula but the last, then continue."""
    if len(g.succedent) == 1:
        return then(g)
    return step(g, "weakenR", (0,), then=[lambda h: _only_last(h, then)])


def safety_script() -> str:
    return ";; safety of {x, y : x' = -y & x*y = 1} from x = y = 1 via the ghost z' = -y^2 z / 2\n" + dump_script(safety_proof())


if __name__ == "__main__":
    print(safety_script(), end="")
