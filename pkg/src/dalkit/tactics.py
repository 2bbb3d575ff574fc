"""Untrusted proof construction for the derived rules.

Every tactic builds a :class:`ProofNode` tree by calling the kernel's own
premise function (:func:`apply_rule`) at each step, so a tactic can only go
wrong by producing a script the checker rejects.  Premises the tactic cannot
close itself are left as ``open`` leaves (or handed to a continuation).
"""

from __future__ import annotations

from typing import Callable, Sequence

from .analysis import has_differential
from .kernel.rules import RuleError, apply_rule
from .kernel.script import ProofNode
from .syntax import (
    And,
    Box,
    Dap,
    Differential,
    Formula,
    Leq,
    Refines,
    Sequent,
    Term,
    Var,
    ZERO,
    conj,
    eq,
    implies,
    lt,
    match_mutual,
    mutual,
    primed,
    vec_eq_zero,
)

Cont = Callable[[Sequent], ProofNode]


class TacticError(ValueError):
    pass


class ShapeMismatch(TacticError):
    pass


class SideCondition(TacticError):
    pass


class ChainMismatch(TacticError):
    pass


def open_leaf(goal: Sequent) -> ProofNode:
    return ProofNode(goal, "open")


def real_leaf(goal: Sequent) -> ProofNode:
    return ProofNode(goal, "real")


def step(goal: Sequent, rule: str, at: Sequence[int] = (), inst: dict | None = None, then: Sequence[Cont] = ()) -> ProofNode:
    """Apply one rule and continue on each premise."""
    inst = dict(inst or {})
    try:
        prems = apply_rule(goal, rule, at, inst)
    except RuleError as exc:
        raise TacticError(f"{rule}: {exc}") from None
    if len(prems) != len(then):
        raise TacticError(f"{rule} yields {len(prems)} premise(s), tactic supplied {len(then)} continuation(s)")
    return ProofNode(goal, rule, tuple(at), inst, [k(p) for k, p in zip(then, prems)])


def by(rule: str, at: Sequence[int] = (), inst: dict | None = None, then: Sequence[Cont] = ()) -> Cont:
    return lambda g: step(g, rule, at, inst, then)


def open_leaves(root: ProofNode) -> list[ProofNode]:
    return [n for n in root.walk() if n.rule == "open"]


def graft(root: ProofNode, prover: Callable[[Sequent], ProofNode | None]) -> ProofNode:
    """Replace open leaves with ``prover(goal)`` wherever it returns a node."""
    if root.rule == "open":
        sub = prover(root.goal)
        return sub if sub is not None else root
    return ProofNode(root.goal, root.rule, root.at, dict(root.inst), [graft(k, prover) for k in root.kids])


# calculus rules proper; the rest is propositional plumbing
CALCULUS_RULES = frozenset(
    {"K", "G", "dW", "TR", "DC", "DR", "DM", "dI", "dHC", "cut", "unfold", "R", "DG", "AG", "DP", "jacobian"}
)


def rule_sequence(root: ProofNode) -> list[str]:
    """Pre-order rule ids restricted to the rules the derivations name."""
    return [r for r in root.rules() if r in CALCULUS_RULES]


# ---------------------------------------------------------------- plumbing


def keep_only_succ(goal: Sequent, j: int, then: Cont) -> ProofNode:
    """Weaken away every succedent formula except position ``j``."""
    n = len(goal.succedent)
    if n == 1:
        return then(goal)
    drop = n - 1 if j != n - 1 else n - 2
    nj = j if drop > j else j - 1
    return step(goal, "weakenR", (drop,), then=[lambda g: keep_only_succ(g, nj, then)])


def clear_ante(goal: Sequent, then: Cont) -> ProofNode:
    if not goal.antecedent:
        return then(goal)
    return step(goal, "weakenL", (len(goal.antecedent) - 1,), then=[lambda g: clear_ante(g, then)])


def _find(fs: Sequence[Formula], f: Formula) -> int:
    for k, g in enumerate(fs):
        if g == f:
            return k
    raise TacticError("formula not found in sequent")


def close_by_id(goal: Sequent, j: int = 0) -> ProofNode:
    target = goal.succedent[j]
    return step(goal, "id", (_find(goal.antecedent, target), j))


def split_conj(goal: Sequent, i: int, count: int, then: Cont) -> ProofNode:
    """Split the right-nested conjunction at antecedent ``i`` into ``count``
    antecedent formulas (the first stays at ``i``, the rest are appended)."""
    if count <= 1:
        return then(goal)
    return step(
        goal, "andL", (i,), then=[lambda g: split_conj(g, len(g.antecedent) - 1, count - 1, then)]
    )


def prop_close(goal: Sequent, j: int = 0) -> ProofNode:
    """Close ``Γ ⊢ Q`` when every conjunct of Q occurs among the flattened
    conjuncts of Γ (no other connectives are analysed)."""
    for k, f in enumerate(goal.antecedent):
        if isinstance(f, And):
            return step(goal, "andL", (k,), then=[lambda g: prop_close(g, j)])
    target = goal.succedent[j]
    if isinstance(target, And) and target not in goal.antecedent:
        return step(goal, "andR", (j,), then=[lambda g: prop_close(g, j), lambda g: prop_close(g, j)])
    return close_by_id(goal, j)


# ---------------------------------------------------------------- tactics


def _box_dap(goal: Sequent, i: int) -> tuple[Dap, Formula]:
    try:
        f = goal.succedent[i]
    except IndexError:
        raise ShapeMismatch(f"no succedent formula at {i}") from None
    if not (isinstance(f, Box) and isinstance(f.program, Dap)):
        raise ShapeMismatch("principal formula is not a box over a differential-algebraic program")
    return f.program, f.body


def _refines_daps(goal: Sequent, i: int) -> tuple[tuple[Var, ...], Formula, Formula]:
    try:
        f = goal.succedent[i]
    except IndexError:
        raise ShapeMismatch(f"no succedent formula at {i}") from None
    if not (isinstance(f, Refines) and isinstance(f.left, Dap) and isinstance(f.right, Dap)):
        raise ShapeMismatch("principal formula is not a refinement between programs {x : F}")
    xs = f.vars
    if f.left.vars != xs or f.right.vars != xs:
        raise ShapeMismatch("refinement variables differ from the programs' variables")
    return xs, f.left.constraint, f.right.constraint


def _mutual_daps(goal: Sequent, i: int) -> tuple[tuple[Var, ...], Formula, Formula]:
    try:
        m = match_mutual(goal.succedent[i])
    except IndexError:
        m = None
    if m is None or not (isinstance(m[0], Dap) and isinstance(m[1], Dap)):
        raise ShapeMismatch("principal formula is not a refinement equivalence")
    a, b, xs = m
    if a.vars != xs or b.vars != xs:
        raise ShapeMismatch("refinement variables differ from the programs' variables")
    return xs, a.constraint, b.constraint


def tac_dw(goal: Sequent, i: int = 0, then: Cont = open_leaf) -> ProofNode:
    """``Γ ⊢ [{x:F}]P`` from ``F ⊢ P``: K, then G on the implication, then dW."""
    a, p = _box_dap(goal, i)
    f = a.constraint
    left = by("G", (i,), then=[by("implyR", (0,), then=[then])])
    right = by("dW", (i,), {"xs": a.vars, "F": f})
    return step(goal, "K", (i,), {"a": a, "P": f, "Q": p}, then=[left, right])


def tac_da(goal: Sequent, r: Formula, i: int = 0, then_fr: Cont = open_leaf, then_rg: Cont = open_leaf) -> ProofNode:
    """``Γ ⊢ {x:F} ≤ {x:G}`` via R: open premises ``F ⊢ R`` and ``Γ ⊢ {x:R} ≤ {x:G}``."""
    xs, f, g = _refines_daps(goal, i)
    d = lambda c: Dap(xs, c)  # noqa: E731
    first = by(
        "TR",
        (i,),
        {"a": d(f), "b": d(And(f, r)), "c": d(r), "xs": xs},
        then=[
            by("DC", (i,), {"xs": xs, "F": f, "R": r}, then=[lambda gl: tac_dw(gl, i, then_fr)]),
            by("DR", (i,), {"xs": xs, "F": r, "R": f}),
        ],
    )
    return step(goal, "TR", (i,), {"a": d(f), "b": d(r), "c": d(g), "xs": xs}, then=[first, then_rg])


def refl(goal: Sequent, i: int = 0) -> ProofNode:
    """``{x:F} ≤ {x:F}``: the first half of dA with R ≡ F, the leaf closed by id."""
    xs, f, g = _refines_daps(goal, i)
    if f != g:
        raise ShapeMismatch("refl needs identical constraints")
    d = lambda c: Dap(xs, c)  # noqa: E731
    return step(
        goal,
        "TR",
        (i,),
        {"a": d(f), "b": d(And(f, f)), "c": d(f), "xs": xs},
        then=[
            by("DC", (i,), {"xs": xs, "F": f, "R": f}, then=[lambda gl: tac_dw(gl, i, lambda h: close_by_id(h))]),
            by("DR", (i,), {"xs": xs, "F": f, "R": f}),
        ],
    )


def refl_mutual(goal: Sequent, i: int = 0) -> ProofNode:
    return step(goal, "andR", (i,), then=[lambda g: refl(g, i), lambda g: refl(g, i)])


def _check_state_terms(es: Sequence[Term], xs: Sequence[Var], ps: Sequence[Var]) -> None:
    from .analysis import free_vars

    for e in es:
        if has_differential(e):
            raise SideCondition("E contains a differential")
        fv = free_vars(e)
        if any(v.primed for v in fv):
            raise SideCondition("E contains a differential variable")
        if not fv <= set(xs) | set(ps):
            raise SideCondition("E mentions variables outside the state and parameters")
    if set(xs) & set(ps):
        raise SideCondition("parameters overlap the state")


def _chain(goal, i, xs, g1, g2, g3, g4, step1: Cont, step2: Cont, step3: Cont) -> ProofNode:
    d = lambda c: Dap(xs, c)  # noqa: E731
    return step(
        goal,
        "TR",
        (i,),
        {"a": d(g1), "b": d(g3), "c": d(g4), "xs": xs},
        then=[by("TR", (i,), {"a": d(g1), "b": d(g2), "c": d(g3), "xs": xs}, then=[step1, step2]), step3],
    )


def _unfold(i: int, q: Formula, then: Cont) -> Cont:
    return by("unfold", (i,), {"Q": q}, then=[then])


def _commuted_da(goal: Sequent, i: int, xs, f: Formula, extra: Formula) -> ProofNode:
    """``{x : F ∧ X} ≤ {x : F}`` by dA with R ≡ X ∧ F, closed by DR."""
    return tac_da(
        goal,
        And(extra, f),
        i,
        then_fr=lambda g: prop_close(g),
        then_rg=by("DR", (i,), {"xs": xs, "F": f, "R": extra}),
    )


def _cut_then_axiom(
    i: int, c: Formula, rule: str, inst: dict, then_init: Cont
) -> Cont:
    """Cut in ``c``; the first premise is trimmed to ``Γ ⊢ c``, the second
    closes by the axiom's rule form followed by id."""

    def run(goal: Sequent) -> ProofNode:
        n = len(goal.succedent)
        return step(
            goal,
            "cut",
            (),
            {"C": c},
            then=[
                lambda g: keep_only_succ(g, n, then_init),
                by(rule, (i,), inst, then=[lambda g: close_by_id(g, i)]),
            ],
        )

    return run


def tac_di(
    goal: Sequent,
    es: Sequence[Term],
    i: int = 0,
    rel: str = "<=",
    ps: Sequence[Var] = (),
    then_init: Cont = open_leaf,
    then_box: Cont = open_leaf,
) -> ProofNode:
    """``Γ ⊢ {x:F} ≈ {x : F ∧ E ⪯ 0}`` from ``Γ ⊢ E ⪯ 0`` and ``Γ ⊢ [{x:F}] (E)′ ≤ 0``.

    With parameters ``ps`` the initial premise also carries ``ps′ = 0``.
    """
    xs, f, fp = _mutual_daps(goal, i)
    es, ps = tuple(es), tuple(ps)
    _check_state_terms(es, xs, ps)
    atoms = [lt(e, ZERO) if rel == "<" else Leq(e, ZERO) for e in es]
    p = conj(atoms)
    if fp != And(f, p):
        raise ShapeMismatch("right-hand system is not F ∧ E ⪯ 0")
    dd = conj([Leq(Differential(e), ZERO) for e in es])
    g1, g2, g3, g4 = f, And(f, dd), And(f, And(p, dd)), And(f, p)
    d = lambda c: Dap(xs, c)  # noqa: E731
    c = conj([eq(v, ZERO) for v in primed(ps)] + atoms)

    step1 = _unfold(
        i, Refines(d(g1), d(g2), xs), by("DC", (i,), {"xs": xs, "F": f, "R": dd}, then=[then_box])
    )
    step2 = _unfold(
        i,
        Refines(d(And(dd, f)), d(And(And(dd, p), f)), xs),
        by(
            "DM",
            (i,),
            {"xs": xs, "F": dd, "G": And(dd, p), "R": f},
            then=[
                by(
                    "DC",
                    (i,),
                    {"xs": xs, "F": dd, "R": p},
                    then=[_cut_then_axiom(i, c, "dI", {"xs": xs, "E": es, "rel": rel, "ps": ps}, then_init)],
                )
            ],
        ),
    )
    step3 = _unfold(
        i, Refines(d(And(dd, g4)), d(g4), xs), by("DR", (i,), {"xs": xs, "F": g4, "R": dd})
    )
    left = lambda g: _chain(g, i, xs, g1, g2, g3, g4, step1, step2, step3)  # noqa: E731
    right = lambda g: _commuted_da(g, i, xs, f, p)  # noqa: E731
    return step(goal, "andR", (i,), then=[left, right])


def tac_di_eq(goal: Sequent, e: Term, i: int = 0, ps: Sequence[Var] = (), then_init=open_leaf, then_box=open_leaf):
    """Equality invariant ``e = 0`` as the two inequalities ``e ≤ 0`` and ``-e ≤ 0``."""
    from .syntax import neg

    return tac_di(goal, (e, neg(e)), i, "<=", ps, then_init, then_box)


def dhc_post(es: Sequence[Term], ps: Sequence[Var] = ()) -> Formula:
    return conj([eq(v, ZERO) for v in primed(ps)] + [eq(Differential(e), ZERO) for e in es])


def tac_dhc(
    goal: Sequent,
    es: Sequence[Term],
    i: int = 0,
    ps: Sequence[Var] = (),
    then_init: Cont = open_leaf,
    then_box: Cont = open_leaf,
) -> ProofNode:
    """``Γ ⊢ {x:F} ≈ {x : F ∧ (E)′ = 0}`` from ``Γ ⊢ (E)′ = 0`` and ``Γ ⊢ [{x:F}] E = 0``."""
    xs, f, fd = _mutual_daps(goal, i)
    es, ps = tuple(es), tuple(ps)
    _check_state_terms(es, xs, ps)
    dd = dhc_post(es, ps)
    if fd != And(f, dd):
        raise ShapeMismatch("right-hand system is not F ∧ (E)' = 0")
    z = vec_eq_zero(es)
    g1, g2, g3, g4 = f, And(f, z), And(f, And(dd, z)), And(f, dd)
    d = lambda c: Dap(xs, c)  # noqa: E731

    step1 = _unfold(i, Refines(d(g1), d(g2), xs), by("DC", (i,), {"xs": xs, "F": f, "R": z}, then=[then_box]))
    step2 = _unfold(
        i,
        Refines(d(And(z, f)), d(And(And(z, dd), f)), xs),
        by(
            "DM",
            (i,),
            {"xs": xs, "F": z, "G": And(z, dd), "R": f},
            then=[
                by(
                    "DC",
                    (i,),
                    {"xs": xs, "F": z, "R": dd},
                    then=[_cut_then_axiom(i, dd, "dHC", {"xs": xs, "E": es, "ps": ps}, then_init)],
                )
            ],
        ),
    )
    step3 = _unfold(i, Refines(d(And(z, g4)), d(g4), xs), by("DR", (i,), {"xs": xs, "F": g4, "R": z}))
    left = lambda g: _chain(g, i, xs, g1, g2, g3, g4, step1, step2, step3)  # noqa: E731
    right = lambda g: _commuted_da(g, i, xs, f, dd)  # noqa: E731
    return step(goal, "andR", (i,), then=[left, right])


# ---------------------------------------------------------------- index reduction


def ir_systems(f0: Formula, chain: Sequence[tuple[Term, Sequence[Var]]]) -> list[Formula]:
    """F₀, F₁, ... with F_{k+1} ≡ F_k ∧ ps′ = 0 ∧ (R_k)′ = 0."""
    out = [f0]
    for r, ps in chain:
        out.append(And(out[-1], dhc_post((r,), ps)))
    return out


def ir_premises(f0: Formula, chain: Sequence[tuple[Term, Sequence[Var]]]) -> tuple[Formula, Formula]:
    """The two open premises of the index-reduction rule."""
    systems = ir_systems(f0, chain)
    init = conj([dhc_post((r,), ps) for r, ps in chain])
    alg = conj([implies(systems[k], eq(r, ZERO)) for k, (r, _) in enumerate(chain)])
    return init, alg


def _pick_conjunct(goal: Sequent, k: int, m: int, j: int = 0) -> ProofNode:
    """``Γ, A₀ ∧ … ∧ A_{m-1} ⊢ A_k`` (the conjunction is the last antecedent)."""
    base = len(goal.antecedent) - 1

    def fin(g: Sequent) -> ProofNode:
        pos = base if k == 0 else base + k
        return step(g, "id", (pos, j))

    return split_conj(goal, base, m, fin)


def _pick_implication(goal: Sequent, k: int, m: int) -> ProofNode:
    """``F_k, ⋀ᵢ(Fᵢ → Rᵢ = 0) ⊢ R_k = 0`` by splitting, MP and id."""
    base = len(goal.antecedent) - 1

    def fin(g: Sequent) -> ProofNode:
        pos = base if k == 0 else base + k
        return step(
            g, "MP", (pos, 0), then=[lambda h: step(h, "id", (len(h.antecedent) - 1, 0))]
        )

    return split_conj(goal, base, m, fin)


def tac_ir(
    goal: Sequent,
    f0: Formula,
    chain: Sequence[tuple[Term, Sequence[Var]]],
    i: int = 0,
    systems: Sequence[Formula] | None = None,
    then_init: Cont = open_leaf,
    then_alg: Cont = open_leaf,
) -> ProofNode:
    """``Γ ⊢ {x:F_m} ≈ {x:F₀}`` from ``Γ ⊢ ⋀ (R_k)′ = 0`` and ``⊢ ⋀ (F_k → R_k = 0)``.

    ``chain`` lists ``(R_k, ps_k)``: the algebraic term and the parameters
    it mentions (frozen by ``ps′ = 0``).  Both open premises are shared by
    every level, so grafting two proofs closes the whole certificate.
    """
    chain = [(r, tuple(ps)) for r, ps in chain]
    built = ir_systems(f0, chain)
    if systems is not None:
        systems = list(systems)
        if len(systems) != len(built):
            raise ChainMismatch(f"expected {len(built)} systems, got {len(systems)}")
        for k, (want, got) in enumerate(zip(built, systems)):
            if want != got:
                raise ChainMismatch(f"system {k} does not match the recorded augmentation")
    xs, fm, f0_goal = _mutual_daps(goal, i)
    if f0_goal != f0 or fm != built[-1]:
        raise ShapeMismatch("goal is not {x:F_m} ≈ {x:F_0} for this chain")
    init, alg = ir_premises(f0, chain)
    return _ir(goal, i, xs, built, chain, init, alg, len(chain), then_init, then_alg)


def _ir(goal, i, xs, systems, chain, init, alg, m, then_init, then_alg) -> ProofNode:
    if m == 0:
        return refl_mutual(goal, i)
    k = m - 1
    total = len(chain)
    r, ps = chain[k]
    d = lambda c: Dap(xs, c)  # noqa: E731
    fk, fk1, f0 = systems[k], systems[k + 1], systems[0]
    m1 = mutual(d(fk1), d(fk), xs)
    m2 = mutual(d(fk), d(f0), xs)

    def init_k(g: Sequent) -> ProofNode:
        # Γ ⊢ C_k from the shared premise Γ ⊢ ⋀ C
        return step(
            g,
            "cut",
            (),
            {"C": init},
            then=[lambda h: keep_only_succ(h, 1, then_init), lambda h: _pick_conjunct(h, k, total)],
        )

    def box_k(g: Sequent) -> ProofNode:
        # Γ ⊢ [{x:F_k}] R_k = 0 by dW, then F_k ⊢ R_k = 0 from the shared premise
        def alg_k(h: Sequent) -> ProofNode:
            return step(
                h,
                "cut",
                (),
                {"C": alg},
                then=[
                    lambda u: keep_only_succ(u, 1, lambda v: clear_ante(v, then_alg)),
                    lambda u: _pick_implication(u, k, total),
                ],
            )

        return tac_dw(g, 0, alg_k)

    def prove_m1(g: Sequent) -> ProofNode:
        return keep_only_succ(
            g,
            len(g.succedent) - 1,
            _unfold(0, mutual(d(fk), d(fk1), xs), lambda h: tac_dhc(h, (r,), 0, ps, init_k, box_k)),
        )

    def prove_m2(g: Sequent) -> ProofNode:
        def trimmed(h: Sequent) -> ProofNode:
            return _ir(h, 0, xs, systems, chain, init, alg, k, then_init, then_alg)

        # drop M1 from the antecedent, keep only M2 on the right
        n = len(g.antecedent)
        return step(
            g, "weakenL", (n - 1,), then=[lambda h: keep_only_succ(h, len(h.succedent) - 1, trimmed)]
        )

    def glue(g: Sequent) -> ProofNode:
        # antecedent: Γ, M1, M2  ->  Γ, a1, a2, b1, b2 after two andL steps
        n = len(g.antecedent)
        ia, ib = n - 2, n - 1

        def after(h: Sequent) -> ProofNode:
            def tr(a, b, c):
                return by(
                    "TR",
                    (i,),
                    {"a": d(a), "b": d(b), "c": d(c), "xs": xs},
                    then=[lambda u: close_by_id(u, i), lambda u: close_by_id(u, i)],
                )

            return step(h, "andR", (i,), then=[tr(fk1, fk, f0), tr(f0, fk, fk1)])

        return step(g, "andL", (ia,), then=[lambda h: step(h, "andL", (ib,), then=[after])])

    return step(
        goal,
        "cut",
        (),
        {"C": m1},
        then=[prove_m1, lambda g: step(g, "cut", (), {"C": m2}, then=[prove_m2, glue])],
    )


# ---------------------------------------------------------------- golden sequences

# Pre-order rule ids of the published derivations, with each derived rule
# expanded through its own derivation (dW = K, G, dW).
GOLDEN_DW = ["K", "G", "dW"]
GOLDEN_DA = ["TR", "TR", "DC", *GOLDEN_DW, "DR"]
GOLDEN_REFL = ["TR", "DC", *GOLDEN_DW, "DR"]


def golden_chain(axiom: str) -> list[str]:
    """The dI / dHC chain G1 → G2 → G3 → G4 followed by the reverse direction."""
    left = ["TR", "TR", "unfold", "DC", "unfold", "DM", "DC", "cut", axiom, "unfold", "DR"]
    right = [*GOLDEN_DA, "DR"]
    return left + right


GOLDEN_DI = golden_chain("dI")
GOLDEN_DHC = golden_chain("dHC")


def golden_ir(m: int) -> list[str]:
    if m == 0:
        return GOLDEN_REFL * 2
    dhc = golden_chain("dHC")
    # the initial premise of dHC is closed from the shared premise by a cut;
    # the box premise by dW and a cut on the shared algebraic premise
    cut_at = dhc.index("dHC")
    dhc = dhc[: cut_at] + ["cut"] + dhc[cut_at:]
    box_at = dhc.index("DC") + 1
    dhc = dhc[:box_at] + ["K", "G", "cut", "dW"] + dhc[box_at:]
    return ["cut", "unfold", *dhc, "cut", *golden_ir(m - 1), "TR", "TR"]
