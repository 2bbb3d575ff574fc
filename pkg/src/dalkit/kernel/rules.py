"""Rule application: from a goal, a rule, a position and an instantiation to
the list of premises.  This is the single premise-shape function used by the
checker and (untrusted) by the tactics.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from ..analysis import (
    CaptureError,
    DifferentialCapture,
    UnsupportedSubstitution,
    ac_equivalent,
    free_vars,
    is_first_order,
    same_up_to_constants,
    substitute_formula,
)
from ..syntax import And, Box, Forall, Formula, Not, Sequent, Term, Var, match_exists, match_implies
from .axioms import AXIOMS, KindMismatch, kind_ok

LEAF_RULES = frozenset({"id", "real", "open"})

# payload kinds of the structural rules, and which keys are optional
STRUCTURAL: dict[str, dict[str, str]] = {
    "id": {},
    "real": {},
    "open": {},
    "cut": {"C": "formula"},
    "weakenL": {},
    "weakenR": {},
    "andR": {},
    "andL": {},
    "notR": {},
    "notL": {},
    "implyR": {},
    "orR": {},
    "MP": {},
    "allR": {"y": "uvar"},
    "existsL": {"y": "uvar"},
    "allL": {"t": "term"},
    "existsR": {"t": "term"},
    "G": {},
    "unfold": {"Q": "formula"},
    "unfoldL": {"Q": "formula"},
}
OPTIONAL = {"allR": {"y"}, "existsL": {"y"}, "allL": {"t"}, "existsR": {"t"}}
# number of indices each rule's position selector takes
ARITY = {"id": 2, "MP": 2, "cut": 0, "real": 0, "open": 0}

# rules whose principal formula sits in the antecedent
ANTECEDENT_RULES = frozenset({"weakenL", "andL", "notL", "existsL", "allL", "unfoldL"})


class RuleError(Exception):
    """``kind`` is one of mismatch, side-condition, unknown-rule, kind."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def is_axiom(rule: str) -> bool:
    return rule in AXIOMS


def known_rule(rule: str) -> bool:
    return rule in AXIOMS or rule in STRUCTURAL


def rule_arity(rule: str) -> int:
    return ARITY.get(rule, 1)


def same(a, b) -> bool:
    return same_up_to_constants(a, b)


def _replace(xs: Sequence, i: int, *items) -> tuple:
    return tuple(xs[:i]) + tuple(items) + tuple(xs[i + 1 :])


def _drop(xs: Sequence, i: int) -> tuple:
    return tuple(xs[:i]) + tuple(xs[i + 1 :])


def _pick(xs: Sequence, i: int, side: str):
    if not isinstance(i, int) or not 0 <= i < len(xs):
        raise RuleError("mismatch", f"position {i} out of range in {side}")
    return xs[i]


def _check_inst(rule: str, inst: Mapping) -> None:
    kinds = STRUCTURAL[rule]
    unknown = set(inst) - set(kinds)
    if unknown:
        raise RuleError("kind", f"{rule}: unexpected payloads {sorted(unknown)}")
    for k, kind in kinds.items():
        if k not in inst:
            if k in OPTIONAL.get(rule, ()):
                continue
            raise RuleError("kind", f"{rule}: missing payload {k}")
        if not kind_ok(kind, inst[k]):
            raise RuleError("kind", f"{rule}: payload {k} is not a {kind}")


def _instance(p: Formula, x: Var, t: Term) -> Formula:
    if t == x:
        return p
    if not is_first_order(p):
        raise RuleError("side-condition", "instantiation only substitutes into first-order bodies")
    try:
        return substitute_formula(p, x, t)
    except (CaptureError, DifferentialCapture, UnsupportedSubstitution) as exc:
        raise RuleError("side-condition", str(exc)) from None


def apply_rule(goal: Sequent, rule: str, at: Sequence[int] = (), inst: Mapping | None = None) -> list[Sequent]:
    """Premises of ``rule`` applied to ``goal``.  Leaf rules return [] (the
    real leaf still needs the oracle; the checker handles that)."""
    inst = dict(inst or {})
    at = tuple(at)
    gam, delta = goal.antecedent, goal.succedent
    if rule in AXIOMS:
        return _apply_axiom(goal, rule, at, inst)
    if rule not in STRUCTURAL:
        raise RuleError("unknown-rule", f"unknown rule {rule!r}")
    _check_inst(rule, inst)
    want = rule_arity(rule)
    if len(at) != want:
        raise RuleError("mismatch", f"{rule} takes {want} position index(es), got {len(at)}")

    match rule:
        case "id":
            i, j = at
            if not same(_pick(gam, i, "antecedent"), _pick(delta, j, "succedent")):
                raise RuleError("mismatch", "id: formulas differ")
            return []
        case "real" | "open":
            return []
        case "cut":
            c = inst["C"]
            return [Sequent(gam, delta + (c,)), Sequent(gam + (c,), delta)]
        case "weakenL":
            _pick(gam, at[0], "antecedent")
            return [Sequent(_drop(gam, at[0]), delta)]
        case "weakenR":
            _pick(delta, at[0], "succedent")
            return [Sequent(gam, _drop(delta, at[0]))]
        case "andR":
            f = _pick(delta, at[0], "succedent")
            if not isinstance(f, And):
                raise RuleError("mismatch", "andR: not a conjunction")
            return [
                Sequent(gam, _replace(delta, at[0], f.left)),
                Sequent(gam, _replace(delta, at[0], f.right)),
            ]
        case "andL":
            f = _pick(gam, at[0], "antecedent")
            if not isinstance(f, And):
                raise RuleError("mismatch", "andL: not a conjunction")
            return [Sequent(_replace(gam, at[0], f.left) + (f.right,), delta)]
        case "notR":
            f = _pick(delta, at[0], "succedent")
            if not isinstance(f, Not):
                raise RuleError("mismatch", "notR: not a negation")
            return [Sequent(gam + (f.arg,), _drop(delta, at[0]))]
        case "notL":
            f = _pick(gam, at[0], "antecedent")
            if not isinstance(f, Not):
                raise RuleError("mismatch", "notL: not a negation")
            return [Sequent(_drop(gam, at[0]), delta + (f.arg,))]
        case "implyR":
            m = match_implies(_pick(delta, at[0], "succedent"))
            if m is None:
                raise RuleError("mismatch", "implyR: not an implication")
            p, q = m
            return [Sequent(gam + (p,), _replace(delta, at[0], q))]
        case "orR":
            f = _pick(delta, at[0], "succedent")
            if not (
                isinstance(f, Not)
                and isinstance(f.arg, And)
                and isinstance(f.arg.left, Not)
                and isinstance(f.arg.right, Not)
            ):
                raise RuleError("mismatch", "orR: not a disjunction")
            return [Sequent(gam, _replace(delta, at[0], f.arg.left.arg) + (f.arg.right.arg,))]
        case "MP":
            i, j = at
            m = match_implies(_pick(gam, i, "antecedent"))
            if m is None or not same(m[0], _pick(gam, j, "antecedent")):
                raise RuleError("mismatch", "MP: antecedent formulas do not match")
            return [Sequent(gam + (m[1],), delta)]
        case "allR":
            f = _pick(delta, at[0], "succedent")
            if not isinstance(f, Forall):
                raise RuleError("mismatch", "allR: not a universal formula")
            y = inst.get("y", f.var)
            if f.var.primed and y != f.var:
                raise RuleError("side-condition", "allR: differential variables are not renamed")
            if y in free_vars(goal):
                raise RuleError("side-condition", f"allR: {y} is not fresh")
            return [Sequent(gam, _replace(delta, at[0], _instance(f.body, f.var, y)))]
        case "existsL":
            m = match_exists(_pick(gam, at[0], "antecedent"))
            if m is None:
                raise RuleError("mismatch", "existsL: not an existential formula")
            x, p = m
            y = inst.get("y", x)
            if x.primed and y != x:
                raise RuleError("side-condition", "existsL: differential variables are not renamed")
            if y in free_vars(goal):
                raise RuleError("side-condition", f"existsL: {y} is not fresh")
            return [Sequent(_replace(gam, at[0], _instance(p, x, y)), delta)]
        case "allL":
            f = _pick(gam, at[0], "antecedent")
            if not isinstance(f, Forall):
                raise RuleError("mismatch", "allL: not a universal formula")
            t = inst.get("t", f.var)
            return [Sequent(gam + (_instance(f.body, f.var, t),), delta)]
        case "existsR":
            m = match_exists(_pick(delta, at[0], "succedent"))
            if m is None:
                raise RuleError("mismatch", "existsR: not an existential formula")
            x, p = m
            t = inst.get("t", x)
            return [Sequent(gam, _replace(delta, at[0], _instance(p, x, t)))]
        case "G":
            f = _pick(delta, at[0], "succedent")
            if not isinstance(f, Box):
                raise RuleError("mismatch", "G: not a box formula")
            return [Sequent((), (f.body,))]
        case "unfold":
            f = _pick(delta, at[0], "succedent")
            q = inst["Q"]
            if not ac_equivalent(f, q):
                raise RuleError("mismatch", "unfold: formulas are not equal up to conjunction reordering")
            return [Sequent(gam, _replace(delta, at[0], q))]
        case "unfoldL":
            f = _pick(gam, at[0], "antecedent")
            q = inst["Q"]
            if not ac_equivalent(f, q):
                raise RuleError("mismatch", "unfoldL: formulas are not equal up to conjunction reordering")
            return [Sequent(_replace(gam, at[0], q), delta)]
    raise RuleError("unknown-rule", rule)  # pragma: no cover


def _apply_axiom(goal: Sequent, rule: str, at, inst) -> list[Sequent]:
    schema = AXIOMS[rule]
    if len(at) != 1:
        raise RuleError("mismatch", f"{rule} takes one succedent position")
    target = _pick(goal.succedent, at[0], "succedent")
    try:
        full = schema.complete(inst)
    except KindMismatch as exc:
        raise RuleError("kind", str(exc)) from None
    hyps, concl = schema.build(full)
    violations = schema.side(full)
    if violations:
        raise RuleError("side-condition", f"{rule}: " + ", ".join(violations))
    if same(target, schema.formula(full)):
        return []
    if same(target, concl):
        return [Sequent(goal.antecedent, _replace(goal.succedent, at[0], h)) for h in hyps]
    raise RuleError("mismatch", f"{rule}: goal does not match the axiom instance or its conclusion")
