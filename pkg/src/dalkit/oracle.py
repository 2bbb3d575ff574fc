"""Real-arithmetic leaf discharge behind an explicit trust boundary.

A query is a sequent of first-order polynomial formulas.  It is valid when
the conjunction of its antecedent and the negated succedent is unsatisfiable.
That conjunction is split into clauses of sign constraints, and each clause
is refuted by exact ideal reasoning:

* the equations of the clause generate an ideal I; 1 in I refutes;
* a constraint ``p <= 0`` (or ``p < 0``) with ``p * s^2 = c (mod I)`` for a
  constant c > 0 (or c >= 0 with s = 1) refutes, s ranging over monomials of
  degree <= 2;
* two constraints with a positive combination congruent to a constant of the
  wrong sign refute;
* strict constraints are nonzero, so adding ``p_i * t_i - 1`` for each of
  them (the Rabinowitsch trick) and finding 1 in the ideal refutes.

All of these are certificates checkable by polynomial arithmetic, so they
carry the ``ideal-membership`` tier.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .analysis import all_vars, free_vars, has_differential, has_modality
from .calculus import eval_term
from .groebner import Budget, ResourceLimit, groebner_basis, reduce_full
from .polynomial import Poly, Ring, default_ring, from_term
from .syntax import (
    And,
    Const,
    Forall,
    Formula,
    Leq,
    Not,
    Plus,
    Sequent,
    Term,
    Times,
    Var,
    match_eq,
)

MAX_CLAUSES = 512


@dataclass(frozen=True)
class OracleConfig:
    mode: str = "general"  # or "equational"
    samples: int = 64
    seed: int = 0
    newton_max_iters: int = 25
    newton_tol: float = 1e-10
    budget: Budget = field(default_factory=Budget)
    external: str | None = None  # "z3" enables the external tier


@dataclass(frozen=True)
class Verdict:
    kind: str  # valid | falsified | unknown
    method: str | None = None  # ideal-membership | external | assumed
    counterexample: dict | None = None
    detail: str = ""

    @property
    def valid(self) -> bool:
        return self.kind == "valid"

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.method:
            out["method"] = self.method
        if self.counterexample is not None:
            out["counterexample"] = {str(k): str(v) for k, v in sorted(self.counterexample.items())}
        if self.detail:
            out["detail"] = self.detail
        return out


class NotArithmetic(ValueError):
    pass


# ---------------------------------------------------------------- clauses


@dataclass(frozen=True)
class Lit:
    """``term <= 0`` or, when strict, ``term < 0``."""

    term: Term
    strict: bool


def _diff(a: Term, b: Term) -> Term:
    return Plus(a, Times(Const(-1), b))


class _Fresh:
    def __init__(self, avoid):
        self.names = {v.name for v in avoid}
        self.n = 0

    def __call__(self, base: str) -> Var:
        while True:
            self.n += 1
            name = f"{base}_sk{self.n}"
            if name not in self.names:
                self.names.add(name)
                return Var(name)


def _rename(f: Formula, x: Var, y: Var) -> Formula:
    from .analysis import substitute_formula

    return substitute_formula(f, x, y)


def _dnf(f: Formula, positive: bool, fresh: _Fresh) -> list[list[Lit]] | None:
    """Clauses (lists of literals) whose disjunction is implied-equivalent to
    ``f`` (or its negation).  Positive universal quantifiers are dropped,
    which only weakens the refutation problem; negative ones get fresh
    variables."""
    match f:
        case Leq(left=a, right=b):
            if positive:
                return [[Lit(_diff(a, b), False)]]
            return [[Lit(_diff(b, a), True)]]
        case Not(arg=p):
            return _dnf(p, not positive, fresh)
        case And(left=p, right=q):
            lp = _dnf(p, positive, fresh)
            lq = _dnf(q, positive, fresh)
            if lp is None or lq is None:
                return None
            if positive:
                out = [a + b for a in lp for b in lq]
                return out if len(out) <= MAX_CLAUSES else None
            return lp + lq
        case Forall(var=x, body=p):
            if positive:
                return [[]]
            y = fresh(x.name)
            return _dnf(_rename(p, x, y), positive, fresh)
    raise NotArithmetic(f"not an arithmetic formula: {type(f).__name__}")


def refutation_clauses(seq: Sequent) -> list[list[Lit]] | None:
    fresh = _Fresh(all_vars(seq))
    clauses: list[list[Lit]] = [[]]
    parts = [(f, True) for f in seq.antecedent] + [(f, False) for f in seq.succedent]
    for f, pos in parts:
        d = _dnf(f, pos, fresh)
        if d is None:
            return None
        clauses = [c + e for c in clauses for e in d]
        if len(clauses) > MAX_CLAUSES:
            return None
    return clauses


def check_query(seq: Sequent) -> None:
    for f in seq.antecedent + seq.succedent:
        if has_modality(f):
            raise NotArithmetic("modal formula in arithmetic query")
        if has_differential(f):
            raise NotArithmetic("unexpanded differential in arithmetic query")


# ---------------------------------------------------------------- refutation


def _clause_polys(clause: Sequence[Lit], ring: Ring):
    polys = [(from_term(l.term, ring), l.strict) for l in clause]
    eqs: list[Poly] = []
    nonstrict = [p for p, s in polys if not s]
    for i, p in enumerate(nonstrict):
        if not p:
            continue
        for q in nonstrict[i + 1 :]:
            if (p + q).is_zero():
                eqs.append(p)
    return polys, eqs


def _monomials_upto(ring: Ring, used: Sequence[int], deg: int):
    n = ring.nvars
    yield (0,) * n
    for d in range(1, deg + 1):
        for combo in itertools.combinations_with_replacement(used, d):
            m = [0] * n
            for i in combo:
                m[i] += 1
            yield tuple(m)


def refute_clause(clause: Sequence[Lit], ring: Ring, cfg: OracleConfig) -> str | None:
    """Return a description of the refutation, or None."""
    polys, eqs = _clause_polys(clause, ring)
    gb = groebner_basis(eqs, cfg.budget) if eqs else []
    if gb and gb[0].is_const():
        return "equations inconsistent"
    nfs = [(reduce_full(p, gb), s) for p, s in polys]
    for nf, strict in nfs:
        c = nf.const_value()
        if c is not None and (c > 0 or (strict and c == 0)):
            return "constraint reduces to a constant of the wrong sign"
    if cfg.mode == "equational":
        return None
    used = sorted({i for p, _ in polys for m in p.terms for i, e in enumerate(m) if e} | {
        i for g in gb for m in g.terms for i, e in enumerate(m) if e
    })
    squares = [m for m in _monomials_upto(ring, used, 2) if any(m)]
    for nf, _strict in nfs:
        if nf.is_const():
            continue
        for m in squares:
            sq = tuple(2 * e for e in m)
            r = reduce_full(nf.mul_term(sq, Fraction(1)), gb)
            c = r.const_value()
            if c is not None and c > 0:
                return "square multiple reduces to a positive constant"
    for (a, sa), (b, sb) in itertools.combinations(nfs, 2):
        if a.is_const() or b.is_const() or a.lm != b.lm:
            continue
        mu = -b.lc / a.lc
        if mu <= 0:
            continue
        r = reduce_full(a * mu + b, gb)
        c = r.const_value()
        if c is not None and (c > 0 or (c == 0 and (sa or sb))):
            return "positive combination reduces to a constant of the wrong sign"
    strict = [p for p, s in nfs if s and not p.is_const()]
    if strict:
        tags = [Var(f"rabinowitsch_{i}") for i in range(len(strict))]
        big = Ring(tuple(ring.vars) + tuple(tags), "grevlex")
        gens = [g.to_ring(big) for g in gb]
        for p, t in zip(strict, tags):
            gens.append(p.to_ring(big) * big.var(t) - 1)
        gb2 = groebner_basis(gens, cfg.budget)
        if gb2 and gb2[0].is_const():
            return "strict constraints vanish on the variety"
    return None


# ---------------------------------------------------------------- falsifier


def _holds(f: Formula, s, eps) -> bool:
    """Lenient truth: atoms hold with slack ``eps``; negation flips slack."""
    match f:
        case Leq(left=a, right=b):
            return eval_term(_diff(a, b), s) <= eps
        case Not(arg=p):
            return not _holds(p, s, -eps)
        case And(left=p, right=q):
            return _holds(p, s, eps) and _holds(q, s, eps)
    raise NotArithmetic("quantified formula in falsifier")


def is_counterexample(seq: Sequent, s, eps=0) -> bool:
    return all(_holds(h, s, eps) for h in seq.antecedent) and not any(
        _holds(g, s, eps) for g in seq.succedent
    )


def _quantifier_free(f: Formula) -> bool:
    if isinstance(f, Forall):
        return False
    from .analysis import children

    return all(_quantifier_free(c) for c in children(f) if isinstance(c, Formula))


def _newton_project(eqs: list[Poly], ring: Ring, x0, cfg: OracleConfig):
    import numpy as np

    if not eqs:
        return x0
    grads = [[p.diff(v) for v in ring.vars] for p in eqs]
    x = np.array(x0, dtype=float)
    for _ in range(cfg.newton_max_iters):
        env = dict(zip(ring.vars, map(float, x)))
        f = np.array([float(p.eval(env)) for p in eqs])
        if np.max(np.abs(f)) < cfg.newton_tol:
            return x
        jac = np.array([[float(g.eval(env)) for g in row] for row in grads])
        step, *_ = np.linalg.lstsq(jac, f, rcond=None)
        x = x - step
        if not np.all(np.isfinite(x)):
            return None
    env = dict(zip(ring.vars, map(float, x)))
    if max(abs(float(p.eval(env))) for p in eqs) < cfg.newton_tol:
        return x
    return None


def falsify(seq: Sequent, clauses, ring: Ring, cfg: OracleConfig) -> dict | None:
    if not all(_quantifier_free(f) for f in seq.antecedent + seq.succedent):
        return None
    fv = sorted(free_vars(seq))
    rng = random.Random(cfg.seed)
    zero = {v: Fraction(0) for v in fv}
    if is_counterexample(seq, zero):
        return zero
    has_eqs = any(_clause_polys(c, ring)[1] for c in clauses)
    for _ in range(cfg.samples):
        if not has_eqs:
            s = {v: Fraction(rng.randint(-12, 12), rng.randint(1, 4)) for v in fv}
            if is_counterexample(seq, s):
                return s
            continue
        for c in clauses:
            _, eqs = _clause_polys(c, ring)
            x0 = [rng.uniform(-2, 2) for _ in ring.vars]
            x = _newton_project(eqs, ring, x0, cfg)
            if x is None:
                continue
            s = {v: float(x[i]) for i, v in enumerate(ring.vars) if v in set(fv)}
            for v in fv:
                s.setdefault(v, 0.0)
            if is_counterexample(seq, s, eps=1e-7):
                return s
    return None


# ---------------------------------------------------------------- external


def _z3_check(seq: Sequent) -> str | None:
    try:
        import z3
    except ImportError:
        return None
    solver = z3.Solver()
    solver.set("timeout", 5000)
    solver.from_string(export_smt(seq))
    res = solver.check()
    if res == z3.unsat:
        return "unsat"
    if res == z3.sat:
        return "sat"
    return None


# ---------------------------------------------------------------- entry point


def discharge(seq: Sequent, cfg: OracleConfig = OracleConfig()) -> Verdict:
    try:
        check_query(seq)
    except NotArithmetic as exc:
        return Verdict("unknown", detail=str(exc))
    if cfg.mode == "equational":
        seq = _equational_view(seq)
        if seq is None:
            return Verdict("unknown", detail="equational mode needs an equational goal")
    try:
        clauses = refutation_clauses(seq)
    except NotArithmetic as exc:
        return Verdict("unknown", detail=str(exc))
    if clauses is None:
        return Verdict("unknown", detail="case split too large")
    ring = default_ring(all_vars(seq) | {v for c in clauses for l in c for v in free_vars(l.term)})
    open_clauses = []
    try:
        for c in clauses:
            if refute_clause(c, ring, cfg) is None:
                open_clauses.append(c)
    except ResourceLimit as exc:
        return Verdict("unknown", detail=str(exc))
    if not open_clauses:
        return Verdict("valid", "ideal-membership")
    cex = falsify(seq, open_clauses, ring, cfg)
    if cex is not None:
        return Verdict("falsified", counterexample=cex)
    if cfg.external == "z3":
        res = _z3_check(seq)
        if res == "unsat":
            return Verdict("valid", "external", detail="z3")
    return Verdict("unknown", detail=f"{len(open_clauses)} clause(s) not refuted")


def _is_equational(f: Formula) -> bool:
    if match_eq(f) is not None:
        return True
    if isinstance(f, And):
        return _is_equational(f.left) and _is_equational(f.right)
    return False


def _equational_view(seq: Sequent) -> Sequent | None:
    if not all(_is_equational(g) for g in seq.succedent):
        return None
    return Sequent(tuple(h for h in seq.antecedent if _is_equational(h)), seq.succedent)


# ---------------------------------------------------------------- SMT-LIB


def _smt_var(v: Var) -> str:
    return ("vp_" if v.primed else "v_") + v.name


def _smt_const(c: Fraction) -> str:
    body = str(abs(c.numerator)) + ".0" if c.denominator == 1 else f"(/ {abs(c.numerator)}.0 {c.denominator}.0)"
    return f"(- {body})" if c < 0 else body


def smt_term(e: Term) -> str:
    match e:
        case Const(value=c):
            return _smt_const(c)
        case Var():
            return _smt_var(e)
        case Plus(left=a, right=b):
            return f"(+ {smt_term(a)} {smt_term(b)})"
        case Times(left=a, right=b):
            return f"(* {smt_term(a)} {smt_term(b)})"
    raise NotArithmetic("differential in SMT export")


def smt_formula(f: Formula) -> str:
    match f:
        case Leq(left=a, right=b):
            return f"(<= {smt_term(a)} {smt_term(b)})"
        case Not(arg=p):
            return f"(not {smt_formula(p)})"
        case And(left=p, right=q):
            return f"(and {smt_formula(p)} {smt_formula(q)})"
        case Forall(var=x, body=p):
            return f"(forall (({_smt_var(x)} Real)) {smt_formula(p)})"
    raise NotArithmetic(f"cannot export {type(f).__name__}")


def export_smt(seq: Sequent) -> str:
    """SMT-LIB2 script asserting the hypotheses and the negated goal."""
    check_query(seq)
    if not seq.antecedent and not seq.succedent:
        return "(check-sat)\n"
    lines = ["(set-logic NRA)"]
    for v in sorted(free_vars(seq)):
        lines.append(f"(declare-fun {_smt_var(v)} () Real)")
    for h in seq.antecedent:
        lines.append(f"(assert {smt_formula(h)})")
    if seq.succedent:
        goals = [smt_formula(g) for g in seq.succedent]
        disj = goals[0] if len(goals) == 1 else "(or " + " ".join(goals) + ")"
        lines.append(f"(assert (not {disj}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
