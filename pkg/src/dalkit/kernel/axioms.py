"""Axiom schemas of the calculus with their syntactic side conditions.

Every schema is presented as a list of hypotheses and a conclusion; the
instance formula is ``hyps -> conclusion`` (curried for K).  Instantiation
never consults side conditions; ``side_conditions`` reports violations as
data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

from ..analysis import bound_vars, free_vars, has_differential
from ..calculus import determinant, jacobian, mat_shape
from ..syntax import (
    ZERO,
    And,
    Box,
    Const,
    Dap,
    Differential,
    Formula,
    Forall,
    Leq,
    Plus,
    Program,
    Refines,
    Term,
    Times,
    Var,
    conj,
    eq,
    exists,
    implies,
    lt,
    mat_vec,
    neq,
    primed,
    vec_eq_zero,
    vec_leq_zero,
)

KINDS = ("term", "terms", "matrix", "formula", "program", "vars", "var", "uvar", "rel")


class UnknownAxiom(KeyError):
    pass


class KindMismatch(TypeError):
    pass


def kind_ok(kind: str, value) -> bool:
    match kind:
        case "term":
            return isinstance(value, Term)
        case "terms":
            return isinstance(value, tuple) and all(isinstance(t, Term) for t in value)
        case "matrix":
            return (
                isinstance(value, tuple)
                and all(isinstance(r, tuple) and all(isinstance(t, Term) for t in r) for r in value)
            )
        case "formula":
            return isinstance(value, Formula)
        case "program":
            return isinstance(value, Program)
        case "vars":
            return (
                isinstance(value, tuple)
                and all(isinstance(v, Var) and not v.primed for v in value)
                and len(set(value)) == len(value)
            )
        case "var":
            return isinstance(value, Var)
        case "uvar":
            return isinstance(value, Var) and not value.primed
        case "rel":
            return value in ("<=", "<")
    raise ValueError(f"unknown payload kind {kind!r}")


@dataclass(frozen=True)
class Schema:
    name: str
    kinds: Mapping[str, str]
    build: Callable[[Mapping], tuple[list[Formula], Formula]]
    side: Callable[[Mapping], list[str]]
    defaults: Mapping[str, object] = None
    curried: bool = False

    def complete(self, inst: Mapping) -> dict:
        full = dict(self.defaults or {})
        full.update(inst)
        unknown = set(full) - set(self.kinds)
        if unknown:
            raise KindMismatch(f"{self.name}: unexpected metavariables {sorted(unknown)}")
        missing = set(self.kinds) - set(full)
        if missing:
            raise KindMismatch(f"{self.name}: missing metavariables {sorted(missing)}")
        for k, kind in self.kinds.items():
            if not kind_ok(kind, full[k]):
                raise KindMismatch(f"{self.name}: payload {k} is not a {kind}")
        return full

    def parts(self, inst: Mapping) -> tuple[list[Formula], Formula]:
        return self.build(self.complete(inst))

    def formula(self, inst: Mapping) -> Formula:
        hyps, concl = self.parts(inst)
        if not hyps:
            return concl
        if self.curried:
            out = concl
            for h in reversed(hyps):
                out = implies(h, out)
            return out
        return implies(conj(hyps), concl)


# ---------------------------------------------------------------- helpers


def _dap(xs, f) -> Dap:
    return Dap(tuple(xs), f)


def _diff_eqs(es) -> Formula:
    return conj([eq(Differential(e), ZERO) for e in es])


def _diff_leq(es) -> Formula:
    return vec_leq_zero([Differential(e) for e in es])


def params_frozen(ps) -> list[Formula]:
    return [eq(p.prime(), ZERO) for p in ps]


def forall_prefix(vs, body: Formula) -> Formula:
    for v in reversed(tuple(vs)):
        body = Forall(v, body)
    return body


def exists_prefix(vs, body: Formula) -> Formula:
    for v in reversed(tuple(vs)):
        body = exists(v, body)
    return body


def _fv_all(*nodes) -> frozenset:
    out = frozenset()
    for n in nodes:
        if isinstance(n, tuple):
            for m in n:
                out |= _fv_all(m)
        else:
            out |= free_vars(n)
    return out


def _ghost_vars(zs) -> frozenset:
    return frozenset(zs) | frozenset(primed(zs))


def _pure_state_term_checks(es, xs, ps=()) -> list[str]:
    out = []
    for e in es:
        if has_differential(e):
            out.append("DifferentialInE")
        fv = free_vars(e)
        if any(v.primed for v in fv):
            out.append("PrimedInE")
        if not {v for v in fv if not v.primed} <= set(xs) | set(ps):
            out.append("FreeVarNotCovered")
    if set(ps) & set(xs):
        out.append("ParamsOverlapState")
    return sorted(set(out))


# ---------------------------------------------------------------- schemas


def _no_side(_inst) -> list[str]:
    return []


def _diff_var(i):
    x = i["x"]
    return [], eq(Differential(x), x.prime())


def _diff_const(i):
    return [], eq(Differential(i["c"]), ZERO)


def _diff_const_side(i):
    return [] if isinstance(i["c"], Const) else ["NotConstant"]


def _diff_plus(i):
    e, g = i["e"], i["g"]
    return [], eq(Differential(e + g), Differential(e) + Differential(g))


def _diff_mul(i):
    e, g = i["e"], i["g"]
    return [], eq(Differential(Times(e, g)), Plus(Times(Differential(e), g), Times(e, Differential(g))))


def _jacobian(i):
    es, xs = i["E"], i["xs"]
    jac = jacobian(es, xs)
    rhs = mat_vec(jac, primed(xs))
    return [], conj([eq(Differential(e), r) for e, r in zip(es, rhs)])


def _jacobian_side(i):
    return _pure_state_term_checks(i["E"], i["xs"])


def _r(i):
    a, b, xs, p = i["a"], i["b"], i["xs"], i["P"]
    return [Refines(a, b, xs), Box(b, p)], Box(a, p)


def _r_side(i):
    a, b, xs, p = i["a"], i["b"], i["xs"], i["P"]
    allowed_bound = set(xs) | set(primed(xs))
    clash = (free_vars(p) & (bound_vars(a) | bound_vars(b))) - allowed_bound
    return ["FreeVarsBoundByPrograms"] if clash else []


def _tr(i):
    a, b, c, xs = i["a"], i["b"], i["c"], i["xs"]
    return [Refines(a, b, xs), Refines(b, c, xs)], Refines(a, c, xs)


def _dw(i):
    return [], Box(_dap(i["xs"], i["F"]), i["F"])


def _prec_atoms(es, strict: bool) -> list[Formula]:
    return [lt(e, ZERO) if strict else Leq(e, ZERO) for e in es]


def _di(i):
    xs, es, rel, ps = i["xs"], i["E"], i["rel"], i["ps"]
    atoms = _prec_atoms(es, rel == "<")
    return [conj(params_frozen(ps) + atoms)], Box(_dap(xs, _diff_leq(es)), conj(atoms))


def _di_side(i):
    return _pure_state_term_checks(i["E"], i["xs"], i["ps"])


def _dhc_post(es, ps) -> Formula:
    return conj(params_frozen(ps) + [eq(Differential(e), ZERO) for e in es])


def _dhc(i):
    xs, es, ps = i["xs"], i["E"], i["ps"]
    post = _dhc_post(es, ps)
    return [post], Box(_dap(xs, vec_eq_zero(es)), post)


def _dc(i):
    xs, f, r = i["xs"], i["F"], i["R"]
    return [Box(_dap(xs, f), r)], Refines(_dap(xs, f), _dap(xs, And(f, r)), xs)


def _dr(i):
    xs, zs, f, r = i["xs"], i["zs"], i["F"], i["R"]
    body = Refines(_dap(tuple(xs) + tuple(zs), And(r, f)), _dap(xs, f), xs)
    return [], forall_prefix(tuple(zs) + primed(zs), body)


def _dr_side(i):
    xs, zs, f = i["xs"], i["zs"], i["F"]
    out = []
    if _ghost_vars(zs) & free_vars(f):
        out.append("GhostNotFresh")
    if set(zs) & set(xs):
        out.append("GhostOverlapsState")
    return out


def _dm(i):
    xs, f, g, r = i["xs"], i["F"], i["G"], i["R"]
    return (
        [Refines(_dap(xs, f), _dap(xs, g), xs)],
        Refines(_dap(xs, And(f, r)), _dap(xs, And(g, r)), xs),
    )


def _dg(i):
    xs, zs, f, a, b, c = i["xs"], i["zs"], i["F"], i["A"], i["B"], i["C"]
    lhs = mat_vec(a, primed(zs))
    rhs = [Plus(bz, ci) for bz, ci in zip(mat_vec(b, zs), c)]
    ode = conj([eq(l, r) for l, r in zip(lhs, rhs)])
    body = Refines(_dap(xs, f), _dap(tuple(xs) + tuple(zs), And(f, ode)), xs)
    hyp = Box(_dap(xs, f), neq(determinant(a), ZERO))
    return [hyp], forall_prefix(zs, exists_prefix(primed(zs), body))


def _dg_side(i):
    xs, zs, f, a, b, c = i["xs"], i["zs"], i["F"], i["A"], i["B"], i["C"]
    out = []
    k = len(zs)
    try:
        ra, ca = mat_shape(a)
        rb, cb = mat_shape(b)
    except ValueError:
        return ["ShapeMismatch"]
    if k == 0 or (ra, ca) != (k, k) or (rb, cb) != (k, k) or len(c) != k:
        out.append("ShapeMismatch")
    if _ghost_vars(zs) & (free_vars(f) | _fv_all(a, b, c)):
        out.append("GhostNotFresh")
    if set(zs) & set(xs):
        out.append("GhostOverlapsState")
    if any(has_differential(t) for row in a + b for t in row) or any(has_differential(t) for t in c):
        out.append("DifferentialInCoefficients")
    return out


def _ag(i):
    xs, zs, f, es, g = i["xs"], i["zs"], i["F"], i["E"], i["G"]
    jac = jacobian(es, primed(xs))
    hyp = Box(_dap(xs, f), And(vec_eq_zero(es), neq(determinant(jac), ZERO)))
    body = Refines(
        _dap(xs, f),
        _dap(tuple(xs) + tuple(zs), And(f, conj([eq(z, gz) for z, gz in zip(zs, g)]))),
        xs,
    )
    return [hyp], exists_prefix(tuple(zs) + primed(zs), body)


def _ag_side(i):
    xs, zs, f, es, g = i["xs"], i["zs"], i["F"], i["E"], i["G"]
    out = []
    if len(es) != len(xs) or len(g) != len(zs) or not zs:
        out.append("ShapeMismatch")
    if _ghost_vars(zs) & (free_vars(f) | _fv_all(es, g)):
        out.append("GhostNotFresh")
    if set(zs) & set(xs):
        out.append("GhostOverlapsState")
    if any(has_differential(t) for t in es + g):
        out.append("DifferentialInE")
    return out


def _dp(i):
    xs, ys, f, g = i["xs"], i["ys"], i["F"], i["G"]
    hide = primed(ys) + tuple(ys)
    xys = tuple(xs) + tuple(ys)
    return (
        [
            Box(_dap(xs, exists_prefix(hide, f)), f),
            Box(_dap(xys, exists_prefix(hide, g)), g),
            Refines(_dap(xs, f), _dap(xs, g), xs),
        ],
        Refines(_dap(xys, f), _dap(xys, g), xys),
    )


def _dp_side(i):
    xs, ys = i["xs"], i["ys"]
    out = []
    if not ys or set(xs) & set(ys):
        out.append("ShapeMismatch")
    return out


def _k(i):
    a, p, q = i["a"], i["P"], i["Q"]
    return [Box(a, implies(p, q)), Box(a, p)], Box(a, q)


_T, _F, _P, _V = "term", "formula", "program", "vars"

AXIOMS: dict[str, Schema] = {
    s.name: s
    for s in [
        Schema("diff_var", {"x": "uvar"}, _diff_var, _no_side),
        Schema("diff_const", {"c": _T}, _diff_const, _diff_const_side),
        Schema("diff_plus", {"e": _T, "g": _T}, _diff_plus, _no_side),
        Schema("diff_mul", {"e": _T, "g": _T}, _diff_mul, _no_side),
        Schema("jacobian", {"E": "terms", "xs": _V}, _jacobian, _jacobian_side),
        Schema("R", {"a": _P, "b": _P, "xs": _V, "P": _F}, _r, _r_side),
        Schema("TR", {"a": _P, "b": _P, "c": _P, "xs": _V}, _tr, _no_side),
        Schema("dW", {"xs": _V, "F": _F}, _dw, _no_side),
        Schema(
            "dI",
            {"xs": _V, "E": "terms", "rel": "rel", "ps": _V},
            _di,
            _di_side,
            defaults={"rel": "<=", "ps": ()},
        ),
        Schema("dHC", {"xs": _V, "E": "terms", "ps": _V}, _dhc, _di_side, defaults={"ps": ()}),
        Schema("DC", {"xs": _V, "F": _F, "R": _F}, _dc, _no_side),
        Schema("DR", {"xs": _V, "zs": _V, "F": _F, "R": _F}, _dr, _dr_side, defaults={"zs": ()}),
        Schema("DM", {"xs": _V, "F": _F, "G": _F, "R": _F}, _dm, _no_side),
        Schema(
            "DG",
            {"xs": _V, "zs": _V, "F": _F, "A": "matrix", "B": "matrix", "C": "terms"},
            _dg,
            _dg_side,
        ),
        Schema("AG", {"xs": _V, "zs": _V, "F": _F, "E": "terms", "G": "terms"}, _ag, _ag_side),
        Schema("DP", {"xs": _V, "ys": _V, "F": _F, "G": _F}, _dp, _dp_side),
        Schema("K", {"a": _P, "P": _F, "Q": _F}, _k, _no_side, curried=True),
    ]
}


def schema(name: str) -> Schema:
    try:
        return AXIOMS[name]
    except KeyError:
        raise UnknownAxiom(name) from None


def instantiate_axiom(name: str, inst: Mapping) -> Formula:
    return schema(name).formula(inst)


def check_side_conditions(name: str, inst: Mapping) -> list[str]:
    s = schema(name)
    return s.side(s.complete(inst))


__all__ = [
    "AXIOMS",
    "KINDS",
    "KindMismatch",
    "Schema",
    "UnknownAxiom",
    "check_side_conditions",
    "instantiate_axiom",
    "kind_ok",
    "params_frozen",
    "schema",
]
