"""DAE index reduction: extract algebraic parts, differentiate, reduce,
detect differential closure and emit a kernel-checkable certificate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .analysis import free_vars, has_differential
from .calculus import determinant, differential, jacobian
from .groebner import Budget, ResourceLimit, elimination_ideal, groebner_basis, reduce_full
from .kernel.checker import CheckConfig, CheckReport, check
from .kernel.script import ProofNode
from .oracle import OracleConfig
from .parser import SystemDecl
from .polynomial import Poly, Ring, from_term
from .printer import print_formula, print_term
from .syntax import ZERO, Dap, Formula, Sequent, Term, Var, conj, eq, mutual, neq, primed
from .tactics import graft, ir_systems, real_leaf, tac_ir

REPORT_SCHEMA = "dalkit.reduce-report/1"


class MaxRoundsExceeded(RuntimeError):
    def __init__(self, result: "ReductionResult"):
        super().__init__(f"round budget exhausted after {len(result.rounds)} round(s)")
        self.result = result


@dataclass
class DaeSystem:
    """Equations ``e = 0`` over ``state_vars``, their primes and ``params``."""

    state_vars: tuple[Var, ...]
    params: tuple[Var, ...] = ()
    equations: list[Term] = field(default_factory=list)
    name: str = ""

    def __post_init__(self) -> None:
        self.state_vars = tuple(self.state_vars)
        states = set(self.state_vars)
        params = list(self.params)
        for e in self.equations:
            if has_differential(e):
                raise ValueError("system equations must not contain (e)' terms")
            for v in sorted(free_vars(e), key=str):
                if v.primed:
                    if v.base not in states:
                        raise ValueError(f"{v} is primed but {v.base} is not a state variable")
                elif v not in states and v not in params:
                    params.append(v)  # undeclared symbols are parameters
        if states & set(params):
            raise ValueError("a variable is both state and parameter")
        self.params = tuple(params)
        self.equations = list(self.equations)

    @classmethod
    def from_decl(cls, decl: SystemDecl) -> "DaeSystem":
        return cls(decl.states, decl.params, list(decl.equations), decl.name)

    def ring(self) -> Ring:
        return Ring(primed(self.state_vars) + self.state_vars + self.params, "grevlex")

    def polys(self) -> list[Poly]:
        r = self.ring()
        return [from_term(e, r) for e in self.equations]

    @property
    def solved_derivatives(self) -> dict[Var, Term]:
        return {v: p.to_term() for v, p in _solved(self.polys()).items()}

    def formula(self) -> Formula:
        return conj([eq(e, ZERO) for e in self.equations])

    def with_equations(self, eqs: Sequence[Term]) -> "DaeSystem":
        return DaeSystem(self.state_vars, self.params, list(eqs), self.name)


def _primed_in(p: Poly) -> list[Var]:
    return sorted((v for v in p.variables() if v.primed), key=str)


def _split_linear(p: Poly, v: Var) -> tuple[Poly, Poly] | None:
    """``p = c·v + rest`` with c, rest free of v (degree one in v)."""
    if p.degree_in(v) != 1:
        return None
    c = p.diff(v)
    rest = p - c * p.ring.var(v)
    return c, rest


def _solved(polys: Sequence[Poly]) -> dict[Var, Poly]:
    """``x' ↦ e`` for equations ``c·x' + rest`` with rational c and unprimed rest."""
    out: dict[Var, Poly] = {}
    for p in polys:
        pv = _primed_in(p)
        if len(pv) != 1 or pv[0] in out:
            continue
        split = _split_linear(p, pv[0])
        if split is None:
            continue
        c, rest = split
        if c.is_const():
            out[pv[0]] = rest * (-1 / c.const_value())
    return out


def _linear_primed(polys: Sequence[Poly], solved: dict[Var, Poly]) -> dict[Var, tuple[Poly, Poly]]:
    """``x' ↦ (c, e)`` for equations ``c·x' - e = 0`` with c, e unprimed."""
    out: dict[Var, tuple[Poly, Poly]] = {}
    for p in polys:
        pv = _primed_in(p)
        if len(pv) != 1 or pv[0] in solved or pv[0] in out:
            continue
        split = _split_linear(p, pv[0])
        if split is None:
            continue
        c, rest = split
        if not any(v.primed for v in c.variables()):
            out[pv[0]] = (c, -rest)
    return out


def _substitute_solved(p: Poly, solved: dict[Var, Poly]) -> Poly:
    for v, g in solved.items():
        p = p.subs(v, g)
    return p


def _coefficients(p: Poly, v: Var) -> list[Poly]:
    """``p = Σ a_j v^j``; returns ``[a_0, a_1, ...]``."""
    i = p.ring.index[v]
    out: dict[int, dict] = {}
    for m, c in p.terms.items():
        k = m[i]
        m2 = m[:i] + (0,) + m[i + 1 :]
        out.setdefault(k, {})[m2] = c
    deg = max(out) if out else 0
    return [Poly(p.ring, out.get(j, {})) for j in range(deg + 1)]


def _divide_by_term(a: Poly, c: Poly) -> Poly | None:
    """Exact quotient ``a / c`` when ``c`` is a single term, else None."""
    if len(c.terms) != 1:
        return None
    (cm, cc), = c.terms.items()
    out = {}
    for m, k in a.terms.items():
        if any(x < y for x, y in zip(m, cm)):
            return None
        out[tuple(x - y for x, y in zip(m, cm))] = k / cc
    return Poly(a.ring, out)


def _pseudo_divide(p: Poly, v: Var, c: Poly, e: Poly) -> tuple[Poly, Poly]:
    """Eliminate v from p using ``c·v = e``; returns ``(r, M)`` with
    ``M·p - r`` in the ideal of ``c·v - e``."""
    coeffs = _coefficients(p, v)
    k = len(coeffs) - 1
    if k == 0:
        return p, p.ring.one()
    # exact when every a_j is divisible by c^j
    exact = []
    for j, a in enumerate(coeffs):
        q = _divide_by_term(a, c**j) if j else a
        if q is None:
            break
        exact.append(q)
    else:
        r = p.ring.zero()
        for j, q in enumerate(exact):
            r = r + q * e**j
        return r, p.ring.one()
    r = p.ring.zero()
    for j, a in enumerate(coeffs):
        r = r + a * e**j * c ** (k - j)
    return r, c**k


@dataclass
class Rewrite:
    """``multiplier · differentiated - reduced`` lies in the ideal of the system."""

    differentiated: Poly
    reduced: Poly
    multiplier: Poly
    certified: bool | None  # None: membership check hit the resource budget


@dataclass
class Round:
    algebraic: list[Poly]
    differentiated: list[Poly]
    rewrites: list[Rewrite]
    normalized: list[Poly]  # primitive forms added to the reduced system
    system: DaeSystem  # the reduced system after this round

    @property
    def reduced(self) -> list[Poly]:
        return [r.reduced for r in self.rewrites]

    def to_json(self) -> dict:
        return {
            "algebraic_part": [print_term(p.to_term()) for p in self.algebraic],
            "differentiated": [print_term(p.to_term()) for p in self.differentiated],
            "reduced": [print_term(r.reduced.to_term()) for r in self.rewrites],
            "multipliers": [print_term(r.multiplier.to_term()) for r in self.rewrites],
            "rewrites_certified": [r.certified for r in self.rewrites],
            "added": [print_term(p.to_term()) for p in self.normalized],
        }


@dataclass
class Closure:
    status: str  # closed | not-closed
    rows: list[Term]
    jacobian: tuple[tuple[Term, ...], ...]
    det: Term | None
    parameter_condition: Formula | None
    obligations: list[Term]
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "rows": [print_term(e) for e in self.rows],
            "jacobian": [[print_term(a) for a in row] for row in self.jacobian],
            "det": print_term(self.det) if self.det is not None else None,
            "parameter_condition": print_formula(self.parameter_condition)
            if self.parameter_condition is not None
            else None,
            "obligations": [print_term(e) for e in self.obligations],
            "detail": self.detail,
        }


@dataclass
class ReductionResult:
    original: DaeSystem
    rounds: list[Round]
    reduced_system: DaeSystem
    gamma: Formula
    closure: Closure
    chain: list[tuple[Term, tuple[Var, ...]]]
    stopped: str  # no-new-constraints | closed | max-rounds
    certificate: ProofNode | None = None
    certificate_report: CheckReport | None = None

    @property
    def hidden_constraints(self) -> list[Poly]:
        return [d for r in self.rounds for d in r.differentiated]

    @property
    def certificate_status(self) -> str:
        return self.certificate_report.status if self.certificate_report else "none"

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "system": self.original.name,
            "rounds": [r.to_json() for r in self.rounds],
            "stopped": self.stopped,
            "reduced_system": [print_term(e) for e in self.reduced_system.equations],
            "gamma": print_formula(self.gamma),
            "closure": self.closure.to_json(),
            "certificate_status": self.certificate_status,
            "certificate_leaves": self.certificate_report.leaf_tiers() if self.certificate_report else {},
        }


# ---------------------------------------------------------------- operations


def extract_algebraic_part(
    sys: DaeSystem,
    strategy: str = "syntactic",
    known: Sequence[Poly] = (),
    budget: Budget = Budget(),
) -> list[Poly]:
    """Algebraic generators of ``sys`` not already implied by ``known``."""
    ring = sys.ring()
    polys = sys.polys()
    if strategy == "syntactic":
        solved = _solved(polys)
        cands = []
        for p in polys:
            q = _substitute_solved(p, solved)
            if q and not _primed_in(q):
                cands.append(q)
    elif strategy == "elimination":
        block = Ring(ring.vars, "block", split=len(sys.state_vars))
        cands = [g.to_ring(ring) for g in elimination_ideal([p.to_ring(block) for p in polys], primed(sys.state_vars), budget)]
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    out: list[Poly] = []
    basis = groebner_basis([k.to_ring(ring) for k in known], budget) if known else []
    for c in cands:
        if basis and not reduce_full(c, basis):
            continue
        if any(c.monic() == o.monic() for o in out):
            continue
        if basis == [ring.one()]:
            break
        out.append(c)
        basis = groebner_basis(list(basis) + [c], budget)
    return out


def _reduce_one(p: Poly, polys: Sequence[Poly], algebraic_basis: Sequence[Poly]) -> tuple[Poly, Poly]:
    solved = _solved(polys)
    linear = _linear_primed(polys, solved)
    r = _substitute_solved(p, solved)
    mult = p.ring.one()
    for v, (c, e) in linear.items():
        r, m = _pseudo_divide(r, v, c, e)
        mult = mult * m
    if algebraic_basis:
        r = reduce_full(r, algebraic_basis)
    return r, mult


def reduce_modulo(terms: Sequence[Term], sys: DaeSystem, algebraic: Sequence[Term] | None = None) -> list[Term]:
    """Substitute solved derivatives, eliminate linearly determined ones and
    take the normal form modulo the algebraic part."""
    ring = sys.ring()
    polys = sys.polys()
    alg = [from_term(a, ring) for a in algebraic] if algebraic is not None else extract_algebraic_part(sys)
    basis = groebner_basis(alg) if alg else []
    return [_reduce_one(from_term(t, ring), polys, basis)[0].to_term() for t in terms]


def _certify(rw_mult: Poly, d: Poly, r: Poly, polys: Sequence[Poly], budget: Budget) -> bool | None:
    try:
        gb = groebner_basis(list(polys), budget)
    except ResourceLimit:
        return None
    return not reduce_full(rw_mult * d - r, gb)


def _match_rows(jac, n) -> list[int]:
    """Row order putting a nonzero entry on the diagonal where possible."""
    rows = list(range(len(jac)))
    order: list[int] = []
    for col in range(n):
        pick = next((r for r in rows if jac[r][col] != ZERO), None)
        if pick is not None:
            order.append(pick)
            rows.remove(pick)
    return order + rows


def closure_check(sys: DaeSystem) -> Closure:
    ring = sys.ring()
    xsp = primed(sys.state_vars)
    rows_p = [p for p in sys.polys() if _primed_in(p)]
    rows = [p.to_term() for p in rows_p]
    jac_raw = jacobian(rows, xsp)
    jac = tuple(tuple(from_term(a, ring).to_term() for a in row) for row in jac_raw)
    order = _match_rows(jac, len(xsp))
    rows = [rows[k] for k in order]
    jac = tuple(jac[k] for k in order)
    if len(rows) != len(xsp):
        return Closure(
            "not-closed",
            rows,
            jac,
            None,
            None,
            [],
            f"{len(rows)} differential equation(s) for {len(xsp)} differential variable(s)",
        )
    det = from_term(determinant(jac), ring)
    if not det:
        return Closure("not-closed", rows, jac, ZERO, None, [], "Jacobian determinant is identically zero")
    conds, obligations = _parameter_condition(det, set(sys.params))
    return Closure("closed", rows, jac, det.to_term(), conds, obligations)


def _parameter_condition(det: Poly, params: set[Var]) -> tuple[Formula, list[Term]]:
    """Content/monomial factorisation of det: every variable of the monomial
    content gives ``v ≠ 0`` (even powers collapse to the base), the rest is
    kept as one factor."""
    ring = det.ring
    cm = det.content_monomial()
    parts: list[Formula] = []
    obligations: list[Term] = []
    for i, k in enumerate(cm):
        if k:
            v = ring.vars[i]
            if v in params:
                parts.append(neq(v, ZERO))
            else:
                obligations.append(v)
    rest = Poly(ring, {tuple(a - b for a, b in zip(m, cm)): c for m, c in det.terms.items()})
    if not rest.is_const():
        factor = rest.primitive().to_term()
        if rest.variables() <= params:
            parts.append(neq(factor, ZERO))
        else:
            obligations.append(factor)
    return conj(parts), obligations


def reduce(
    sys: DaeSystem,
    max_rounds: int = 8,
    strategy: str = "syntactic",
    budget: Budget = Budget(),
    certify: bool = True,
    oracle: OracleConfig = OracleConfig(),
    raise_on_limit: bool = False,
) -> ReductionResult:
    """Iterate extract → differentiate → reduce → augment.

    A round whose reduced forms are all algebraic reveals new hidden
    constraints and consumes one unit of ``max_rounds``; a round whose
    reduced forms all mention differential variables cannot feed another
    round and is always performed.
    """
    if max_rounds < 0:
        raise ValueError("max_rounds must be non-negative")
    ring = sys.ring()
    params = set(sys.params)
    current = sys
    known: list[Poly] = []
    rounds: list[Round] = []
    chain: list[tuple[Term, tuple[Var, ...]]] = []
    used = 0
    stopped = "no-new-constraints"
    while True:
        if closure_check(current).status == "closed" and rounds:
            stopped = "closed"
            break
        new = extract_algebraic_part(current, strategy, known, budget)
        if not new:
            break
        basis = groebner_basis(known + new, budget)
        polys = current.polys()
        diffs, rewrites, added = [], [], []
        for g in new:
            d = from_term(differential(g.to_term(), params), ring)
            r, mult = _reduce_one(d, polys, basis)
            cert = _certify(mult, d, r, polys + known + new, budget)
            diffs.append(d)
            rewrites.append(Rewrite(d, r, mult, cert))
            if r:
                added.append(r.primitive())
        if any(not _primed_in(a) for a in added):
            used += 1
            if used > max_rounds:
                stopped = "max-rounds"
                break
        for g in new:
            ps = tuple(p for p in sys.params if p in g.variables())
            chain.append((g.to_term(), ps))
        known.extend(new)
        eqs = current.equations + [a.to_term() for a in added if a.monic() not in {p.monic() for p in polys}]
        current = current.with_equations(eqs)
        rounds.append(Round(new, diffs, rewrites, added, current))
    gamma = conj([eq(d.to_term(), ZERO) for r in rounds for d in r.differentiated])
    result = ReductionResult(sys, rounds, current, gamma, closure_check(current), chain, stopped)
    if certify:
        result.certificate = certificate(sys, chain, gamma)
        result.certificate_report = check(result.certificate, CheckConfig(oracle=oracle))
    if stopped == "max-rounds" and raise_on_limit:
        raise MaxRoundsExceeded(result)
    return result


def certificate_goal(sys: DaeSystem, chain, gamma: Formula) -> Sequent:
    f0 = sys.formula()
    fm = ir_systems(f0, chain)[-1]
    xs = sys.state_vars
    hyps = [gamma] if chain else []
    used = sorted({p for _, ps in chain for p in ps}, key=lambda v: sys.params.index(v))
    hyps += [eq(p.prime(), ZERO) for p in used]
    return Sequent(tuple(hyps), (mutual(Dap(xs, fm), Dap(xs, f0), xs),))


def certificate(sys: DaeSystem, chain, gamma: Formula) -> ProofNode:
    """The index-reduction refinement ``Γ ⊢ {x:F_m} ≈ {x:F_0}`` with both
    arithmetic premises left to the oracle."""
    goal = certificate_goal(sys, chain, gamma)
    root = tac_ir(goal, sys.formula(), chain)
    return graft(root, real_leaf)


def constraint_residuals(result: ReductionResult) -> list[Term]:
    """All algebraic constraints of the reduced system (original and hidden)."""
    return [p.to_term() for p in result.reduced_system.polys() if not _primed_in(p)]


__all__ = [
    "Closure",
    "DaeSystem",
    "MaxRoundsExceeded",
    "ReductionResult",
    "Rewrite",
    "Round",
    "closure_check",
    "certificate",
    "certificate_goal",
    "extract_algebraic_part",
    "reduce",
    "reduce_modulo",
]
