"""Numerical sanity checks of the semantics.

Everything here samples: a passing check is evidence, never a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .analysis import free_vars, has_differential
from .calculus import MissingVariable, differential, eval_term
from .polynomial import Poly, Ring, from_term
from .reduction import DaeSystem
from .syntax import (
    And,
    Assign,
    Choice,
    Dap,
    Forall,
    Formula,
    Leq,
    Not,
    Program,
    Seq,
    Star,
    Term,
    Test,
    Var,
    primed,
)

NumericState = dict


class SingularJacobian(ArithmeticError):
    pass


class NoConvergence(ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class JacobianDegenerate(ArithmeticError):
    def __init__(self, time: float, det: float):
        super().__init__(f"Jacobian w.r.t. the differential variables is degenerate at t={time:.6g} (det {det:.3g})")
        self.time = time
        self.det = det


@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-3
    newton_tol: float = 1e-12
    newton_max_iters: int = 25
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.h > 0 or not self.newton_tol > 0 or self.newton_max_iters < 1:
            raise ValueError("invalid simulation configuration")


@dataclass
class TraceSample:
    times: list[float]
    states: list[NumericState]

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if self.times and self.times[0] != 0:
            raise ValueError("traces start at time 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    @property
    def duration(self) -> float:
        return self.times[-1] if self.times else 0.0

    def column(self, v: Var) -> np.ndarray:
        return np.array([s[v] for s in self.states], dtype=float)

    def to_csv(self, state_vars: Sequence[Var]) -> str:
        cols = list(state_vars) + list(primed(state_vars))
        lines = ["t," + ",".join(str(v) for v in cols)]
        for t, s in zip(self.times, self.states):
            lines.append(f"{t:.10g}," + ",".join(f"{float(s[v]):.17g}" for v in cols))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- compiled evaluation


def compile_polys(polys: Sequence[Poly], order: Sequence[Var]) -> Callable[[np.ndarray], list]:
    """A function of a value vector (indexed like ``order``) returning the
    list of polynomial values."""
    pos = {v: k for k, v in enumerate(order)}
    exprs = []
    for p in polys:
        parts = []
        for m, c in p.terms.items():
            factors = [repr(float(c))]
            for i, k in enumerate(m):
                if k:
                    j = pos[p.ring.vars[i]]
                    factors.append(f"u[{j}]" if k == 1 else f"u[{j}]**{k}")
            parts.append("*".join(factors))
        exprs.append("+".join(parts) if parts else "0.0")
    src = "lambda u: [" + ", ".join(exprs) + "]"
    return eval(src, {})  # noqa: S307 - generated from our own polynomials


def _ring_for(terms: Sequence[Term]) -> Ring:
    vs = set()
    for t in terms:
        vs |= free_vars(t)
    return Ring(sorted(vs, key=lambda v: (v.primed, v.name)))


# ---------------------------------------------------------------- consistent initialisation


def consistent_init(
    constraints: Sequence[Term],
    partial: Mapping[Var, float],
    cfg: SimConfig = SimConfig(),
    start: Mapping[Var, float] | None = None,
) -> NumericState:
    """Complete ``partial`` so that every constraint vanishes (Gauss-Newton)."""
    ring = _ring_for(constraints)
    polys = [from_term(c, ring) for c in constraints]
    unknowns = [v for v in ring.vars if v not in partial]
    state = {v: float(x) for v, x in partial.items()}
    if not unknowns:
        return dict(partial)
    if len(polys) < len(unknowns):
        raise SingularJacobian(f"{len(polys)} constraint(s) for {len(unknowns)} unknown(s)")
    order = list(ring.vars)
    f = compile_polys(polys, order)
    jac = [compile_polys([p.diff(v) for p in polys], order) for v in unknowns]
    rng = np.random.default_rng(cfg.seed)
    u = np.array([state.get(v, 0.0) for v in order], dtype=float)
    idx = [order.index(v) for v in unknowns]
    for k, v in zip(idx, unknowns):
        u[k] = float(start[v]) if start and v in start else rng.uniform(-1, 1)
    res = np.inf
    for _ in range(max(cfg.newton_max_iters, 50)):
        r = np.array(f(u))
        res = float(np.max(np.abs(r))) if len(r) else 0.0
        J = np.array([col(u) for col in jac]).T
        if np.linalg.matrix_rank(J) < len(unknowns):
            raise SingularJacobian("constraint Jacobian w.r.t. the unknowns is rank deficient")
        if res <= cfg.newton_tol:
            break
        du = np.linalg.lstsq(J, -r, rcond=None)[0]
        u[idx] += du
    else:
        r = np.array(f(u))
        res = float(np.max(np.abs(r)))
        if res > cfg.newton_tol * 1e3:
            raise NoConvergence("consistent initialisation did not converge", res)
    out = dict(partial)
    for k, v in zip(idx, unknowns):
        out[v] = float(u[k])
    return out


# ---------------------------------------------------------------- implicit integration


class ImplicitField:
    """``x ↦ x'`` defined by solving ``G(x, x') = 0`` with Newton."""

    def __init__(self, sys: DaeSystem, constants: Mapping[Var, float], cfg: SimConfig):
        self.xs = sys.state_vars
        self.xps = primed(self.xs)
        rows = [p for p in sys.polys() if any(v.primed for v in p.variables())]
        if len(rows) != len(self.xs):
            raise JacobianDegenerate(0.0, 0.0)
        ring = sys.ring()
        self.order = list(ring.vars)
        self.cfg = cfg
        self.g = compile_polys(rows, self.order)
        self.jac = compile_polys([p.diff(v) for p in rows for v in self.xps], self.order)
        self.n = len(self.xs)
        self.u = np.zeros(len(self.order))
        for v, x in constants.items():
            if v in ring.index:
                self.u[self.order.index(v)] = float(x)
        self.ix = [self.order.index(v) for v in self.xs]
        self.ip = [self.order.index(v) for v in self.xps]

    def solve(self, x: np.ndarray, p0: np.ndarray, t: float = 0.0) -> np.ndarray:
        u = self.u
        u[self.ix] = x
        u[self.ip] = p0
        n = self.n
        res = np.inf
        for _ in range(self.cfg.newton_max_iters):
            r = np.array(self.g(u))
            res = float(np.max(np.abs(r)))
            if res <= self.cfg.newton_tol:
                return u[self.ip].copy()
            J = np.array(self.jac(u)).reshape(n, n)
            det = np.linalg.det(J)
            scale = max(1.0, float(np.max(np.abs(J))))
            if abs(det) <= 1e-12 * scale**n:
                raise JacobianDegenerate(t, float(det))
            u[self.ip] = u[self.ip] - np.linalg.solve(J, r)
        r = np.array(self.g(u))
        res = float(np.max(np.abs(r)))
        if res <= self.cfg.newton_tol * 1e3:
            return u[self.ip].copy()
        raise NoConvergence(f"implicit field solve failed at t={t:.6g}", res)


def integrate_implicit(sys: DaeSystem, state0: Mapping[Var, float], T: float, cfg: SimConfig = SimConfig()) -> TraceSample:
    """Classical RK4 on the field implicitly defined by the differential subsystem."""
    if T < 0:
        raise ValueError("negative duration")
    if T == 0:
        return TraceSample([0.0], [dict(state0)])
    constants = {v: x for v, x in state0.items() if v not in sys.state_vars and not v.primed}
    field_ = ImplicitField(sys, constants, cfg)
    x = np.array([float(state0[v]) for v in sys.state_vars])
    p = np.array([float(state0.get(v, 0.0)) for v in primed(sys.state_vars)])
    steps = max(1, int(round(T / cfg.h)))
    h = T / steps
    p = field_.solve(x, p, 0.0)

    def sample(xv, pv):
        s = dict(state0)
        s.update({v: float(a) for v, a in zip(sys.state_vars, xv)})
        s.update({v: float(a) for v, a in zip(primed(sys.state_vars), pv)})
        return s

    times, states = [0.0], [sample(x, p)]
    for k in range(steps):
        t = k * h
        k1 = p
        k2 = field_.solve(x + 0.5 * h * k1, k1, t + 0.5 * h)
        k3 = field_.solve(x + 0.5 * h * k2, k2, t + 0.5 * h)
        k4 = field_.solve(x + h * k3, k3, t + h)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        p = field_.solve(x, k4, t + h)
        times.append((k + 1) * h)
        states.append(sample(x, p))
    return TraceSample(times, states)


def constraint_drift(trace: TraceSample, constraints: Sequence[Term]) -> list[float]:
    """Per-constraint maximum of ``|c|`` over the samples."""
    out = []
    for c in constraints:
        ring = _ring_for([c])
        for v in ring.vars:
            if trace.states and v not in trace.states[0]:
                raise MissingVariable(v)
        f = compile_polys([from_term(c, ring)], ring.vars)
        worst = 0.0
        for s in trace.states:
            worst = max(worst, abs(f([s[v] for v in ring.vars])[0]))
        out.append(worst)
    return out


def difference_consistency(trace: TraceSample, state_vars: Sequence[Var], order: int = 2) -> float:
    """Largest gap between a centred difference of each state variable and
    the stored differential variable, over the interior samples.

    ``order`` selects the 3-point (2) or 5-point (4) stencil; the latter
    needs a uniform grid.  The 3-point stencil carries its own truncation
    error of about ``h²/6·|x‴|``, which dominates on fast components.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    t = np.asarray(trace.times, dtype=float)
    worst = 0.0
    for v in state_vars:
        col = trace.column(v)
        der = trace.column(v.prime())
        if order == 2:
            if len(t) < 3:
                continue
            fd = (col[2:] - col[:-2]) / (t[2:] - t[:-2])
            gap = np.abs(fd - der[1:-1])
        else:
            if len(t) < 5:
                continue
            h = (t[-1] - t[0]) / (len(t) - 1)
            fd = (-col[4:] + 8 * col[3:-1] - 8 * col[1:-3] + col[:-4]) / (12 * h)
            gap = np.abs(fd - der[2:-2])
        worst = max(worst, float(gap.max()))
    return worst


# ---------------------------------------------------------------- differential lemma


@dataclass
class SplineTrace:
    """A C¹ trace whose variables follow cubic splines; primes are exact derivatives."""

    splines: dict[Var, CubicSpline]
    duration: float

    def state(self, t: float) -> NumericState:
        s = {}
        for v, sp in self.splines.items():
            s[v] = float(sp(t))
            s[v.prime()] = float(sp(t, 1))
        return s


def spline_trace(variables: Sequence[Var], seed: int = 0, duration: float = 1.0, knots: int = 5, scale: float = 1.0) -> SplineTrace:
    rng = np.random.default_rng(seed)
    ts = np.linspace(0.0, duration, knots)
    return SplineTrace({v: CubicSpline(ts, rng.uniform(-scale, scale, knots)) for v in variables}, duration)


def lemma_samples(e: Term, trace, h: float = 1e-4, samples: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Centred differences of ``t ↦ e`` and values of ``(e)'`` along ``trace``
    (a SplineTrace or a TraceSample), at interior sample points."""
    if has_differential(e) or any(v.primed for v in free_vars(e)):
        raise ValueError("e must be an unprimed, differential-free term")
    de = differential(e)
    ring = _ring_for([e, de])
    order = list(ring.vars)
    f = compile_polys([from_term(e, ring)], order)
    df = compile_polys([from_term(de, ring)], order)

    def vec(s):
        return [s.get(v, 0.0) for v in order]

    fds, exact = [], []
    if isinstance(trace, SplineTrace):
        for t in np.linspace(h, trace.duration - h, samples + 2)[1:-1]:
            fds.append((f(vec(trace.state(t + h)))[0] - f(vec(trace.state(t - h)))[0]) / (2 * h))
            exact.append(df(vec(trace.state(t)))[0])
    else:
        times = trace.times
        for k in range(1, len(times) - 1):
            fds.append((f(vec(trace.states[k + 1]))[0] - f(vec(trace.states[k - 1]))[0]) / (times[k + 1] - times[k - 1]))
            exact.append(df(vec(trace.states[k]))[0])
    return np.asarray(fds, dtype=float), np.asarray(exact, dtype=float)


def check_differential_lemma(e: Term, trace, h: float = 1e-4, samples: int = 50) -> float:
    """Normwise relative gap ``max|fd - (e)'| / max|(e)'|`` over the samples.

    The normalisation is scale invariant: multiplying ``e`` by a constant
    leaves the result unchanged.  When ``(e)'`` vanishes along the whole
    trace the absolute gap is returned.
    """
    fd, exact = lemma_samples(e, trace, h, samples)
    if not len(fd):
        return 0.0
    gap = float(np.max(np.abs(fd - exact)))
    scale = float(np.max(np.abs(exact)))
    return gap / scale if scale > 0 else gap


# ---------------------------------------------------------------- discrete interpreters


def _freeze(s: Mapping[Var, Fraction]) -> tuple:
    return tuple(sorted(s.items(), key=lambda kv: str(kv[0])))


def holds(f: Formula, s: Mapping[Var, Fraction]) -> bool:
    match f:
        case Leq(left=a, right=b):
            return eval_term(a, s, exact=True) <= eval_term(b, s, exact=True)
        case Not(arg=p):
            return not holds(p, s)
        case And(left=p, right=q):
            return holds(p, s) and holds(q, s)
        case Forall():
            raise ValueError("quantified tests are not executable")
    raise ValueError(f"not an executable test: {f!r}")


@dataclass(frozen=True)
class PointTrace:
    """A discrete trace: breakpoints ``(time, state)`` and a duration.

    Discrete programs only produce duration-zero traces, so concatenation
    keeps the second trace (the first contributes no time ``t < 0``).
    """

    pieces: tuple = field(default=())
    duration: Fraction = Fraction(0)

    @classmethod
    def point(cls, s) -> "PointTrace":
        return cls(((Fraction(0), _freeze(s)),), Fraction(0))

    def at(self, t: Fraction) -> tuple:
        current = None
        for start, st in self.pieces:
            if start <= t:
                current = st
        return current

    @property
    def terminal(self) -> tuple:
        return self.at(self.duration)

    def concat(self, other: "PointTrace") -> "PointTrace":
        mine = tuple((t, s) for t, s in self.pieces if t < self.duration)
        theirs = tuple((t + self.duration, s) for t, s in other.pieces)
        return PointTrace(mine + theirs, self.duration + other.duration)


def trace_semantics(prog: Program, s: Mapping[Var, Fraction], fuel: int) -> list[PointTrace]:
    match prog:
        case Assign(var=x, term=e):
            s2 = dict(s)
            s2[x] = eval_term(e, s, exact=True)
            return [PointTrace.point(s2)]
        case Test(cond=q):
            return [PointTrace.point(s)] if holds(q, s) else []
        case Seq(left=a, right=b):
            out = []
            for ta in trace_semantics(a, s, fuel):
                for tb in trace_semantics(b, dict(ta.terminal), fuel):
                    out.append(ta.concat(tb))
            return out
        case Choice(left=a, right=b):
            return trace_semantics(a, s, fuel) + trace_semantics(b, s, fuel)
        case Star(body=a):
            # α^0 = ?true, α^{n+1} = α ; α^n
            out = [PointTrace.point(s)]
            frontier = [PointTrace.point(s)]
            for _ in range(fuel):
                nxt = []
                for tr in frontier:
                    for ta in trace_semantics(a, dict(tr.terminal), fuel):
                        nxt.append(tr.concat(ta))
                out.extend(nxt)
                frontier = nxt
            return out
        case Dap():
            raise ValueError("run_discrete does not execute differential-algebraic programs")
    raise TypeError(f"not a program: {prog!r}")


def relational_semantics(prog: Program, s: Mapping[Var, Fraction], fuel: int) -> set[tuple]:
    match prog:
        case Assign(var=x, term=e):
            s2 = dict(s)
            s2[x] = eval_term(e, s, exact=True)
            return {_freeze(s2)}
        case Test(cond=q):
            return {_freeze(s)} if holds(q, s) else set()
        case Seq(left=a, right=b):
            return {u for m in relational_semantics(a, s, fuel) for u in relational_semantics(b, dict(m), fuel)}
        case Choice(left=a, right=b):
            return relational_semantics(a, s, fuel) | relational_semantics(b, s, fuel)
        case Star(body=a):
            reach = {_freeze(s)}
            frontier = {_freeze(s)}
            for _ in range(fuel):
                frontier = {u for m in frontier for u in relational_semantics(a, dict(m), fuel)}
                reach |= frontier
            return reach
        case Dap():
            raise ValueError("run_discrete does not execute differential-algebraic programs")
    raise TypeError(f"not a program: {prog!r}")


def run_discrete(prog: Program, s0: Mapping[Var, Fraction], fuel: int = 3) -> set[tuple]:
    """Terminal states of the trace-style interpreter (frozen as sorted item tuples)."""
    s0 = {v: Fraction(x) for v, x in s0.items()}
    return {tr.terminal for tr in trace_semantics(prog, s0, fuel)}


def run_relational(prog: Program, s0: Mapping[Var, Fraction], fuel: int = 3) -> set[tuple]:
    s0 = {v: Fraction(x) for v, x in s0.items()}
    return relational_semantics(prog, s0, fuel)
