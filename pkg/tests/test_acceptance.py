"""Acceptance criteria, one test each.

Every test prints a single ``PASS`` or ``FAIL`` line (visible in ``pytest -v``
output even with capture on) and then asserts the same condition.
"""

import random
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from dalkit import tactics
from dalkit.calculus import determinant, eval_matrix, eval_term
from dalkit.cli import EXIT_OK, main
from dalkit.kernel import check, load_script
from dalkit.parser import parse, parse_systems
from dalkit.polynomial import Poly, Ring, poly_equal
from dalkit.reduction import DaeSystem, reduce
from dalkit.syntax import (
    And,
    Box,
    Const,
    Dap,
    Differential,
    Plus,
    Refines,
    Sequent,
    Times,
    ZERO,
    eq,
    mutual,
    variables,
)
from dalkit.tracelab import (
    SimConfig,
    check_differential_lemma,
    consistent_init,
    constraint_drift,
    integrate_implicit,
    lemma_samples,
    run_discrete,
    run_relational,
    spline_trace,
)

from conftest import FIXTURES
from goldens import DA, DHC_LEFT, DI_LEFT, DI_RIGHT, DW, ir_golden
from mutation import fuzz
from oracles import to_sympy
from randgen import random_program, random_state

x, y, z, v, w, lam, m, g, l = variables("x y z v w lambda m g l")
T = lambda s: parse(s, "term")  # noqa: E731
F = lambda s: parse(s, "formula")  # noqa: E731


@pytest.fixture
def verdict(capsys):
    def emit(n: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n} ({title}): {detail}")
        assert ok, detail

    return emit


def _system(name, which=None):
    decls = parse_systems((FIXTURES / name).read_text())
    decl = decls[0] if which is None else next(d for d in decls if d.name == which)
    return DaeSystem.from_decl(decl)


# ---------------------------------------------------------------- 1


def test_criterion_1_circle(verdict, tmp_path):
    t0 = time.perf_counter()
    res = reduce(_system("circle.dal"))
    cert = tmp_path / "circle.dalproof"
    from dalkit.kernel import dump_script

    cert.write_text(dump_script(res.certificate))
    code = main(["check", str(cert)])
    elapsed = time.perf_counter() - t0
    (hidden,) = res.hidden_constraints
    ok_hidden = poly_equal(hidden.to_term(), T("2*x*x' + 2*y*y'"))
    ok_gamma = res.gamma == eq(hidden.to_term(), ZERO)
    ok = ok_hidden and ok_gamma and code == EXIT_OK and elapsed < 1.0
    verdict(1, "circle", ok, f"hidden={ok_hidden} gamma={ok_gamma} check exit {code}, {elapsed:.3f}s (< 1s)")


# ---------------------------------------------------------------- 2


def _sympy_multiplier_equation():
    """Differentiate the velocity constraint along the dynamics (sympy), scale
    by m and reduce modulo x^2 + y^2 = l^2."""
    X, Y, V, W, L, M, G, Ld = sp.symbols("x y v w lambda m g l")
    rhs = {X: V, Y: W, V: L * X / M, W: (L * Y + M * G) / M}
    vel = X * V + Y * W
    d = sp.expand(M * sum(sp.diff(vel, s) * r for s, r in rhs.items()))
    return sp.reduced(d, [X**2 + Y**2 - Ld**2], X, Y, V, W, order="grevlex")[1]


def test_criterion_2_pendulum(verdict):
    t0 = time.perf_counter()
    res = reduce(_system("pendulum.dal"), max_rounds=2)
    elapsed = time.perf_counter() - t0
    r1 = res.rounds[0].normalized[0]
    ok_a = poly_equal(r1.to_term(), T("x*v + y*w")) or poly_equal(r1.to_term(), T("2*x*v + 2*y*w"))
    ratio = sp.cancel(to_sympy(res.rounds[1].normalized[0].to_term()) / _sympy_multiplier_equation())
    ok_b = ratio.is_number and ratio != 0
    diag = [T("1"), T("1"), T("m"), T("m"), T("l^2")]
    jac = res.closure.jacobian
    ok_jac = all(poly_equal(jac[i][j], diag[i] if i == j else ZERO) for i in range(5) for j in range(5))
    ok_det = poly_equal(res.closure.det, T("m^2*l^2"))
    ok_cond = res.closure.parameter_condition == F("m != 0 & l != 0")
    ok_c = ok_jac and ok_det and ok_cond
    ok_d = res.certificate_status == "proved" and res.certificate.goal.antecedent[0] == res.gamma
    ok = ok_a and ok_b and ok_c and ok_d and elapsed < 5.0
    verdict(
        2,
        "pendulum reduction",
        ok,
        f"(a) {ok_a} (b) {ok_b} (c) jacobian={ok_jac} det={ok_det} cond={ok_cond} (d) {res.certificate_status}, "
        f"{elapsed:.3f}s (< 5s)",
    )


# ---------------------------------------------------------------- 3


def test_criterion_3_safety(verdict):
    t0 = time.perf_counter()
    root = load_script((FIXTURES / "safety.dalproof").read_text())
    rep = check(root)
    elapsed = time.perf_counter() - t0
    tiers = rep.leaf_tiers()
    goals = [n.goal for n in root.walk()]
    final = [k for k, r in enumerate(rep.nodes) if r.rule == "real" and goals[k].succedent == (F("y > 0"),)]
    final_tier = (rep.nodes[final[0]].oracle or {}).get("method") if final else None
    ok = rep.status == "proved" and set(tiers) <= {"ideal-membership", "external"} and bool(final) and elapsed < 5.0
    verdict(3, "safety", ok, f"status {rep.status}, leaves {tiers}, y > 0 leaf tier {final_tier}, {elapsed:.3f}s (< 5s)")


# ---------------------------------------------------------------- 4


def _random_term(rng: random.Random):
    names = variables("x y z")[: rng.randint(1, 3)]
    ring = Ring(names)
    coeffs = {}
    for _ in range(rng.randint(1, 6)):
        exps = [0] * len(names)
        for _ in range(rng.randint(0, 4)):
            exps[rng.randrange(len(names))] += 1
        coeffs[tuple(exps)] = Fraction(rng.randint(-10, 10))
    return names, Poly(ring, {k: c for k, c in coeffs.items() if c}).to_term()


def test_criterion_4_differential_lemma(verdict):
    rng = random.Random(2024)
    worst, worst_pointwise = 0.0, 0.0
    for k in range(100):
        names, e = _random_term(rng)
        trace = spline_trace(names, seed=k)
        worst = max(worst, check_differential_lemma(e, trace, h=1e-4))
        fd, exact = lemma_samples(e, trace, h=1e-4)
        worst_pointwise = max(worst_pointwise, float(np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1.0))))
    verdict(
        4,
        "differential lemma",
        worst <= 1e-4,
        f"100 terms, max normwise relative deviation {worst:.2e} (<= 1e-4 at h = 1e-4); "
        f"pointwise |gap|/max(|exact|,1) {worst_pointwise:.2e}",
    )


# ---------------------------------------------------------------- 5


def _random_matrix(rng: random.Random, n: int):
    names = variables("a b c d")

    def entry():
        t = Const(Fraction(rng.randint(-5, 5)))
        for _ in range(rng.randint(0, 2)):
            mono = Times(Const(Fraction(rng.randint(-3, 3))), rng.choice(names))
            if rng.random() < 0.5:
                mono = Times(mono, rng.choice(names))
            t = Plus(t, mono)
        return t

    return tuple(tuple(entry() for _ in range(n)) for _ in range(n))


def test_criterion_5_determinant(verdict):
    rng = random.Random(5)
    worst, exact_ok = 0.0, True
    names = variables("a b c d")
    for _ in range(200):
        mat = _random_matrix(rng, rng.randint(1, 4))
        det = determinant(mat)
        state = {s: Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for s in names}
        # rational mode: exact agreement with sympy on the evaluated matrix
        ref = sp.Matrix([[sp.Rational(q.numerator, q.denominator) for q in row] for row in eval_matrix(mat, state, exact=True)]).det()
        got = eval_term(det, state, exact=True)
        exact_ok &= sp.Rational(got.numerator, got.denominator) == ref
        # float mode: numeric LU determinant
        fl = {s: float(q) for s, q in state.items()}
        lu = float(np.linalg.det(np.array(eval_matrix(mat, fl), dtype=float)))
        worst = max(worst, abs(eval_term(det, fl) - lu) / max(1.0, abs(lu)))
    ok = exact_ok and worst <= 1e-9
    verdict(5, "determinant", ok, f"200 matrices, exact={exact_ok}, max relative float gap {worst:.1e} (<= 1e-9)")


# ---------------------------------------------------------------- 6


def test_criterion_6_conservative_extension(verdict):
    rng = random.Random(6)
    bad = 0
    for _ in range(50):
        prog = random_program(rng, 4)
        fuel = rng.randint(0, 3)
        for _ in range(10):
            s0 = random_state(rng)
            bad += run_discrete(prog, s0, fuel) != run_relational(prog, s0, fuel)
    verdict(6, "conservative extension", bad == 0, f"50 programs x 10 states, {bad} disagreements")


# ---------------------------------------------------------------- 7


def test_criterion_7_pendulum_simulation(verdict):
    red = reduce(_system("pendulum.dal"), max_rounds=2, certify=False).reduced_system
    partial = {x: 0.6, y: 0.8, v: 1.0, m: 1.0, l: 1.0, g: 9.81}
    pos, vel = T("x^2 + y^2 - 1"), T("2*x*v + 2*y*w")
    t0 = time.perf_counter()
    s0 = consistent_init(red.equations, partial)
    trace = integrate_implicit(red, s0, 5.0, SimConfig(h=1e-3))
    elapsed = time.perf_counter() - t0
    d_pos, d_vel = constraint_drift(trace, [pos, vel])
    ref = integrate_implicit(red, s0, 5.0, SimConfig(h=1e-4))
    r_pos, r_vel = constraint_drift(ref, [pos, vel])
    # compare the two runs on the common grid
    gap = max(
        abs(trace.states[k][s] - ref.states[10 * k][s])
        for k in range(0, len(trace.states), 50)
        for s in (x, y, v, w)
    )
    ok = d_pos <= 1e-5 and d_vel <= 1e-4 and r_pos <= 1e-5 and r_vel <= 1e-4 and gap <= 1e-6 and elapsed < 10.0
    verdict(
        7,
        "pendulum simulation",
        ok,
        f"|x^2+y^2-1| {d_pos:.1e} (ref {r_pos:.1e}), |2xv+2yw| {d_vel:.1e} (ref {r_vel:.1e}), "
        f"state gap to h=1e-4 run {gap:.1e}, {elapsed:.2f}s (< 10s)",
    )


# ---------------------------------------------------------------- 8


def test_criterion_8_mutation_fuzzing(verdict):
    scripts = [load_script(p.read_text()) for p in sorted(FIXTURES.glob("*.dalproof"))]
    out = fuzz(scripts, 500, seed=8)
    ok = out["mutations"] == 500 and out["proved"] == 0
    verdict(
        8,
        "kernel mutation fuzzing",
        ok,
        f"{out['mutations']} mutations over {len(scripts)} scripts: proved {out['proved']}, "
        f"rejected {out['rejected']}, conditional {out['conditional']}",
    )


# ---------------------------------------------------------------- 9


def test_criterion_9_tactic_fidelity(verdict):
    xs = (x, y)
    f = F("x^2 + y^2 - 1 = 0")
    e = T("x^2 + y^2 - 1")
    got = {}
    got["dW"] = tactics.tac_dw(Sequent((), (Box(Dap(xs, f), F("x^2 + y^2 = 1")),)))
    r = And(f, F("x = x"))
    got["dA"] = tactics.tac_da(Sequent((), (Refines(Dap(xs, f), Dap(xs, r), xs),)), r)
    p = F("x^2 + y^2 - 1 <= 0")
    got["dI"] = tactics.tac_di(Sequent((), (mutual(Dap(xs, f), Dap(xs, And(f, p)), xs),)), (e,))
    dd = eq(Differential(e), ZERO)
    got["dHC"] = tactics.tac_dhc(Sequent((), (mutual(Dap(xs, f), Dap(xs, And(f, dd)), xs),)), (e,))
    want = {"dW": DW, "dA": DA, "dI": DI_LEFT + DI_RIGHT, "dHC": DHC_LEFT + DI_RIGHT}
    results = {k: tactics.rule_sequence(got[k]) == want[k] for k in want}
    f0 = F("x' = v & y' = w & x^2 + y^2 - 1 = 0")
    chain = [(e, ()), (T("x*v + y*w"), (v, w))]
    for k in range(3):
        systems = tactics.ir_systems(f0, chain[:k])
        goal = Sequent((), (mutual(Dap(xs, systems[-1]), Dap(xs, f0), xs),))
        root = tactics.tac_ir(goal, f0, chain[:k], systems=systems)
        results[f"IR m={k}"] = tactics.rule_sequence(root) == ir_golden(k)
    ok = all(results.values())
    verdict(9, "tactic fidelity", ok, ", ".join(f"{k} {'ok' if v_ else 'MISMATCH'}" for k, v_ in results.items()))
