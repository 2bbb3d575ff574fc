"""Command-line front end.

Exit codes: 0 success or proved, 1 rejected or falsified, 2 conditional
(external or assumed leaves), 3 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .groebner import Budget
from .kernel import CheckConfig, ScriptError, check, dump_script, load_script
from .kernel.checker import arithmetic_view
from .oracle import OracleConfig, export_smt
from .parser import DalSyntaxError, parse, parse_goal_file, parse_systems
from .printer import print_formula, print_sequent, print_term, pretty
from .reduction import DaeSystem, constraint_residuals, reduce
from .syntax import And, Box, Dap, Sequent, var
from .tactics import TacticError, graft, real_leaf, refl, refl_mutual, tac_da, tac_dhc, tac_di, tac_di_eq, tac_dw

EXIT_OK, EXIT_REJECTED, EXIT_CONDITIONAL, EXIT_USAGE = 0, 1, 2, 3
CLI_SCHEMA = "dalkit.cli-report/1"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    strategy: str = "syntactic"
    allow_external: bool = False
    allow_assumed: bool = False
    seed: int = 0
    out: str | None = None
    report: str | None = None

    def check_config(self) -> CheckConfig:
        oracle = OracleConfig(seed=self.seed, external="z3" if self.allow_external else None)
        return CheckConfig(oracle=oracle, permissive=self.allow_assumed)


def _status_code(status: str) -> int:
    return {"proved": EXIT_OK, "conditional": EXIT_CONDITIONAL}.get(status, EXIT_REJECTED)


def _worst(codes: Sequence[int]) -> int:
    # usage errors dominate, then rejection, then conditional
    for c in (EXIT_USAGE, EXIT_REJECTED, EXIT_CONDITIONAL):
        if c in codes:
            return c
    return EXIT_OK


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None


def _emit_report(cfg: RunConfig, body: dict) -> None:
    if cfg.report:
        payload = {"schema": CLI_SCHEMA, "command": cfg.command, **body}
        _write(cfg.report, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_system(path: str, name: str | None) -> DaeSystem:
    decls = parse_systems(_read(path))
    if not decls:
        raise UsageError(f"{path}: no system declarations")
    if name is None:
        return DaeSystem.from_decl(decls[0])
    for d in decls:
        if d.name == name:
            return DaeSystem.from_decl(d)
    raise UsageError(f"{path}: no system named {name!r}")


def _parse_assignments(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise UsageError(f"bad assignment {part!r} (expected name=value)")
        name, value = (s.strip() for s in part.split("=", 1))
        try:
            out[var(name)] = float(Fraction(value))
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"bad value for {name}: {value!r}") from None
    return out


# ---------------------------------------------------------------- subcommands


def cmd_parse(args, cfg: RunConfig) -> int:
    text = _read(args.file)
    if args.category == "auto":
        if Path(args.file).suffix == ".dalproof":
            root = load_script(text)
            print(f"proof script: {root.size()} nodes")
            print(print_sequent(root.goal))
            body = {"kind": "script", "nodes": root.size(), "goal": print_sequent(root.goal)}
        elif "system" in text.split():
            decls = parse_systems(text)
            for d in decls:
                print(f"{d.name}: " + print_formula(DaeSystem.from_decl(d).formula()))
            body = {"kind": "systems", "systems": [d.name for d in decls]}
        else:
            seq = parse_goal_file(text)
            print(print_sequent(seq))
            body = {"kind": "goal", "goal": print_sequent(seq)}
    else:
        node = parse(text, args.category)
        shown = print_sequent(node) if isinstance(node, Sequent) else pretty(node)
        print(shown)
        body = {"kind": args.category, "printed": shown}
    _emit_report(cfg, {"input": args.file, **body})
    return EXIT_OK


def cmd_check(args, cfg: RunConfig) -> int:
    entries, codes = [], []
    for path in args.files:
        try:
            root = load_script(_read(path))
        except (ScriptError, DalSyntaxError) as exc:
            print(f"{path}: unreadable script: {exc}", file=sys.stderr)
            entries.append({"input": path, "status": "rejected", "error": str(exc)})
            codes.append(EXIT_REJECTED)
            continue
        rep = check(root, cfg.check_config())
        print(f"{path}: {rep.status} ({len(rep.nodes)} nodes, real leaves {rep.leaf_tiers()})")
        for n in rep.failures():
            print(f"  node {n.id} [{n.rule}] {n.verdict}: {n.detail}", file=sys.stderr)
        entries.append({"input": path, **rep.to_json()})
        codes.append(_status_code(rep.status))
    _emit_report(cfg, {"files": entries})
    return _worst(codes)


def cmd_reduce(args, cfg: RunConfig) -> int:
    dae = _load_system(args.file, args.system)
    res = reduce(
        dae,
        max_rounds=args.rounds,
        strategy=cfg.strategy,
        budget=Budget(),
        certify=not args.no_cert,
        oracle=cfg.check_config().oracle,
    )
    print(f"system {dae.name}: {len(res.rounds)} round(s), stopped: {res.stopped}")
    for k, rnd in enumerate(res.rounds, 1):
        for rw in rnd.rewrites:
            mult = "" if rw.multiplier.is_const() else f"  (multiplier {print_term(rw.multiplier.to_term())})"
            print(f"  round {k}: {print_term(rw.reduced.to_term())} = 0{mult}")
    print(f"  closure: {res.closure.status}  det = {print_term(res.closure.det) if res.closure.det is not None else '-'}")
    if res.closure.parameter_condition is not None:
        print(f"  parameter condition: {print_formula(res.closure.parameter_condition)}")
    print(f"  gamma: {print_formula(res.gamma)}")
    print(f"  certificate: {res.certificate_status}")
    if args.emit_cert:
        if res.certificate is None:
            raise UsageError("--emit-cert needs the certificate (drop --no-cert)")
        _write(args.emit_cert, dump_script(res.certificate))
    _emit_report(cfg, {"input": args.file, "reduction": res.to_json()})
    if res.certificate_report is None:
        return EXIT_OK
    return _status_code(res.certificate_status)


_TACTICS = ("dw", "da", "di", "di-eq", "dhc", "refl", "real")


def _close_leaf(goal: Sequent):
    """Open premises: a box over a DAE goes through dW first, the rest to the oracle."""
    for i, f in enumerate(goal.succedent):
        if isinstance(f, Box) and isinstance(f.program, Dap):
            return tac_dw(goal, i, real_leaf)
    return real_leaf(goal)


def cmd_prove(args, cfg: RunConfig) -> int:
    goal = parse_goal_file(_read(args.file))
    terms = tuple(parse(args.terms, "vector")) if args.terms else ()
    params = tuple(parse(args.params, "vars")) if args.params else ()
    i = args.at
    try:
        match args.tactic:
            case "dw":
                root = tac_dw(goal, i)
            case "da":
                if not args.formula:
                    raise UsageError("--tactic da needs --formula")
                root = tac_da(goal, parse(args.formula, "formula"), i)
            case "di":
                root = tac_di(goal, terms, i, args.rel, params)
            case "di-eq":
                if len(terms) != 1:
                    raise UsageError("--tactic di-eq needs one term in --terms")
                root = tac_di_eq(goal, terms[0], i, params)
            case "dhc":
                root = tac_dhc(goal, terms, i, params)
            case "refl":
                root = refl_mutual(goal, i) if isinstance(goal.succedent[i], And) else refl(goal, i)
            case "real":
                root = real_leaf(goal)
    except TacticError as exc:
        print(f"tactic {args.tactic} does not apply: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    root = graft(root, _close_leaf)
    rep = check(root, cfg.check_config())
    print(f"{args.file}: {rep.status} ({len(rep.nodes)} nodes, real leaves {rep.leaf_tiers()})")
    if cfg.out:
        _write(cfg.out, dump_script(root))
    _emit_report(cfg, {"input": args.file, "tactic": args.tactic, "check": rep.to_json()})
    return _status_code(rep.status)


def cmd_simulate(args, cfg: RunConfig) -> int:
    from .tracelab import (
        JacobianDegenerate,
        NoConvergence,
        SimConfig,
        SingularJacobian,
        constraint_drift,
        consistent_init,
        integrate_implicit,
    )

    dae = _load_system(args.file, args.system)
    res = reduce(dae, max_rounds=args.rounds, strategy=cfg.strategy, certify=False)
    red = res.reduced_system
    constraints = constraint_residuals(res)
    sim = SimConfig(h=args.h, seed=cfg.seed)
    partial = _parse_assignments(args.init or "")
    try:
        state0 = consistent_init(constraints, partial, sim)
        trace = integrate_implicit(red, state0, args.T, sim)
    except (SingularJacobian, NoConvergence, JacobianDegenerate) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        _emit_report(cfg, {"input": args.file, "status": "failed", "error": str(exc)})
        return EXIT_REJECTED
    drift = constraint_drift(trace, constraints)
    csv = trace.to_csv(red.state_vars)
    if cfg.out:
        _write(cfg.out, csv)
    else:
        sys.stdout.write(csv)
    summary = {print_term(c): d for c, d in zip(constraints, drift)}
    for c, d in summary.items():
        print(f"drift {c}: {d:.3e}", file=sys.stderr)
    _emit_report(
        cfg,
        {
            "input": args.file,
            "status": "ok",
            "steps": len(trace.times) - 1,
            "h": args.h,
            "T": args.T,
            "initial_state": {str(v): x for v, x in sorted(state0.items(), key=lambda kv: str(kv[0]))},
            "drift": summary,
            "note": "sampled evidence only, not a proof",
        },
    )
    return EXIT_OK


def _random_poly_terms(count: int, seed: int) -> list:
    from .polynomial import Poly, Ring

    rng = np.random.default_rng(seed)
    xs = [var(n) for n in ("x", "y", "z")]
    out = []
    for _ in range(count):
        k = int(rng.integers(1, 4))
        ring = Ring(xs[:k])
        terms = {}
        for _ in range(int(rng.integers(1, 6))):
            exps = [0] * k
            for _ in range(int(rng.integers(0, 5))):
                exps[int(rng.integers(0, k))] += 1
            terms[tuple(exps)] = Fraction(int(rng.integers(-10, 11)))
        out.append(Poly(ring, {m: c for m, c in terms.items() if c}).to_term())
    return out


def cmd_lemma_test(args, cfg: RunConfig) -> int:
    from .analysis import free_vars
    from .tracelab import check_differential_lemma, spline_trace

    jobs = []
    for path in args.files:
        lines = [ln.strip() for ln in _read(path).splitlines()]
        jobs.append((path, [parse(ln, "term") for ln in lines if ln and not ln.startswith(";;")]))
    if args.random:
        jobs.append((f"random:{args.random}", _random_poly_terms(args.random, cfg.seed)))
    entries, worst_all = [], 0.0
    for k, (src, terms) in enumerate(jobs):
        devs = []
        for j, e in enumerate(terms):
            vs = sorted(free_vars(e), key=str)
            tr = spline_trace(vs, seed=cfg.seed + 1000 * k + j)
            devs.append(check_differential_lemma(e, tr, args.h))
        worst = max(devs, default=0.0)
        worst_all = max(worst_all, worst)
        print(f"{src}: {len(terms)} term(s), max relative deviation {worst:.3e}")
        entries.append({"input": src, "terms": len(terms), "max_deviation": worst})
    ok = worst_all <= args.tol
    _emit_report(cfg, {"files": entries, "tolerance": args.tol, "status": "ok" if ok else "falsified"})
    return EXIT_OK if ok else EXIT_REJECTED


def cmd_export_smt(args, cfg: RunConfig) -> int:
    goal = parse_goal_file(_read(args.file))
    text = export_smt(arithmetic_view(goal))
    if cfg.out:
        _write(cfg.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", metavar="PATH", help="write a JSON report")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--oracle", choices=("strict", "permissive"), default="strict")
    common.add_argument("--external", action="store_true", help="allow the z3 tier for arithmetic leaves")
    common.add_argument("--strategy", choices=("syntactic", "elimination"), default="syntactic")
    common.add_argument("--out", metavar="PATH")

    ap = argparse.ArgumentParser(prog="dalkit", description="Differential-algebraic proof tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse and pretty-print a file")
    p.add_argument("file")
    p.add_argument(
        "--category",
        default="auto",
        choices=("auto", "term", "formula", "program", "sequent", "vector", "matrix", "vars"),
    )

    p = sub.add_parser("check", parents=[common], help="check .dalproof scripts")
    p.add_argument("files", nargs="+")

    p = sub.add_parser("reduce", parents=[common], help="index-reduce a system")
    p.add_argument("file")
    p.add_argument("--system")
    p.add_argument("--rounds", type=int, default=8)
    p.add_argument("--emit-cert", metavar="PATH")
    p.add_argument("--no-cert", action="store_true")

    p = sub.add_parser("prove", parents=[common], help="run a tactic on a goal file")
    p.add_argument("file")
    p.add_argument("--tactic", choices=_TACTICS, required=True)
    p.add_argument("--at", type=int, default=0, help="succedent position")
    p.add_argument("--terms", help="term vector such as [x^2 - 1]")
    p.add_argument("--params", help="parameter list such as [m, g]")
    p.add_argument("--formula", help="relaxation R for da")
    p.add_argument("--rel", choices=("<=", "<"), default="<=")

    p = sub.add_parser("simulate", parents=[common], help="reduce, initialise and integrate a system")
    p.add_argument("file")
    p.add_argument("--system")
    p.add_argument("--rounds", type=int, default=8)
    p.add_argument("--init", help="partial initial state, e.g. x=0.6,y=0.8")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--T", type=float, default=1.0)

    p = sub.add_parser("lemma-test", parents=[common], help="finite-difference check of differentials")
    p.add_argument("files", nargs="*")
    p.add_argument("--random", type=int, default=0, help="also test N random polynomials")
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("export-smt", parents=[common], help="SMT-LIB encoding of an arithmetic goal")
    p.add_argument("file")
    return ap


_COMMANDS = {
    "parse": cmd_parse,
    "check": cmd_check,
    "reduce": cmd_reduce,
    "prove": cmd_prove,
    "simulate": cmd_simulate,
    "lemma-test": cmd_lemma_test,
    "export-smt": cmd_export_smt,
}


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    cfg = RunConfig(
        command=args.command,
        inputs=[a for a in (getattr(args, "file", None),) if a] + list(getattr(args, "files", []) or []),
        strategy=args.strategy,
        allow_external=args.external,
        allow_assumed=args.oracle == "permissive",
        seed=args.seed,
        out=args.out,
        report=args.report,
    )
    try:
        return _COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"dalkit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DalSyntaxError, ScriptError, ValueError) as exc:
        print(f"dalkit: {exc}", file=sys.stderr)
        return EXIT_REJECTED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
