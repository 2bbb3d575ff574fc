"""The trusted checker: walks a proof script and judges every node."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ..analysis import has_modality, map_terms
from ..calculus import expand_differentials
from ..oracle import OracleConfig, Verdict, discharge
from ..polynomial import NestedDifferential, PrimedInput
from ..printer import print_sequent
from ..syntax import Sequent
from .rules import RuleError, apply_rule, same
from .script import ProofNode

REPORT_SCHEMA = "dalkit.check-report/1"

ACCEPTED = "accepted"
# verdicts that make the whole script rejected
REJECTING = frozenset({"mismatch", "side-condition-failure", "unknown-rule", "kind-error", "falsified", "unknown", "open"})
CONDITIONAL = frozenset({"external", "assumed"})


@dataclass(frozen=True)
class CheckConfig:
    oracle: OracleConfig = field(default_factory=OracleConfig)
    permissive: bool = False  # allow assumed leaves (status becomes conditional)


@dataclass
class NodeReport:
    id: int
    rule: str
    verdict: str
    detail: str = ""
    oracle: dict | None = None

    def to_json(self) -> dict:
        out = {"id": self.id, "rule": self.rule, "verdict": self.verdict}
        if self.detail:
            out["detail"] = self.detail
        if self.oracle is not None:
            out["oracle"] = self.oracle
        return out


@dataclass
class CheckReport:
    status: str
    nodes: list[NodeReport]

    @property
    def proved(self) -> bool:
        return self.status == "proved"

    def failures(self) -> list[NodeReport]:
        return [n for n in self.nodes if n.verdict in REJECTING]

    def leaf_tiers(self) -> dict[str, int]:
        tiers = Counter()
        for n in self.nodes:
            if n.rule == "real":
                tiers[n.oracle.get("method", n.verdict) if n.oracle else n.verdict] += 1
        return dict(sorted(tiers.items()))

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "status": self.status,
            "node_count": len(self.nodes),
            "real_leaves": self.leaf_tiers(),
            "nodes": [n.to_json() for n in self.nodes],
        }


_KIND_VERDICT = {
    "mismatch": "mismatch",
    "side-condition": "side-condition-failure",
    "unknown-rule": "unknown-rule",
    "kind": "kind-error",
}


def arithmetic_view(goal: Sequent) -> Sequent:
    """Drop modal formulas (weakening) and expand differentials."""

    def conv(fs):
        out = []
        for f in fs:
            if has_modality(f):
                continue
            try:
                out.append(map_terms(f, expand_differentials))
            except (PrimedInput, NestedDifferential):
                continue
        return tuple(out)

    return Sequent(conv(goal.antecedent), conv(goal.succedent))


def _judge_real(goal: Sequent, cfg: CheckConfig) -> tuple[str, str, dict]:
    verdict: Verdict = discharge(arithmetic_view(goal), cfg.oracle)
    info = verdict.to_json()
    if verdict.kind == "valid":
        if verdict.method == "ideal-membership":
            return ACCEPTED, "", info
        return "external", verdict.detail, info
    if verdict.kind == "falsified":
        return "falsified", "counterexample found", info
    if cfg.permissive:
        return "assumed", verdict.detail, {**info, "method": "assumed"}
    return "unknown", verdict.detail, info


def check(root: ProofNode, cfg: CheckConfig = CheckConfig()) -> CheckReport:
    reports: list[NodeReport] = []
    for nid, node in enumerate(root.walk()):
        reports.append(_check_node(nid, node, cfg))
    verdicts = {r.verdict for r in reports}
    if verdicts & REJECTING:
        status = "rejected"
    elif verdicts & CONDITIONAL:
        status = "conditional"
    else:
        status = "proved"
    return CheckReport(status, reports)


def _check_node(nid: int, node: ProofNode, cfg: CheckConfig) -> NodeReport:
    try:
        premises = apply_rule(node.goal, node.rule, node.at, node.inst)
    except RuleError as exc:
        return NodeReport(nid, node.rule, _KIND_VERDICT[exc.kind], str(exc))
    except Exception as exc:  # malformed payloads must never crash the checker
        return NodeReport(nid, node.rule, "mismatch", f"{type(exc).__name__}: {exc}")
    if len(premises) != len(node.kids):
        return NodeReport(
            nid, node.rule, "mismatch", f"rule yields {len(premises)} premise(s), script has {len(node.kids)}"
        )
    for k, (prem, kid) in enumerate(zip(premises, node.kids)):
        if not same(prem, kid.goal):
            return NodeReport(
                nid,
                node.rule,
                "mismatch",
                f"premise {k} is {print_sequent(prem)!r}, script says {print_sequent(kid.goal)!r}",
            )
    if node.rule == "real":
        verdict, detail, info = _judge_real(node.goal, cfg)
        return NodeReport(nid, node.rule, verdict, detail, info)
    if node.rule == "open":
        if cfg.permissive:
            return NodeReport(nid, node.rule, "assumed", "open premise assumed")
        return NodeReport(nid, node.rule, "open", "open premise")
    return NodeReport(nid, node.rule, ACCEPTED)
