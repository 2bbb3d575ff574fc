"""Proof scripts and the ``.dalproof`` text format.

One record per node::

    (node 3 :goal "x = 1 |- x >= 1" :rule real :at  :inst {} :kids [])

Payloads are written in the ``.dal`` concrete grammar.  The root has id 0;
kids are listed by id and nodes may appear in any order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from ..parser import DalSyntaxError, parse
from ..printer import print_formula, print_matrix, print_program, print_sequent, print_term, print_vars, print_vector
from ..syntax import Sequent
from .axioms import AXIOMS
from .rules import STRUCTURAL


@dataclass
class ProofNode:
    goal: Sequent
    rule: str
    at: tuple[int, ...] = ()
    inst: dict = field(default_factory=dict)
    kids: list["ProofNode"] = field(default_factory=list)

    def walk(self) -> Iterator["ProofNode"]:
        yield self
        for k in self.kids:
            yield from k.walk()

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def rules(self) -> list[str]:
        """Rule ids in pre-order."""
        return [n.rule for n in self.walk()]


class ScriptError(ValueError):
    pass


def payload_kind(rule: str, key: str) -> str:
    if rule in AXIOMS:
        kinds = AXIOMS[rule].kinds
    elif rule in STRUCTURAL:
        kinds = STRUCTURAL[rule]
    else:
        raise ScriptError(f"unknown rule {rule!r}")
    if key not in kinds:
        raise ScriptError(f"rule {rule} has no payload {key!r}")
    return kinds[key]


_PRINTERS = {
    "term": print_term,
    "terms": print_vector,
    "matrix": print_matrix,
    "formula": print_formula,
    "program": print_program,
    "vars": print_vars,
    "var": str,
    "uvar": str,
    "rel": str,
}

_CATEGORY = {
    "term": "term",
    "terms": "vector",
    "matrix": "matrix",
    "formula": "formula",
    "program": "program",
    "vars": "vars",
    "var": "var",
    "uvar": "var",
}


def print_payload(kind: str, value) -> str:
    return _PRINTERS[kind](value)


def parse_payload(kind: str, text: str):
    text = text.strip()
    if kind == "rel":
        if text not in ("<=", "<"):
            raise ScriptError(f"bad relation {text!r}")
        return text
    return parse(text, _CATEGORY[kind])


# ---------------------------------------------------------------- writing


def dump_script(root: ProofNode) -> str:
    ids: dict[int, int] = {}
    order: list[ProofNode] = []
    for n in root.walk():
        ids[id(n)] = len(order)
        order.append(n)
    lines = []
    for n in order:
        inst = ", ".join(
            f"{k} = {print_payload(payload_kind(n.rule, k), v)}" for k, v in sorted(n.inst.items())
        )
        at = ",".join(str(i) for i in n.at)
        kids = " ".join(str(ids[id(k)]) for k in n.kids)
        lines.append(
            f'(node {ids[id(n)]} :goal "{print_sequent(n.goal)}" :rule {n.rule} '
            f":at {at} :inst {{{inst}}} :kids [{kids}])"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- reading


_HEAD = re.compile(r'\(node\s+(\d+)\s+:goal\s+"([^"]*)"\s+:rule\s+([A-Za-z_][A-Za-z0-9_]*)\s+:at\s*([0-9,\s]*?)\s*:inst\s*\{')


def _split_top(text: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    tail = text[start:]
    if tail.strip():
        parts.append(tail)
    return parts


def _matching_brace(text: str, start: int) -> int:
    depth = 0
    for i in range(start, len(text)):
        if text[i] in "([{":
            depth += 1
        elif text[i] in ")]}":
            depth -= 1
            if depth == 0:
                return i
    raise ScriptError("unbalanced braces in :inst")


def _strip_comments(text: str) -> str:
    return "\n".join(line.split(";;", 1)[0] for line in text.splitlines())


def load_script(text: str) -> ProofNode:
    text = _strip_comments(text)
    records: dict[int, tuple] = {}
    pos = 0
    while True:
        m = _HEAD.search(text, pos)
        if m is None:
            if text[pos:].strip():
                raise ScriptError(f"unparseable text near offset {pos}")
            break
        if text[pos : m.start()].strip():
            raise ScriptError(f"unparseable text near offset {pos}")
        nid, goal_text, rule, at_text = int(m.group(1)), m.group(2), m.group(3), m.group(4)
        brace = m.end() - 1
        close = _matching_brace(text, brace)
        inst_text = text[brace + 1 : close]
        rest = re.match(r"\s*:kids\s*\[([0-9\s]*)\]\s*\)", text[close + 1 :])
        if rest is None:
            raise ScriptError(f"node {nid}: malformed :kids")
        kid_ids = [int(k) for k in rest.group(1).split()]
        pos = close + 1 + rest.end()
        if nid in records:
            raise ScriptError(f"duplicate node id {nid}")
        try:
            goal = parse(goal_text, "sequent")
            at = tuple(int(a) for a in at_text.replace(",", " ").split())
            inst = {}
            for part in _split_top(inst_text):
                if "=" not in part:
                    raise ScriptError(f"node {nid}: payload without '='")
                key, payload = part.split("=", 1)
                key = key.strip()
                if key in inst:
                    raise ScriptError(f"node {nid}: duplicate payload {key}")
                inst[key] = parse_payload(payload_kind(rule, key), payload)
        except DalSyntaxError as exc:
            raise ScriptError(f"node {nid}: {exc}") from None
        records[nid] = (goal, rule, at, inst, kid_ids)
    if 0 not in records:
        raise ScriptError("script has no root node 0")
    built: dict[int, ProofNode] = {}
    visiting: set[int] = set()

    def build(nid: int) -> ProofNode:
        if nid in built:
            raise ScriptError(f"node {nid} is shared between parents")
        if nid in visiting:
            raise ScriptError(f"cycle through node {nid}")
        if nid not in records:
            raise ScriptError(f"missing node {nid}")
        visiting.add(nid)
        goal, rule, at, inst, kid_ids = records[nid]
        node = ProofNode(goal, rule, at, inst, [build(k) for k in kid_ids])
        built[nid] = node
        return node

    root = build(0)
    unused = set(records) - set(built)
    if unused:
        raise ScriptError(f"unreachable nodes {sorted(unused)}")
    return root
