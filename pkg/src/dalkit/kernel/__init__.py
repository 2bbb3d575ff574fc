"""Proof kernel: axiom schemas, rule application, scripts and the checker."""

from .axioms import AXIOMS, KindMismatch, UnknownAxiom, check_side_conditions, instantiate_axiom
from .checker import CheckConfig, CheckReport, NodeReport, check
from .rules import RuleError, apply_rule
from .script import ProofNode, ScriptError, dump_script, load_script

__all__ = [
    "AXIOMS",
    "CheckConfig",
    "CheckReport",
    "KindMismatch",
    "NodeReport",
    "ProofNode",
    "RuleError",
    "ScriptError",
    "UnknownAxiom",
    "apply_rule",
    "check",
    "check_side_conditions",
    "dump_script",
    "instantiate_axiom",
    "load_script",
]
