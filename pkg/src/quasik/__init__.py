"""Decision procedures for modal logics of quasi-dense frames."""
from __future__ import annotations

from .chase import ChaseBudget, ChaseResult, chase_explore, extract_model
from .decision import DecisionBudget, DecisionOutcome, decide, sat, verify_certificate
from .formula import ModalFormula, negate, parse_formula, to_text
from .instance import Atom, Instance
from .kripke import KripkeModel, Qdp, QdpSet, brute_force_sat, check_qdp, force, k_tree_sat
from .rules import build_rules
from .template import Template, TemplateSearchBudget, search_template, verify_template
from .treeops import Parameters, unravel

__version__ = "0.1.0"

__all__ = [
    "ChaseBudget", "ChaseResult", "chase_explore", "extract_model",
    "DecisionBudget", "DecisionOutcome", "decide", "sat", "verify_certificate",
    "ModalFormula", "negate", "parse_formula", "to_text", "Atom", "Instance",
    "KripkeModel", "Qdp", "QdpSet", "brute_force_sat", "check_qdp", "force", "k_tree_sat",
    "build_rules", "Template", "TemplateSearchBudget", "search_template", "verify_template",
    "Parameters", "unravel",
]
