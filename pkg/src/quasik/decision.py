"""Membership in L(P) and P-satisfiability by composing the oracle, the chase
and the template search.

``candidate`` is a theorem of L(P) iff its negation has no P-model.  The
stages run cheapest first and stop at the first conclusive answer:

1. small-model search (a model refutes);
2. the chase (all branches contradictory proves, a saturated branch refutes);
3. template search (found refutes, an authoritative exhaustion proves).

Anything left over is ``unknown``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .chase import (
    ALL_CONTRADICTORY, WITNESS, ChaseBudget, ChaseResult, chase_explore, replay,
)
from .formula import ModalFormula, negate
from .kripke import KripkeModel, QdpSet, brute_force_sat, check_qdps, force
from .template import (
    EXHAUSTED, FOUND, Template, TemplateSearchBudget, estimate_search_space, recheck_certificate,
    search_template, template_from_chase, verify_template,
)

THEOREM, NON_THEOREM, UNKNOWN = "theorem", "non_theorem", "unknown"
SATISFIABLE, UNSATISFIABLE = "satisfiable", "unsatisfiable"

MODEL, TEMPLATE, TRACE, EXHAUSTION, NONE = "model", "template", "trace", "exhaustion", "none"


@dataclass(frozen=True)
class DecisionBudget:
    oracle_worlds: int = 4
    chase: ChaseBudget = ChaseBudget()
    template: TemplateSearchBudget = TemplateSearchBudget(space_ceiling=1e12)


@dataclass
class Certificate:
    kind: str
    payload: Any = None
    world: Optional[int] = None  # for model certificates

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == MODEL:
            out["model"] = self.payload.to_json()
            out["world"] = self.world
        elif self.kind == TEMPLATE:
            out["template"] = self.payload.to_json()
        elif self.kind == TRACE:
            out["chase"] = self.payload.to_json()
        elif self.kind == EXHAUSTION:
            out["search"] = self.payload
        return out


@dataclass
class DecisionOutcome:
    verdict: str
    certificate: Certificate
    formula: ModalFormula          # the formula whose satisfiability was examined
    qdps: QdpSet
    stage: str = ""
    resources: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        from .formula import to_text
        return {
            "verdict": self.verdict,
            "stage": self.stage,
            "examined": to_text(self.formula),
            "qdps": [str(q) for q in self.qdps],
            "certificate": self.certificate.to_json(),
            "resources": self.resources,
        }


def _examine(g: ModalFormula, p: QdpSet, budget: DecisionBudget, on_step=None) -> tuple[Optional[bool], Certificate, str, dict]:
    """Satisfiability of ``g``: True, False, or None when inconclusive."""
    res: dict = {}
    t0 = time.perf_counter()

    found = brute_force_sat(g, p, budget.oracle_worlds)
    res["oracle_seconds"] = round(time.perf_counter() - t0, 6)
    if found is not None:
        model, w = found
        return True, Certificate(MODEL, model, w), "oracle", res

    t1 = time.perf_counter()
    chase = chase_explore(g, p, budget.chase, on_step=on_step)
    res["chase_steps"] = chase.total_steps
    res["chase_branches"] = len(chase.branches)
    res["chase_seconds"] = round(time.perf_counter() - t1, 6)
    if chase.verdict == ALL_CONTRADICTORY:
        return False, Certificate(TRACE, chase), "chase", res
    if chase.verdict == WITNESS:
        t = template_from_chase(chase.witness_branch, g, p)
        if t is not None:
            return True, Certificate(TEMPLATE, t), "chase", res

    t2 = time.perf_counter()
    search = search_template(g, p, budget.template)
    res["template_candidates"] = search.candidates
    res["template_seconds"] = round(time.perf_counter() - t2, 6)
    res["search_space_estimate"] = _finite(estimate_search_space(g, p))
    if search.status == FOUND:
        return True, Certificate(TEMPLATE, search.template), "template", res
    if search.status == EXHAUSTED and search.authoritative:
        report = {"status": search.status, "candidates": search.candidates, "stage": search.stage}
        return False, Certificate(EXHAUSTION, report), "template", res
    res["note"] = search.note
    return None, Certificate(NONE), "template", res


def _finite(x: float):
    return x if x != float("inf") else "inf"


def decide(candidate: ModalFormula, p: QdpSet = QdpSet(), budget: DecisionBudget = DecisionBudget(),
           on_step: Optional[Callable] = None) -> DecisionOutcome:
    """Is ``candidate`` valid on every P-frame?"""
    g = negate(candidate)
    sat_g, cert, stage, res = _examine(g, p, budget, on_step)
    verdict = UNKNOWN if sat_g is None else (NON_THEOREM if sat_g else THEOREM)
    return DecisionOutcome(verdict, cert, g, p, stage, res)


def sat(f: ModalFormula, p: QdpSet = QdpSet(), budget: DecisionBudget = DecisionBudget(),
        on_step: Optional[Callable] = None) -> DecisionOutcome:
    """Is ``f`` forced at some world of some P-model?"""
    sat_f, cert, stage, res = _examine(f, p, budget, on_step)
    verdict = UNKNOWN if sat_f is None else (SATISFIABLE if sat_f else UNSATISFIABLE)
    return DecisionOutcome(verdict, cert, f, p, stage, res)


def verify_certificate(out: DecisionOutcome) -> bool:
    """Re-check an outcome's certificate with the producing module's checker."""
    c = out.certificate
    if c.kind == MODEL:
        m: KripkeModel = c.payload
        return force(m, c.world, out.formula) and check_qdps(m, out.qdps)
    if c.kind == TEMPLATE:
        t: Template = c.payload
        ok = verify_template(t.tree, out.formula, out.qdps)
        return isinstance(ok, Template) and not t.has_contr and recheck_certificate(t)
    if c.kind == TRACE:
        chase: ChaseResult = c.payload
        return (chase.verdict == ALL_CONTRADICTORY
                and all(replay(chase, b).has_contr for b in chase.branches))
    if c.kind == EXHAUSTION:
        return c.payload.get("status") == EXHAUSTED
    return True


__all__ = [
    "THEOREM", "NON_THEOREM", "UNKNOWN", "SATISFIABLE", "UNSATISFIABLE",
    "MODEL", "TEMPLATE", "TRACE", "EXHAUSTION", "NONE",
    "DecisionBudget", "Certificate", "DecisionOutcome", "decide", "sat", "verify_certificate",
]
