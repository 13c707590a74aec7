"""Budgeted restricted disjunctive chase of ``{P_f(a)}``.

Scheduling is first-in-first-out over trigger discovery time, and every
trigger is re-checked for activity when it is dequeued, so a trigger can
only stay active as long as it waits in the queue.  Disjunctive triggers
split the branch; branches are explored depth-first and a branch stops
the moment ``contr`` appears.

The verdicts are conservative:

* ``all_contradictory``: every leaf of the explored derivation tree holds
  ``contr`` and no leaf was cut by a budget.
* ``witness``: some branch ran out of active triggers without ``contr``.
* ``budget_exhausted``: anything else.
"""
from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .formula import ModalFormula, PropAtom, modal_depth, parse_formula
from .instance import (
    CONTR, CONTR_ATOM, E, R, ROOT, Atom, Instance, Term, classify_shape, longest_path, term_str,
)
from .kripke import KripkeModel, QdpSet, check_qdps, force
from .rules import (
    FreshTerms, Rule, Trigger, build_rules, database, instantiate, is_active, label_pred,
    pred_formula, triggers_touching,
)

log = logging.getLogger(__name__)

OPEN, SATURATED, CONTRADICTORY = "open", "saturated", "contradictory"
ALL_CONTRADICTORY, WITNESS, BUDGET_EXHAUSTED = "all_contradictory", "witness", "budget_exhausted"


@dataclass(frozen=True)
class ChaseBudget:
    max_steps: int = 5000          # per branch
    max_branches: int = 512
    max_total_steps: int = 50_000  # across the whole derivation tree

    def __post_init__(self):
        if min(self.max_steps, self.max_branches, self.max_total_steps) < 1:
            raise ValueError("chase budgets must be positive")


@dataclass(frozen=True)
class TraceEntry:
    step: int
    branch: int
    rule: str
    at: tuple[Term, ...]
    disjunct: int
    added: tuple[Atom, ...]

    def __str__(self) -> str:
        at = ",".join(term_str(t) for t in self.at)
        added = ";".join(str(a) for a in self.added)
        return (f"step={self.step} branch={self.branch} rule={self.rule} at={at} "
                f"disjunct={self.disjunct} added={added}")

    def to_json(self) -> dict:
        return {
            "step": self.step, "branch": self.branch, "rule": self.rule,
            "at": [term_str(t) for t in self.at], "disjunct": self.disjunct,
            "added": [str(a) for a in self.added],
        }


@dataclass
class ChaseBranch:
    id: int
    instance: Instance
    status: str
    trace: list[TraceEntry] = field(default_factory=list)
    step_count: int = 0

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "step_count": self.step_count,
            "instance": self.instance.to_json(),
            "trace": [e.to_json() for e in self.trace],
        }


@dataclass
class ChaseResult:
    formula: ModalFormula
    qdps: QdpSet
    branches: list[ChaseBranch]
    verdict: str
    witness: Optional[int] = None  # index into ``branches``
    total_steps: int = 0

    @property
    def witness_branch(self) -> Optional[ChaseBranch]:
        return None if self.witness is None else self.branches[self.witness]

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": self.witness,
            "total_steps": self.total_steps,
            "branches": [b.to_json() for b in self.branches],
        }


# --------------------------------------------------------------------------
# working store

class _Store:
    """Mutable atom set with the query interface rule matching relies on."""

    def __init__(self):
        self.atoms: set[Atom] = set()
        self.terms: set[Term] = set()
        self._labels: dict[Term, set[str]] = {}
        self._out: dict[Term, dict[Term, set[str]]] = {}
        self._in: dict[Term, dict[Term, set[str]]] = {}
        self._by_label: dict[str, set[Term]] = {}

    def copy(self) -> "_Store":
        s = _Store()
        s.atoms = set(self.atoms)
        s.terms = set(self.terms)
        s._labels = {t: set(v) for t, v in self._labels.items()}
        s._out = {t: {u: set(p) for u, p in d.items()} for t, d in self._out.items()}
        s._in = {t: {u: set(p) for u, p in d.items()} for t, d in self._in.items()}
        s._by_label = {p: set(v) for p, v in self._by_label.items()}
        return s

    def add(self, a: Atom) -> bool:
        if a in self.atoms:
            return False
        self.atoms.add(a)
        self.terms.update(a.args)
        if len(a.args) == 1:
            self._labels.setdefault(a.args[0], set()).add(a.pred)
            self._by_label.setdefault(a.pred, set()).add(a.args[0])
        elif len(a.args) == 2:
            s, t = a.args
            self._out.setdefault(s, {}).setdefault(t, set()).add(a.pred)
            self._in.setdefault(t, {}).setdefault(s, set()).add(a.pred)
        return True

    def labels(self, t: Term):
        return self._labels.get(t, ())

    def out_edges(self, t: Term):
        return self._out.get(t, {})

    def in_edges(self, t: Term):
        return self._in.get(t, {})

    def with_label(self, pred: str):
        return self._by_label.get(pred, ())

    @property
    def has_contr(self) -> bool:
        return CONTR_ATOM in self.atoms

    def freeze(self) -> Instance:
        return Instance(self.atoms)


@dataclass
class _Frame:
    id: int
    store: _Store
    queue: deque
    seen: set
    fresh: FreshTerms
    trace: list
    steps: int


# --------------------------------------------------------------------------
# exploration

def chase_explore(
    f: ModalFormula,
    p: QdpSet = QdpSet(),
    budget: ChaseBudget = ChaseBudget(),
    *,
    stop_at_witness: bool = True,
    check_invariants: bool = False,
    on_step: Optional[Callable[[TraceEntry], None]] = None,
    start: Optional[Instance] = None,
    rules: Optional[list[Rule]] = None,
) -> ChaseResult:
    """Explore the disjunctive derivation tree of ``{P_f(a)}`` within ``budget``.

    ``start`` replaces the database and ``rules`` the rule set of ``f`` and
    ``p``; both exist for closing arbitrary instances under some rules.
    """
    rules = build_rules(f, p) if rules is None else list(rules)
    db = database(f) if start is None else start
    md = modal_depth(f)

    root = _Frame(0, _Store(), deque(), set(), FreshTerms.beyond(db.terms), [], 0)
    _add_atoms(root, list(db), rules)
    stack = [root]
    next_id = 1
    leaves: list[ChaseBranch] = []
    total = 0
    cut = False
    witness = None

    while stack:
        fr = stack.pop()
        status = None
        while status is None:
            if fr.store.has_contr:
                status = CONTRADICTORY
                break
            if fr.steps >= budget.max_steps or total >= budget.max_total_steps:
                status = OPEN
                break
            trig = _next_active(fr)
            if trig is None:
                status = SATURATED
                break
            n_heads = len(trig.rule.head)
            if n_heads > 1 and len(leaves) + len(stack) + n_heads > budget.max_branches:
                status = OPEN
                break
            # children are pushed in reverse so disjunct 0 is explored first
            children = []
            for k in range(n_heads):
                child = fr if k == 0 else _clone(fr, next_id + k - 1)
                children.append(child)
            next_id += n_heads - 1
            for k, child in enumerate(children):
                added = instantiate(trig, k, child.fresh)
                child.steps += 1
                entry = TraceEntry(child.steps, child.id, trig.rule.tag, trig.terms, k,
                                   tuple(a for a in added if a not in child.store.atoms))
                child.trace.append(entry)
                _add_atoms(child, added, rules)
                if on_step is not None:
                    on_step(entry)
                if check_invariants:
                    _assert_invariants(child.store, md)
            total += 1
            for child in reversed(children[1:]):
                stack.append(child)
        branch = ChaseBranch(fr.id, fr.store.freeze(), status, fr.trace, fr.steps)
        leaves.append(branch)
        if status == OPEN:
            cut = True
        if status == SATURATED and witness is None:
            witness = len(leaves) - 1
            if stop_at_witness:
                break

    if witness is None and stack:
        cut = True
    if witness is not None:
        verdict = WITNESS
    elif not cut and all(b.status == CONTRADICTORY for b in leaves):
        verdict = ALL_CONTRADICTORY
    else:
        verdict = BUDGET_EXHAUSTED
    log.debug("chase %s: %d branches, %d steps", verdict, len(leaves), total)
    return ChaseResult(f, p, leaves, verdict, witness, total)


def _clone(fr: _Frame, new_id: int) -> _Frame:
    return _Frame(new_id, fr.store.copy(), deque(fr.queue), set(fr.seen), fr.fresh.copy(),
                  list(fr.trace), fr.steps)


def _add_atoms(fr: _Frame, atoms: Iterable[Atom], rules: list[Rule]) -> None:
    new = [a for a in atoms if fr.store.add(a)]
    if not new or fr.store.has_contr:
        return
    for trig in triggers_touching(fr.store, rules, new):
        if trig not in fr.seen:
            fr.seen.add(trig)
            fr.queue.append(trig)


def _next_active(fr: _Frame) -> Optional[Trigger]:
    while fr.queue:
        trig = fr.queue.popleft()
        if is_active(trig, fr.store):
            return trig
    return None


def _assert_invariants(store: _Store, md: int) -> None:
    inst = store.freeze()
    shape = classify_shape(inst)
    if not (shape.is_rooted_dag and shape.root == ROOT):
        raise AssertionError("chase instance is not a DAG rooted at a")
    if longest_path(inst, frozenset({E})) > md:
        raise AssertionError("E-path longer than the modal depth")


# --------------------------------------------------------------------------
# branch utilities

def e_path_length(inst: Instance) -> int:
    """Length of the longest path of E atoms."""
    return longest_path(inst, frozenset({E}))


def check_e_path_bound(branch: ChaseBranch, n: int) -> bool:
    return e_path_length(branch.instance) <= n


def extract_model(branch: ChaseBranch) -> tuple[KripkeModel, int]:
    """Worlds are the branch's terms, R its R-atoms, V(p) the terms labelled ``P_p``."""
    if branch.status != SATURATED:
        raise ValueError(f"cannot extract a model from a {branch.status} branch")
    return instance_to_model(branch.instance)


def instance_to_model(inst: Instance) -> tuple[KripkeModel, int]:
    terms = sorted(inst.terms | {ROOT})
    index = {t: i for i, t in enumerate(terms)}
    rel = frozenset((index[a.args[0]], index[a.args[1]]) for a in inst.atoms if a.pred == R)
    val: dict[str, set[int]] = {}
    for a in inst.atoms:
        if len(a.args) == 1:
            g = pred_formula(a.pred)
            if isinstance(g, PropAtom):
                val.setdefault(g.name, set()).add(index[a.args[0]])
    model = KripkeModel(tuple(term_str(t) for t in terms), rel,
                        {k: frozenset(v) for k, v in val.items()})
    return model, index[ROOT]


def verify_witness(branch: ChaseBranch, f: ModalFormula, p: QdpSet) -> bool:
    model, w = extract_model(branch)
    return force(model, w, f) and check_qdps(model, p)


def replay(result: ChaseResult, branch: ChaseBranch) -> Instance:
    """Rebuild a branch instance from its trace alone."""
    inst = database(result.formula)
    for e in branch.trace:
        inst = inst.union(e.added)
    return inst


def result_json(result: ChaseResult) -> str:
    return json.dumps(result.to_json(), sort_keys=True)


__all__ = [
    "OPEN", "SATURATED", "CONTRADICTORY", "ALL_CONTRADICTORY", "WITNESS", "BUDGET_EXHAUSTED",
    "ChaseBudget", "TraceEntry", "ChaseBranch", "ChaseResult", "chase_explore",
    "e_path_length", "check_e_path_bound", "extract_model", "instance_to_model",
    "verify_witness", "replay", "result_json",
]
