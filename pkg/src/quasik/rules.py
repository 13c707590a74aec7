"""Disjunctive existential rules for a modal formula and its QDPs.

Rule variables are plain strings; a match (body homomorphism) maps them to
instance terms.  Matching is a small nested-loop join over the adjacency
indexes, which works on both :class:`~quasik.instance.Instance` and the
chase's mutable store since only the query methods are used.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .formula import (
    And, Box, Diamond, ModalFormula, Or, SubformulaIndex, negate, parse_formula, to_text,
)
from .instance import CONTR, CONTR_ATOM, E, R, Atom, Instance, Term, term_str
from .kripke import Qdp, QdpSet

# rule kinds, in the order the formula rules are listed
CONJ, DISJ, BOX, DIA, CONTR_KIND, QDP = "i", "ii", "iii", "iv", "v", "qdp"


def compact(f: ModalFormula) -> str:
    return to_text(f).replace(" ", "")


def label_pred(f: ModalFormula) -> str:
    """Unary predicate ``P_<formula>`` standing for ``f``."""
    return "P_" + compact(f)


def pred_formula(pred: str) -> Optional[ModalFormula]:
    if not pred.startswith("P_"):
        return None
    return parse_formula(pred[2:])


@dataclass(frozen=True)
class RuleAtom:
    pred: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(self.args)})"


@dataclass(frozen=True)
class Disjunct:
    atoms: tuple[RuleAtom, ...]
    existentials: tuple[str, ...] = ()

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.atoms)
        if self.existentials:
            return f"exists {','.join(self.existentials)}. {body}"
        return body


@dataclass(frozen=True)
class Rule:
    body: tuple[RuleAtom, ...]
    head: tuple[Disjunct, ...]
    kind: str
    tag: str

    def __post_init__(self):
        if not self.head:
            raise ValueError("a rule needs at least one head disjunct")
        body_vars = self.body_vars
        for d in self.head:
            if set(d.existentials) & set(body_vars):
                raise ValueError(f"{self.tag}: existential variable clashes with the body")
            for a in d.atoms:
                for v in a.args:
                    if v not in body_vars and v not in d.existentials:
                        raise ValueError(f"{self.tag}: unbound head variable {v}")

    @property
    def body_vars(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.body:
            for v in a.args:
                seen.setdefault(v, None)
        return tuple(seen)

    @property
    def is_disjunctive(self) -> bool:
        return len(self.head) > 1

    @property
    def is_datalog(self) -> bool:
        return all(not d.existentials for d in self.head)

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.body)
        return f"{body} -> {' | '.join(str(d) for d in self.head)}."


@dataclass(frozen=True)
class Trigger:
    rule: Rule
    assignment: tuple[tuple[str, Term], ...]

    @property
    def mapping(self) -> dict[str, Term]:
        return dict(self.assignment)

    @property
    def terms(self) -> tuple[Term, ...]:
        return tuple(t for _, t in self.assignment)

    def sort_key(self):
        return (self.rule.tag, self.terms)

    def __str__(self) -> str:
        at = ",".join(f"{v}={term_str(t)}" for v, t in self.assignment)
        return f"{self.rule.tag}@{at}"


def make_trigger(rule: Rule, h: Mapping[str, Term]) -> Trigger:
    return Trigger(rule, tuple((v, h[v]) for v in rule.body_vars))


# --------------------------------------------------------------------------
# rule construction

def build_formula_rules(f: ModalFormula) -> list[Rule]:
    """The rule set of ``f``: one rule per connective occurrence plus contr pairs."""
    index = SubformulaIndex(f)
    rules: list[Rule] = []
    x, y = "x", "y"
    for g in index:
        pg = label_pred(g)
        if isinstance(g, And):
            rules.append(Rule(
                (RuleAtom(pg, (x,)),),
                (Disjunct((RuleAtom(label_pred(g.left), (x,)), RuleAtom(label_pred(g.right), (x,)))),),
                CONJ, f"{CONJ}:{compact(g)}",
            ))
        elif isinstance(g, Or):
            rules.append(Rule(
                (RuleAtom(pg, (x,)),),
                (Disjunct((RuleAtom(label_pred(g.left), (x,)),)),
                 Disjunct((RuleAtom(label_pred(g.right), (x,)),))),
                DISJ, f"{DISJ}:{compact(g)}",
            ))
        elif isinstance(g, Box):
            rules.append(Rule(
                (RuleAtom(pg, (x,)), RuleAtom(R, (x, y))),
                (Disjunct((RuleAtom(label_pred(g.inner), (y,)),)),),
                BOX, f"{BOX}:{compact(g)}",
            ))
        elif isinstance(g, Diamond):
            rules.append(Rule(
                (RuleAtom(pg, (x,)),),
                (Disjunct((RuleAtom(R, (x, y)), RuleAtom(E, (x, y)),
                           RuleAtom(label_pred(g.inner), (y,))), (y,)),),
                DIA, f"{DIA}:{compact(g)}",
            ))
    # contr rules: each unordered {g, negate(g)} pair, both present, once
    for g in index:
        ng = negate(g)
        if ng in index and index.ordinal[g] < index.ordinal[ng]:
            rules.append(Rule(
                (RuleAtom(label_pred(g), (x,)), RuleAtom(label_pred(ng), (x,))),
                (Disjunct((RuleAtom(CONTR),)),),
                CONTR_KIND, f"{CONTR_KIND}:{compact(g)}",
            ))
    return rules


def qdp_to_rule(q: Qdp) -> Rule:
    """``R^k(x,y) -> exists z. R^k_plus(x,y)`` as a single-head chain rule."""
    body_nodes = ["x"] + [f"y{i}" for i in range(1, q.k)] + ["y"]
    head_nodes = ["x"] + [f"z{i}" for i in range(1, q.k_plus)] + ["y"]
    body = tuple(RuleAtom(R, (body_nodes[i], body_nodes[i + 1])) for i in range(q.k))
    head = tuple(RuleAtom(R, (head_nodes[i], head_nodes[i + 1])) for i in range(q.k_plus))
    return Rule(body, (Disjunct(head, tuple(head_nodes[1:-1])),), QDP, f"{QDP}:{q}")


def build_rules(f: ModalFormula, p: QdpSet = QdpSet()) -> list[Rule]:
    return build_formula_rules(f) + [qdp_to_rule(q) for q in p]


def signature(f: ModalFormula) -> frozenset[str]:
    return frozenset(label_pred(g) for g in SubformulaIndex(f)) | {R, E, CONTR}


def database(f: ModalFormula) -> Instance:
    return Instance([Atom(label_pred(f), (("a",),))])


# --------------------------------------------------------------------------
# matching

def _join(atoms: Sequence[RuleAtom], inst, h: dict[str, Term]) -> Iterator[dict[str, Term]]:
    """All extensions of ``h`` mapping ``atoms`` into ``inst`` (depth-first)."""
    if not atoms:
        yield h
        return
    a, rest = atoms[0], atoms[1:]
    if not a.args:
        if Atom(a.pred, ()) in inst.atoms:
            yield from _join(rest, inst, h)
        return
    if len(a.args) == 1:
        v = a.args[0]
        if v in h:
            if a.pred in inst.labels(h[v]):
                yield from _join(rest, inst, h)
            return
        for t in sorted(inst.with_label(a.pred)):
            h[v] = t
            yield from _join(rest, inst, h)
            del h[v]
        return
    u, v = a.args
    if u in h and v in h:
        if a.pred in inst.out_edges(h[u]).get(h[v], ()):
            yield from _join(rest, inst, h)
        return
    if u in h:
        cands = [(h[u], t) for t, ps in inst.out_edges(h[u]).items() if a.pred in ps]
    elif v in h:
        cands = [(s, h[v]) for s, ps in inst.in_edges(h[v]).items() if a.pred in ps]
    else:
        cands = [(s, t) for s in inst.terms for t, ps in inst.out_edges(s).items() if a.pred in ps]
    for s, t in sorted(cands):
        if u == v and s != t:
            continue
        bound = [w for w in dict.fromkeys((u, v)) if w not in h]
        h[u], h[v] = s, t
        yield from _join(rest, inst, h)
        for w in bound:
            del h[w]


def body_matches(rule: Rule, inst, seed: Optional[Mapping[str, Term]] = None) -> Iterator[dict[str, Term]]:
    for h in _join(rule.body, inst, dict(seed or {})):
        yield dict(h)


def _exact_path(inst, src: Term, dst: Term, length: int) -> bool:
    frontier = {src}
    for _ in range(length):
        frontier = {t for s in frontier for t, ps in inst.out_edges(s).items() if R in ps}
        if not frontier:
            return False
    return dst in frontier


def disjunct_satisfied(rule: Rule, d: Disjunct, inst, h: Mapping[str, Term]) -> bool:
    if rule.kind == QDP:
        return _exact_path(inst, h["x"], h["y"], len(d.atoms))
    frontier = {v: t for v, t in h.items()}
    return next(_join(d.atoms, inst, frontier), None) is not None


def is_active(trig: Trigger, inst) -> bool:
    """No head disjunct extends the trigger's assignment into ``inst``."""
    h = trig.mapping
    return not any(disjunct_satisfied(trig.rule, d, inst, h) for d in trig.rule.head)


def find_triggers(inst, rules: Iterable[Rule]) -> list[Trigger]:
    out = [make_trigger(r, h) for r in rules for h in body_matches(r, inst)]
    return sorted(set(out), key=Trigger.sort_key)


def find_active_triggers(inst, rules: Iterable[Rule]) -> list[Trigger]:
    """Active triggers in canonical order (rule tag, then assigned terms)."""
    return [t for t in find_triggers(inst, rules) if is_active(t, inst)]


def triggers_touching(inst, rules: Iterable[Rule], new_atoms: Iterable[Atom]) -> list[Trigger]:
    """Triggers whose body image uses at least one of ``new_atoms``."""
    found: set[Trigger] = set()
    by_pred: dict[str, list[Atom]] = {}
    for a in new_atoms:
        by_pred.setdefault(a.pred, []).append(a)
    for rule in rules:
        for i, ba in enumerate(rule.body):
            for a in by_pred.get(ba.pred, ()):
                seed: dict[str, Term] = {}
                ok = True
                for v, t in zip(ba.args, a.args):
                    if seed.setdefault(v, t) != t:
                        ok = False
                if not ok:
                    continue
                rest = rule.body[:i] + rule.body[i + 1:]
                for h in _join(rest, inst, seed):
                    found.add(make_trigger(rule, h))
    return sorted(found, key=Trigger.sort_key)


# --------------------------------------------------------------------------
# application

class FreshTerms:
    """Numbered fresh symbols ``f1, f2, ...`` continuing past any in use."""

    def __init__(self, start: int = 0):
        self.counter = start

    @classmethod
    def beyond(cls, terms: Iterable[Term]) -> "FreshTerms":
        top = 0
        for t in terms:
            for sym in t:
                if sym.startswith("f") and sym[1:].isdigit():
                    top = max(top, int(sym[1:]))
        return cls(top)

    def next(self) -> Term:
        self.counter += 1
        return (f"f{self.counter}",)

    def copy(self) -> "FreshTerms":
        return FreshTerms(self.counter)


class InactiveTrigger(ValueError):
    pass


def instantiate(trig: Trigger, k: int, fresh: FreshTerms) -> list[Atom]:
    """Atoms added by choosing disjunct ``k`` of an active trigger."""
    d = trig.rule.head[k]
    h = trig.mapping
    for z in d.existentials:
        h[z] = fresh.next()
    return [Atom(a.pred, tuple(h[v] for v in a.args)) for a in d.atoms]


def apply_trigger(inst: Instance, trig: Trigger, fresh: Optional[FreshTerms] = None) -> list[Instance]:
    """One instance per head disjunct; existentials become fresh terms.

    Each disjunct draws its fresh names from its own copy of the counter, so
    sibling results may share names (they are alternative worlds).
    """
    if not is_active(trig, inst):
        raise InactiveTrigger(f"trigger {trig} is not active")
    if fresh is None:
        fresh = FreshTerms.beyond(inst.terms)
    out = []
    for k in range(len(trig.rule.head)):
        out.append(inst.union(instantiate(trig, k, fresh.copy())))
    return out


def satisfies_rules(inst, rules: Iterable[Rule]) -> Optional[Trigger]:
    """The first active trigger, or ``None`` when ``inst`` is a model."""
    act = find_active_triggers(inst, rules)
    return act[0] if act else None


__all__ = [
    "CONJ", "DISJ", "BOX", "DIA", "CONTR_KIND", "QDP", "CONTR_ATOM",
    "RuleAtom", "Disjunct", "Rule", "Trigger", "FreshTerms", "InactiveTrigger",
    "compact", "label_pred", "pred_formula", "make_trigger",
    "build_formula_rules", "qdp_to_rule", "build_rules", "signature", "database",
    "body_matches", "disjunct_satisfied", "is_active", "find_triggers",
    "find_active_triggers", "triggers_touching", "instantiate", "apply_trigger",
    "satisfies_rules",
]
