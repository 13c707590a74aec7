"""Templates: finite multi-trees standing in for contradiction-free chase elements.

A multi-tree ``T`` is a template for ``f`` under ``P`` when

1. ``unravel_N(T)`` is isomorphic to ``T``;
2. every term at depth at most ``2n`` is P-compliant;
3. ``T`` has no active trigger of the formula rules;
4. the root carries ``P_f``.

:func:`search_template` looks for a contr-free one in two stages.  The first
unravels chase branches (saturated ones directly, budget-cut ones after
closing them under the formula rules); the second enumerates labelled
multi-trees bottom-up within a depth and branching bound.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .chase import CONTRADICTORY, SATURATED, ChaseBranch, ChaseBudget, chase_explore
from .formula import (
    And, Box, Diamond, ModalFormula, Or, SubformulaIndex, diamond_count, modal_depth, negate,
)
from .instance import (
    E, R, ROOT, Atom, Instance, Term, classify_shape, is_isomorphic, term_str, tree_view,
)
from .kripke import KripkeModel, QdpSet, brute_force_sat, force
from .rules import build_formula_rules, find_active_triggers, label_pred
from .treeops import (
    ComplianceChecker, ComplianceWitness, InfiniteUnravel, Parameters, TreeCodes, _core_children,
    _Unraveller, find_root, unravel, unravel_id, verify_witness,
)

log = logging.getLogger(__name__)


@dataclass
class Template:
    tree: Instance
    formula: ModalFormula
    qdps: QdpSet
    params: Parameters
    certificate: dict = field(default_factory=dict)
    witnesses: list[ComplianceWitness] = field(default_factory=list)

    @property
    def has_contr(self) -> bool:
        return self.tree.has_contr

    def to_json(self) -> dict:
        out = self.tree.to_json()
        out["params"] = self.params.to_json()
        out["certificate"] = self.certificate
        return out


@dataclass(frozen=True)
class TemplateViolation:
    property: int
    detail: str

    def to_json(self) -> dict:
        return {"property": self.property, "detail": self.detail}


def verify_template(tree: Instance, f: ModalFormula, p: QdpSet = QdpSet()) -> Union[Template, TemplateViolation]:
    """Check the multi-tree shape, then the four template properties in order."""
    params = Parameters.of(f, p)
    shape = classify_shape(tree)
    if not shape.is_multi_tree:
        return TemplateViolation(1, f"not a multi-tree (shape {shape.kind})")
    view = tree_view(tree)
    codes = TreeCodes()

    # 1: fixpoint of unravel_N
    own = codes.tree_id(view)
    try:
        unr = unravel_id(tree, params.N, codes, root=view.root)
    except InfiniteUnravel as exc:  # pragma: no cover - trees have no cycles
        return TemplateViolation(1, str(exc))
    if unr != own:
        return TemplateViolation(1, f"unravel_{params.N} of the tree is not isomorphic to it")

    # 2: compliance of shallow terms
    witnesses: list[ComplianceWitness] = []
    if len(p):
        checker = ComplianceChecker(tree, codes, depth=params.N)
        for t in sorted(view.subtree(view.root), key=lambda x: (view.depth[x], x)):
            if view.depth[t] > 2 * params.n:
                continue
            for q in p:
                got = checker.witnesses(t, q)
                if got is None:
                    return TemplateViolation(
                        2, f"term {term_str(t)} is not {q}-compliant")
                witnesses.extend(got)

    # 3: model of the formula rules
    active = find_active_triggers(tree, build_formula_rules(f))
    if active:
        return TemplateViolation(3, f"active trigger {active[0]}")

    # 4: root label
    if label_pred(f) not in tree.labels(view.root):
        return TemplateViolation(4, f"root {term_str(view.root)} lacks {label_pred(f)}")

    cert = {
        "fixpoint": {"N": params.N, "isomorphic": True},
        "compliance": [w.to_json() for w in witnesses],
        "active_triggers": 0,
        "root_label": label_pred(f),
        "contr": tree.has_contr,
    }
    return Template(tree, f, p, params, cert, witnesses)


def recheck_certificate(t: Template) -> bool:
    """Re-verify a template's evidence with independent checks."""
    n_big = t.params.N
    if not is_isomorphic(unravel(t.tree, n_big), t.tree):
        return False
    if not all(w.depth == n_big and verify_witness(t.tree, w) for w in t.witnesses):
        return False
    view = tree_view(t.tree)
    shallow = [x for x in view.subtree(view.root) if view.depth[x] <= 2 * t.params.n]
    for x in shallow:
        for q in t.qdps:
            need = set(view.descendants_at(x, q.k, pred=R))
            have = {w.t_prime for w in t.witnesses if w.t == x and w.qdp == q}
            if need - have:
                return False
    if find_active_triggers(t.tree, build_formula_rules(t.formula)):
        return False
    return label_pred(t.formula) in t.tree.labels(view.root)


# --------------------------------------------------------------------------
# from the chase

def template_from_chase(branch: ChaseBranch, f: ModalFormula, p: QdpSet = QdpSet()) -> Optional[Template]:
    """``unravel_N`` of a saturated branch, verified."""
    if branch.status != SATURATED:
        raise ValueError(f"template_from_chase needs a saturated branch, got {branch.status}")
    return _verified(unravel(branch.instance, Parameters.of(f, p).N), f, p)


def _verified(tree: Instance, f: ModalFormula, p: QdpSet) -> Optional[Template]:
    got = verify_template(tree, f, p)
    return got if isinstance(got, Template) else None


def close_under_formula_rules(inst: Instance, f: ModalFormula, max_steps: int = 20_000) -> Optional[Instance]:
    """First contr-free saturation of ``inst`` under the formula rules alone."""
    res = chase_explore(
        f, QdpSet(), ChaseBudget(max_steps=max_steps, max_branches=64, max_total_steps=4 * max_steps),
        start=inst, rules=build_formula_rules(f),
    )
    b = res.witness_branch
    return None if b is None else b.instance


def model_instance(m: KripkeModel, w: int, f: ModalFormula) -> Instance:
    """A rule model built from a Kripke model ``m`` with ``f`` forced at ``w``.

    World ``v`` is copied once per layer ``1..n``; the root ``a`` is ``w`` at
    layer 0.  A copy in layer ``d`` carries the true subformulas of modal
    depth at most ``n - d``.  R edges go from layer ``d`` to every layer
    from 1 to ``d + 1``, and E edges join each diamond to one witness in the
    next layer.  E-paths are then bounded by ``n``, and R-paths of ``m``
    lift to any admissible layer sequence, so the QDP rules stay satisfied.
    """
    n = modal_depth(f)
    subs = [(g, modal_depth(g)) for g in SubformulaIndex(f)]
    truth = {v: {g for g, _ in subs if force(m, v, g)} for v in range(len(m.worlds))}

    def name(v: int, d: int) -> Term:
        return ROOT if d == 0 else (f"m{v}_{d}",)

    atoms: list[Atom] = []
    nodes = [(w, 0)] + [(v, d) for d in range(1, n + 1) for v in range(len(m.worlds))]
    for v, d in nodes:
        t = name(v, d)
        atoms.extend(Atom(label_pred(g), (t,)) for g, md in subs if md <= n - d and g in truth[v])
        succ = m.successors(v)
        for u in succ:
            for d2 in range(1, min(d + 1, n) + 1):
                atoms.append(Atom(R, (t, name(u, d2))))
        if d < n:
            for g, md in subs:
                if isinstance(g, Diamond) and md <= n - d and g in truth[v]:
                    u = next(u for u in succ if g.inner in truth[u])
                    atoms.append(Atom(E, (t, name(u, d + 1))))
    return Instance(atoms)


def template_from_model(m: KripkeModel, w: int, f: ModalFormula, p: QdpSet = QdpSet()) -> Optional[Template]:
    """``unravel_N`` of :func:`model_instance`, verified."""
    if not force(m, w, f):
        raise ValueError("the model does not force the formula at the given world")
    return _verified(unravel(model_instance(m, w, f), Parameters.of(f, p).N, root=ROOT), f, p)


# --------------------------------------------------------------------------
# search

@dataclass(frozen=True)
class TemplateSearchBudget:
    max_branching: Optional[int] = None   # default: 2**n + number of diamonds
    max_candidates: int = 20_000
    depth_cap: Optional[int] = None       # default and maximum: N + n
    stage1_steps: tuple[int, ...] = (64, 256, 1024, 4096)
    stage1_branches: int = 8
    model_worlds: int = 3                  # small-model seed for stage one; 0 disables it
    space_ceiling: Optional[float] = None  # skip enumeration when the estimate exceeds it

    def branching(self, f: ModalFormula) -> int:
        return self.max_branching if self.max_branching is not None else paper_branching(f)

    def depth(self, params: Parameters) -> int:
        bound = params.N + params.n
        return bound if self.depth_cap is None else min(self.depth_cap, bound)


def paper_branching(f: ModalFormula) -> int:
    """Branching cap treated as authoritative: ``2**n`` widened by the diamond count."""
    return 2 ** modal_depth(f) + diamond_count(f)


FOUND, EXHAUSTED, SEARCH_BUDGET = "found", "exhausted", "budget_exhausted"


@dataclass
class SearchResult:
    status: str
    template: Optional[Template] = None
    stage: Optional[int] = None
    candidates: int = 0
    authoritative: bool = True
    note: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "stage": self.stage,
            "candidates": self.candidates,
            "authoritative": self.authoritative,
            "note": self.note,
            "template": None if self.template is None else self.template.to_json(),
        }


def search_template(f: ModalFormula, p: QdpSet = QdpSet(),
                    budget: TemplateSearchBudget = TemplateSearchBudget()) -> SearchResult:
    found = _stage_one(f, p, budget)
    if found is not None:
        return SearchResult(FOUND, found, stage=1)
    if budget.space_ceiling is not None:
        est = estimate_search_space(f, p)
        if est > budget.space_ceiling:
            return SearchResult(SEARCH_BUDGET, stage=2, authoritative=False,
                                note=f"search space estimate {est:.3g} above ceiling")
    return _stage_two(f, p, budget)


def _stage_one(f: ModalFormula, p: QdpSet, budget: TemplateSearchBudget) -> Optional[Template]:
    n_big = Parameters.of(f, p).N
    tried: set[Instance] = set()
    for round_no, steps in enumerate(budget.stage1_steps):
        res = chase_explore(f, p, ChaseBudget(max_steps=steps, max_branches=budget.stage1_branches,
                                              max_total_steps=steps * budget.stage1_branches))
        for b in res.branches:
            if b.status == CONTRADICTORY or b.instance in tried:
                continue
            tried.add(b.instance)
            inst = b.instance if b.status == SATURATED else close_under_formula_rules(b.instance, f)
            if inst is None:
                continue
            t = _verified(unravel(inst, n_big), f, p)
            if t is not None and not t.has_contr:
                return t
        if res.witness is not None:
            break
        if round_no == 0:
            t = _model_seed(f, p, budget)
            if t is not None:
                return t
    if not budget.stage1_steps:
        return _model_seed(f, p, budget)
    return None


def _model_seed(f: ModalFormula, p: QdpSet, budget: TemplateSearchBudget) -> Optional[Template]:
    if not budget.model_worlds:
        return None
    found = brute_force_sat(f, p, budget.model_worlds)
    return None if found is None else template_from_model(found[0], found[1], f, p)


class _BudgetSpent(Exception):
    pass


class _Enumerator:
    """Bottom-up generation of cored, contr-free, rule-closed labelled trees."""

    def __init__(self, f: ModalFormula, p: QdpSet, budget: TemplateSearchBudget):
        self.f = f
        self.p = p
        self.params = Parameters.of(f, p)
        self.index = SubformulaIndex(f)
        self.branching = budget.branching(f)
        self.depth_cap = budget.depth(self.params)
        self.max_candidates = budget.max_candidates
        self.codes = TreeCodes()
        self.count = 0
        self.memo: dict[tuple[frozenset, int], list[int]] = {}
        self.closed: dict[frozenset, list[frozenset]] = {}
        self.contr_pairs = [(g, negate(g)) for g in self.index if negate(g) in self.index]
        self.optional = len(p) > 0

    def tick(self, n: int = 1) -> None:
        self.count += n
        if self.count > self.max_candidates:
            raise _BudgetSpent()

    # label sets ---------------------------------------------------------
    def label_sets(self, demand: frozenset) -> list[frozenset]:
        got = self.closed.get(demand)
        if got is None:
            got = self._all_closed(demand) if self.optional else self._minimal_closed(demand)
            self.closed[demand] = got
        return got

    def _clash(self, s) -> bool:
        return any(g in s and ng in s for g, ng in self.contr_pairs)

    def _minimal_closed(self, demand: frozenset) -> list[frozenset]:
        out: set[frozenset] = set()
        stack = [(frozenset(), tuple(demand))]
        while stack:
            have, todo = stack.pop()
            todo = list(todo)
            branched = False
            while todo:
                g = todo.pop()
                if g in have:
                    continue
                have = have | {g}
                if isinstance(g, And):
                    todo += [g.left, g.right]
                elif isinstance(g, Or):
                    if g.left in have or g.right in have:
                        continue
                    for side in (g.left, g.right):
                        stack.append((have, tuple(todo) + (side,)))
                    branched = True
                    break
            if not branched and not self._clash(have):
                out.add(have)
        return sorted(out, key=lambda s: (len(s), sorted(self.index.ordinal[g] for g in s)))

    def _all_closed(self, demand: frozenset) -> list[frozenset]:
        subs = list(self.index)
        out = []
        for base in self._minimal_closed(demand):
            rest = [g for g in subs if g not in base]
            for r in range(len(rest) + 1):
                for extra in itertools.combinations(rest, r):
                    s = base | frozenset(extra)
                    if self._is_closed(s) and not self._clash(s):
                        out.append(s)
                        self.tick()
        uniq = sorted(set(out), key=lambda s: (len(s), sorted(self.index.ordinal[g] for g in s)))
        return uniq

    @staticmethod
    def _is_closed(s: frozenset) -> bool:
        for g in s:
            if isinstance(g, And) and not (g.left in s and g.right in s):
                return False
            if isinstance(g, Or) and not (g.left in s or g.right in s):
                return False
        return True

    # trees ----------------------------------------------------------------
    def trees(self, demand: frozenset, depth: int) -> list[int]:
        key = (demand, depth)
        got = self.memo.get(key)
        if got is not None:
            return got
        out: list[int] = []
        seen: set[int] = set()
        for labels in self.label_sets(demand):
            dias = [g for g in labels if isinstance(g, Diamond)]
            boxed = frozenset(g.inner for g in labels if isinstance(g, Box))
            if len(dias) > self.branching:
                continue
            if dias and depth + 1 > self.depth_cap:
                continue
            req_opts = []
            for d in sorted(dias, key=lambda g: self.index.ordinal[g]):
                opts = self.trees(frozenset({d.inner}) | boxed, depth + 1)
                if not opts:
                    break
                req_opts.append(opts)
            else:
                opt_pool: list[int] = []
                room = self.branching - len(dias)
                if self.optional and room > 0 and depth + 1 <= self.params.N:
                    opt_pool = self.trees(boxed, depth + 1)
                preds = frozenset(label_pred(g) for g in labels)
                for req in itertools.product(*req_opts):
                    for extra in _multisets(opt_pool, room if opt_pool else 0):
                        self.tick()
                        cands = [(("E", "R"), c, j) for j, c in enumerate(req)]
                        cands += [(("R",), c, len(req) + j) for j, c in enumerate(extra)]
                        kept = _core_children(self.codes, cands)
                        cid = self.codes.intern(preds, ((e, c) for e, c, _ in kept))
                        if cid not in seen:
                            seen.add(cid)
                            out.append(cid)
        self.memo[key] = out
        return out

    def materialise(self, cid: int) -> Instance:
        atoms: list[Atom] = []
        counter = itertools.count(1)
        stack = [(cid, ROOT)]
        while stack:
            c, t = stack.pop()
            atoms.extend(Atom(p, (t,)) for p in sorted(self.codes.labels[c]))
            for preds, child in self.codes.kids[c]:
                u = (f"n{next(counter)}",)
                atoms.extend(Atom(p, (t, u)) for p in preds)
                stack.append((child, u))
        return Instance(atoms)


def _multisets(pool: list[int], room: int) -> Iterator[tuple[int, ...]]:
    for r in range(room + 1):
        yield from itertools.combinations_with_replacement(pool, r)


def _stage_two(f: ModalFormula, p: QdpSet, budget: TemplateSearchBudget) -> SearchResult:
    en = _Enumerator(f, p, budget)
    authoritative = (en.branching >= paper_branching(f)
                     and en.depth_cap >= en.params.N + en.params.n)
    note = "" if authoritative else "bounds below the authoritative caps"
    try:
        roots = en.trees(frozenset({f}), 0)
        for cid in roots:
            en.tick()
            tree = en.materialise(cid)
            t = _verified(tree, f, p)
            if t is not None:
                return SearchResult(FOUND, t, stage=2, candidates=en.count)
    except _BudgetSpent:
        return SearchResult(SEARCH_BUDGET, stage=2, candidates=en.count, authoritative=False,
                            note="candidate budget spent")
    if not authoritative:
        return SearchResult(SEARCH_BUDGET, stage=2, candidates=en.count, authoritative=False,
                            note=note)
    return SearchResult(EXHAUSTED, stage=2, candidates=en.count)


def estimate_search_space(f: ModalFormula, p: QdpSet) -> float:
    """Crude upper estimate of the number of stage-two trees (``inf`` when huge)."""
    params = Parameters.of(f, p)
    index = SubformulaIndex(f)
    if len(p):
        depth, fan, label_bits = params.N + params.n, paper_branching(f), len(index)
    else:
        depth, fan = params.n, max(diamond_count(f), 1)
        label_bits = sum(1 for g in index if isinstance(g, Or))
    bits = 0.0  # log2 of the count of trees of the current height
    for _ in range(depth + 1):
        bits = label_bits + fan * bits
        if bits > 1000:
            return float("inf")
    return 2.0 ** bits


# --------------------------------------------------------------------------
# following

def unravel_with_sources(inst: Instance, i: int) -> tuple[Instance, dict[Term, Term]]:
    """``unravel_i`` plus, for each output word, the source term it copies."""
    root = find_root(inst)
    u = _Unraveller(inst, i, TreeCodes(), root)
    u.state_id(root, 0)
    out = u.materialise()
    source: dict[Term, Term] = {}
    stack = [((root, 0), root)]
    while stack:
        (v, d), word = stack.pop()
        source[word] = v
        for _, _, (w, nd) in u.kept[(v, d)]:
            stack.append(((w, nd), word + w))
    return out, source


def check_follows(inst: Instance, template: Template) -> Optional[dict[Term, Term]]:
    """A homomorphism ``unravel_n(inst) -> template`` giving all copies of a
    source term the same label set, or ``None``."""
    unr, source = unravel_with_sources(inst, template.params.n)
    tree = template.tree
    tv = tree_view(tree)
    if not unr.terms:
        return {}
    uv = tree_view(unr)
    order = uv.subtree(uv.root)
    groups: dict[Term, list[Term]] = {}
    for w in order:
        groups.setdefault(source[w], []).append(w)
    if unr.nullary - tree.nullary:
        return None

    h: dict[Term, Term] = {}
    group_labels: dict[Term, frozenset] = {}
    group_count: dict[Term, int] = {}

    def candidates(w: Term) -> list[Term]:
        if w == uv.root:
            return [tv.root]
        parent = h[uv.parent[w]]
        return [c for c in tv.children[parent] if uv.edge[w] <= tv.edge[c]]

    def ok(w: Term, c: Term) -> bool:
        if not uv.labels[w] <= tv.labels[c]:
            return False
        g = source[w]
        want = group_labels.get(g)
        return want is None or want == tv.labels[c]

    def assign(pos: int) -> bool:
        if pos == len(order):
            return True
        w = order[pos]
        g = source[w]
        for c in candidates(w):
            if not ok(w, c):
                continue
            h[w] = c
            fresh_group = g not in group_labels
            if fresh_group:
                group_labels[g] = tv.labels[c]
            group_count[g] = group_count.get(g, 0) + 1
            if assign(pos + 1):
                return True
            group_count[g] -= 1
            if fresh_group:
                del group_labels[g]
            del h[w]
        return False

    return dict(h) if assign(0) else None


__all__ = [
    "Template", "TemplateViolation", "verify_template", "recheck_certificate",
    "template_from_chase", "close_under_formula_rules", "model_instance", "template_from_model", "TemplateSearchBudget",
    "paper_branching", "FOUND", "EXHAUSTED", "SEARCH_BUDGET", "SearchResult",
    "search_template", "estimate_search_space", "unravel_with_sources", "check_follows",
]
