"""Instances: finite sets of atoms over word-structured terms.

A term is a tuple of base symbols (``("a", "f1")`` prints as ``a.f1``);
concatenation is tuple concatenation and ``()`` is the empty word.  Only the
one-symbol word ``a`` is treated as a constant by default, matching the
single database constant of the chase.

Besides the container this module holds the generic graph machinery:
homomorphism search, isomorphism, cores, shape classification and depth.
Trees get dedicated fast paths (canonical codes, bottom-up cores) because
every unravelling ends in one.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, NamedTuple, Optional, Union

Term = tuple[str, ...]

ROOT: Term = ("a",)
CONSTANTS: frozenset[Term] = frozenset({ROOT})

CONTR = "contr"
R = "R"
E = "E"


def term(text: Union[str, Term]) -> Term:
    """``"a.f1"`` -> ``("a", "f1")``; tuples pass through."""
    if isinstance(text, tuple):
        return text
    if text == "":
        return ()
    return tuple(text.split("."))


def term_str(t: Term) -> str:
    return ".".join(t)


class Atom(NamedTuple):
    pred: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(term_str(t) for t in self.args)})"


def atom(pred: str, *args: Union[str, Term]) -> Atom:
    return Atom(pred, tuple(term(a) for a in args))


CONTR_ATOM = Atom(CONTR, ())


class Instance:
    """Immutable set of atoms with lazily built adjacency indexes."""

    __slots__ = ("atoms", "_terms", "_labels", "_out", "_in", "_by_label", "_hash")

    def __init__(self, atoms: Iterable[Atom] = ()):
        atoms = frozenset(atoms)
        for a in atoms:
            if a.pred == CONTR:
                if a.args:
                    raise ValueError("contr is nullary")
            elif len(a.args) not in (1, 2):
                raise ValueError(f"atom {a} must be unary or binary")
            elif any(len(t) == 0 for t in a.args):
                raise ValueError(f"atom {a} uses the empty word")
        self.atoms = atoms
        self._terms = None
        self._labels = None
        self._out = None
        self._in = None
        self._by_label = None
        self._hash = None

    # -- indexes --------------------------------------------------------
    def _index(self):
        terms: set[Term] = set()
        labels: dict[Term, set[str]] = {}
        out: dict[Term, dict[Term, set[str]]] = {}
        inn: dict[Term, dict[Term, set[str]]] = {}
        by_label: dict[str, set[Term]] = {}
        for a in self.atoms:
            terms.update(a.args)
            if len(a.args) == 1:
                labels.setdefault(a.args[0], set()).add(a.pred)
                by_label.setdefault(a.pred, set()).add(a.args[0])
            elif len(a.args) == 2:
                s, t = a.args
                out.setdefault(s, {}).setdefault(t, set()).add(a.pred)
                inn.setdefault(t, {}).setdefault(s, set()).add(a.pred)
        self._terms = frozenset(terms)
        self._labels = {t: frozenset(v) for t, v in labels.items()}
        self._out = {s: {t: frozenset(p) for t, p in d.items()} for s, d in out.items()}
        self._in = {t: {s: frozenset(p) for s, p in d.items()} for t, d in inn.items()}
        self._by_label = {p: frozenset(v) for p, v in by_label.items()}

    @property
    def terms(self) -> frozenset[Term]:
        if self._terms is None:
            self._index()
        return self._terms

    def labels(self, t: Term) -> frozenset[str]:
        if self._labels is None:
            self._index()
        return self._labels.get(t, frozenset())

    def out_edges(self, t: Term) -> Mapping[Term, frozenset[str]]:
        """Successor -> set of binary predicates on the edge ``t -> successor``."""
        if self._out is None:
            self._index()
        return self._out.get(t, {})

    def in_edges(self, t: Term) -> Mapping[Term, frozenset[str]]:
        if self._in is None:
            self._index()
        return self._in.get(t, {})

    def with_label(self, pred: str) -> frozenset[Term]:
        if self._by_label is None:
            self._index()
        return self._by_label.get(pred, frozenset())

    def successors(self, t: Term, pred: Optional[str] = None) -> list[Term]:
        edges = self.out_edges(t)
        if pred is None:
            return sorted(edges)
        return sorted(s for s, ps in edges.items() if pred in ps)

    @property
    def nullary(self) -> frozenset[Atom]:
        return frozenset(a for a in self.atoms if not a.args)

    @property
    def has_contr(self) -> bool:
        return CONTR_ATOM in self.atoms

    # -- set protocol ---------------------------------------------------
    def __contains__(self, a: object) -> bool:
        return a in self.atoms

    def __iter__(self) -> Iterator[Atom]:
        return iter(sorted(self.atoms, key=atom_sort_key))

    def __len__(self) -> int:
        return len(self.atoms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Instance) and self.atoms == other.atoms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.atoms)
        return self._hash

    def __repr__(self) -> str:
        return "Instance({" + ", ".join(str(a) for a in self) + "})"

    def union(self, atoms: Iterable[Atom]) -> "Instance":
        return Instance(self.atoms | frozenset(atoms))

    def restrict(self, keep: Iterable[Term]) -> "Instance":
        """Sub-instance induced by ``keep`` (nullary atoms are retained)."""
        keep = set(keep)
        return Instance(a for a in self.atoms if all(t in keep for t in a.args))

    def rename(self, mapping: Mapping[Term, Term]) -> "Instance":
        return Instance(
            Atom(a.pred, tuple(mapping.get(t, t) for t in a.args)) for a in self.atoms
        )

    # -- serialisation --------------------------------------------------
    def to_json(self) -> dict:
        return {
            "atoms": [
                {"pred": a.pred, "args": [term_str(t) for t in a.args]} for a in self
            ]
        }

    @classmethod
    def from_json(cls, data: Union[str, Mapping]) -> "Instance":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(Atom(d["pred"], tuple(term(t) for t in d.get("args", []))) for d in data["atoms"])


def atom_sort_key(a: Atom):
    return (len(a.args), a.pred, a.args)


def instance(*atoms: Atom) -> Instance:
    return Instance(atoms)


# --------------------------------------------------------------------------
# homomorphisms

def _is_constant(t: Term, constants: frozenset[Term]) -> bool:
    return t in constants


def find_homomorphism(
    src: Instance,
    dst: Instance,
    seed: Optional[Mapping[Term, Term]] = None,
    *,
    constants: frozenset[Term] = CONSTANTS,
    injective: bool = False,
    forbidden: frozenset[Term] = frozenset(),
) -> Optional[dict[Term, Term]]:
    """A homomorphism ``src -> dst`` extending ``seed``, or ``None``.

    Constants are fixed.  ``forbidden`` excludes targets (used by the core
    fold).  The search is complete: terms are assigned most-constrained
    first and candidates are drawn from the images of assigned neighbours,
    filtered by label inclusion.
    """
    for a in src.nullary:
        if a not in dst.atoms:
            return None
    seed = dict(seed or {})
    for t in src.terms:
        if _is_constant(t, constants):
            if seed.get(t, t) != t:
                return None
            seed[t] = t
    for s, t in seed.items():
        if s in src.terms and (t not in dst.terms or t in forbidden):
            return None
    if injective and len(set(seed.values())) != len(seed):
        return None

    src_terms = sorted(src.terms)
    if not src_terms:
        return dict(seed)

    # static variable order: most assigned neighbours, then highest degree
    neighbours = {s: set(src.out_edges(s)) | set(src.in_edges(s)) for s in src_terms}
    order: list[Term] = []
    placed = {s for s in seed if s in src.terms}
    remaining = [s for s in src_terms if s not in placed]
    while remaining:
        best = max(
            remaining,
            key=lambda s: (len(neighbours[s] & placed), len(neighbours[s]) + len(src.labels(s)),
                           _neg_key(s)),
        )
        order.append(best)
        placed.add(best)
        remaining.remove(best)

    for s, t in seed.items():
        if s in src.terms and not _consistent(src, dst, s, t, seed):
            return None

    label_cands: dict[Term, list[Term]] = {}
    all_dst = sorted(dst.terms - forbidden)

    def base_candidates(s: Term) -> list[Term]:
        if s not in label_cands:
            labels = src.labels(s)
            if labels:
                pool = None
                for p in labels:
                    got = dst.with_label(p)
                    pool = set(got) if pool is None else pool & got
                    if not pool:
                        break
                label_cands[s] = sorted(pool - forbidden) if pool else []
            else:
                label_cands[s] = all_dst
        return label_cands[s]

    assignment = dict(seed)
    used = set(assignment.values()) if injective else set()

    def candidates(s: Term) -> list[Term]:
        anchor = None
        for u, preds in src.out_edges(s).items():
            if u in assignment:
                anchor = ("in", assignment[u])
                break
        if anchor is None:
            for u in src.in_edges(s):
                if u in assignment:
                    anchor = ("out", assignment[u])
                    break
        if anchor is None:
            return base_candidates(s)
        direction, image = anchor
        pool = dst.in_edges(image) if direction == "in" else dst.out_edges(image)
        labels = src.labels(s)
        return sorted(
            t for t in pool
            if t not in forbidden and labels <= dst.labels(t)
        )

    stack: list[Iterator[Term]] = []
    depth = 0
    n = len(order)
    if n == 0:
        return assignment
    stack.append(iter(candidates(order[0])))
    while stack:
        s = order[depth]
        advanced = False
        for t in stack[-1]:
            if injective and t in used:
                continue
            if _consistent(src, dst, s, t, assignment):
                assignment[s] = t
                if injective:
                    used.add(t)
                advanced = True
                break
        if not advanced:
            stack.pop()
            depth -= 1
            if depth >= 0:
                prev = order[depth]
                if injective:
                    used.discard(assignment[prev])
                del assignment[prev]
            continue
        if depth + 1 == n:
            return assignment
        depth += 1
        stack.append(iter(candidates(order[depth])))
    return None


def _neg_key(t: Term):
    # deterministic tie-break favouring lexicographically smaller terms
    return tuple(-ord(c) for c in term_str(t))


def _consistent(src: Instance, dst: Instance, s: Term, t: Term, assignment) -> bool:
    if not src.labels(s) <= dst.labels(t):
        return False
    out_t = dst.out_edges(t)
    for u, preds in src.out_edges(s).items():
        if u == s:
            if not preds <= out_t.get(t, frozenset()):
                return False
        elif u in assignment:
            if not preds <= out_t.get(assignment[u], frozenset()):
                return False
    in_t = dst.in_edges(t)
    for u, preds in src.in_edges(s).items():
        if u != s and u in assignment:
            if not preds <= in_t.get(assignment[u], frozenset()):
                return False
    return True


def is_homomorphism(h: Mapping[Term, Term], src: Instance, dst: Instance,
                    constants: frozenset[Term] = CONSTANTS) -> bool:
    """Atom-by-atom re-verification of a claimed homomorphism."""
    for t in src.terms:
        if t not in h:
            return False
        if t in constants and h[t] != t:
            return False
    return all(Atom(a.pred, tuple(h[t] for t in a.args)) in dst.atoms for a in src.atoms)


def is_isomorphic(a: Instance, b: Instance, constants: frozenset[Term] = CONSTANTS) -> bool:
    """Injective homomorphism between equally sized instances, i.e. a bijection
    whose inverse is also a homomorphism."""
    if len(a.atoms) != len(b.atoms) or len(a.terms) != len(b.terms):
        return False
    if a.nullary != b.nullary:
        return False
    if sorted(len(a.labels(t)) for t in a.terms) != sorted(len(b.labels(t)) for t in b.terms):
        return False
    sa, sb = classify_shape(a), classify_shape(b)
    if (sa.is_multi_tree and sb.is_multi_tree and sa.root in constants and sb.root in constants
            and _only_root_constant(a, sa.root, constants)
            and _only_root_constant(b, sb.root, constants)):
        return sa.root == sb.root and tree_code(a) == tree_code(b)
    return find_homomorphism(a, b, constants=constants, injective=True) is not None


def _only_root_constant(inst: Instance, root: Term, constants: frozenset[Term]) -> bool:
    return all(t == root or t not in constants for t in inst.terms)


def apply_map(h: Mapping[Term, Term], inst: Instance) -> Instance:
    return inst.rename(h)


# --------------------------------------------------------------------------
# shape

@dataclass(frozen=True)
class Shape:
    kind: str  # "tree" | "multi-tree" | "rooted-dag" | "other"
    root: Optional[Term] = None

    @property
    def is_rooted_dag(self) -> bool:
        return self.kind in ("tree", "multi-tree", "rooted-dag")

    @property
    def is_multi_tree(self) -> bool:
        return self.kind in ("tree", "multi-tree")

    @property
    def is_tree(self) -> bool:
        return self.kind == "tree"


def classify_shape(inst: Instance) -> Shape:
    """Strongest of tree / multi-tree / rooted DAG that applies."""
    terms = inst.terms
    if not terms:
        return Shape("other")
    indeg = {t: len(inst.in_edges(t)) for t in terms}
    if any(t in inst.out_edges(t) for t in terms):
        return Shape("other")
    # Kahn's algorithm: cycle check
    queue = deque(sorted(t for t in terms if indeg[t] == 0))
    sources = list(queue)
    remaining = dict(indeg)
    seen = 0
    while queue:
        t = queue.popleft()
        seen += 1
        for s in inst.out_edges(t):
            remaining[s] -= 1
            if remaining[s] == 0:
                queue.append(s)
    if seen != len(terms) or len(sources) != 1:
        return Shape("other")
    root = sources[0]
    if all(indeg[t] <= 1 for t in terms):
        multi = any(len(ps) > 1 for t in terms for ps in inst.out_edges(t).values())
        return Shape("multi-tree" if multi else "tree", root)
    return Shape("rooted-dag", root)


def root_of(inst: Instance) -> Term:
    shape = classify_shape(inst)
    if not shape.is_rooted_dag:
        raise ValueError("instance is not a rooted DAG")
    return shape.root


def depths(inst: Instance, root: Optional[Term] = None) -> dict[Term, int]:
    """Minimal path length from the root for every reachable term (BFS)."""
    if root is None:
        root = root_of(inst)
    dist = {root: 0}
    queue = deque([root])
    while queue:
        t = queue.popleft()
        for s in inst.out_edges(t):
            if s not in dist:
                dist[s] = dist[t] + 1
                queue.append(s)
    return dist


def depth_of(inst: Instance, t: Union[str, Term]) -> int:
    t = term(t)
    if t not in inst.terms:
        raise KeyError(f"term {term_str(t)} does not occur in the instance")
    return depths(inst)[t]


def longest_path(inst: Instance, preds: Optional[frozenset[str]] = None) -> int:
    """Length of the longest path using only edges carrying one of ``preds``
    (all binary predicates when ``None``).  Raises on cycles."""
    memo: dict[Term, int] = {}
    state: dict[Term, int] = {}

    def edges(t: Term):
        for s, ps in inst.out_edges(t).items():
            if preds is None or ps & preds:
                yield s

    for start in sorted(inst.terms):
        if start in memo:
            continue
        stack = [(start, iter(list(edges(start))))]
        state[start] = 1
        while stack:
            t, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                memo[t] = max((memo[s] + 1 for s in edges(t)), default=0)
                state[t] = 2
                stack.pop()
                continue
            if state.get(nxt) == 1:
                raise ValueError("instance has a cycle")
            if nxt not in memo:
                state[nxt] = 1
                stack.append((nxt, iter(list(edges(nxt)))))
    return max(memo.values(), default=0)


# --------------------------------------------------------------------------
# trees

@dataclass
class TreeView:
    root: Term
    children: dict[Term, list[Term]]
    edge: dict[Term, frozenset[str]]  # child -> predicates on the edge from its parent
    parent: dict[Term, Term]
    labels: dict[Term, frozenset[str]]
    depth: dict[Term, int]
    nullary: frozenset[Atom]

    def subtree(self, t: Term) -> list[Term]:
        out = []
        stack = [t]
        while stack:
            x = stack.pop()
            out.append(x)
            stack.extend(reversed(self.children[x]))
        return out

    def height(self, t: Optional[Term] = None) -> int:
        t = self.root if t is None else t
        return max(self.depth[x] for x in self.subtree(t)) - self.depth[t]

    def descendants_at(self, t: Term, distance: int, pred: Optional[str] = R) -> list[Term]:
        level = [t]
        for _ in range(distance):
            level = [c for x in level for c in self.children[x]
                     if pred is None or pred in self.edge[c]]
        return level

    def post_order(self) -> list[Term]:
        return list(reversed(self.subtree(self.root)))


def tree_view(inst: Instance) -> TreeView:
    shape = classify_shape(inst)
    if not shape.is_multi_tree:
        raise ValueError("instance is not a multi-tree")
    root = shape.root
    children: dict[Term, list[Term]] = {}
    edge: dict[Term, frozenset[str]] = {}
    parent: dict[Term, Term] = {}
    depth = {root: 0}
    labels = {}
    stack = [root]
    while stack:
        t = stack.pop()
        labels[t] = inst.labels(t)
        kids = sorted(inst.out_edges(t))
        children[t] = kids
        for c in kids:
            edge[c] = inst.out_edges(t)[c]
            parent[c] = t
            depth[c] = depth[t] + 1
            stack.append(c)
    return TreeView(root, children, edge, parent, labels, depth, inst.nullary)


def tree_code(inst_or_view: Union[Instance, TreeView], node: Optional[Term] = None):
    """Canonical encoding: equal codes iff the (sub)trees are isomorphic."""
    view = inst_or_view if isinstance(inst_or_view, TreeView) else tree_view(inst_or_view)
    start = view.root if node is None else node
    codes: dict[Term, tuple] = {}
    for t in reversed(view.subtree(start)):
        kids = sorted((tuple(sorted(view.edge[c])), codes[c]) for c in view.children[t])
        codes[t] = (tuple(sorted(view.labels[t])), tuple(kids))
    code = codes[start]
    if node is None:
        return (tuple(sorted(a.pred for a in view.nullary)), code)
    return code


def tree_hom_exists(va: TreeView, a: Term, vb: TreeView, b: Term, memo=None) -> bool:
    """Root-preserving homomorphism from the subtree at ``a`` into the one at ``b``."""
    if memo is None:
        memo = {}
    key = (a, b)
    if key in memo:
        return memo[key]
    ok = va.labels[a] <= vb.labels[b]
    if ok:
        for c in va.children[a]:
            ec = va.edge[c]
            if not any(ec <= vb.edge[d] and tree_hom_exists(va, c, vb, d, memo)
                       for d in vb.children[b]):
                ok = False
                break
    memo[key] = ok
    return ok


def tree_core(inst: Instance) -> Instance:
    """Core of a multi-tree whose root is fixed: prune dominated siblings bottom-up.

    A child is dropped when its subtree (with its edge predicates) maps into
    a sibling's; among mutually mappable siblings the one with the smaller
    canonical code is kept.
    """
    view = tree_view(inst)
    kept_children: dict[Term, list[Term]] = {}
    memo: dict = {}
    codes: dict[Term, tuple] = {}
    for t in view.post_order():
        kids = sorted(view.children[t], key=lambda c: (tuple(sorted(view.edge[c])), codes[c], c))
        kept: list[Term] = []
        for c in kids:
            dominated = any(
                view.edge[c] <= view.edge[d] and tree_hom_exists(view, c, view, d, memo)
                for d in kept
            )
            if dominated:
                continue
            kept = [
                d for d in kept
                if not (view.edge[d] <= view.edge[c] and tree_hom_exists(view, d, view, c, memo))
            ]
            kept.append(c)
        view.children[t] = kept
        kept_children[t] = kept
        codes[t] = (tuple(sorted(view.labels[t])),
                    tuple(sorted((tuple(sorted(view.edge[c])), codes[c]) for c in kept)))
    keep = set(view.subtree(view.root))
    return inst.restrict(keep)


# --------------------------------------------------------------------------
# cores

def core(inst: Instance, constants: frozenset[Term] = CONSTANTS) -> Instance:
    """A core of ``inst``: a retract every endomorphism of which is bijective."""
    shape = classify_shape(inst)
    if (shape.is_multi_tree and shape.root in constants
            and _only_root_constant(inst, shape.root, constants)):
        return tree_core(inst)
    return fold_core(inst, constants)


def fold_core(inst: Instance, constants: frozenset[Term] = CONSTANTS) -> Instance:
    """Generic core: repeatedly retract onto the image of a map avoiding one term."""
    current = inst
    changed = True
    while changed:
        changed = False
        for x in sorted(current.terms):
            if x in constants:
                continue
            h = find_homomorphism(current, current, constants=constants,
                                  forbidden=frozenset({x}))
            if h is not None:
                current = current.rename(h)
                changed = True
                break
    return current
