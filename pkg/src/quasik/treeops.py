"""Unfolding, trimming, unravelling, embedding and QDP compliance.

``unfold`` and ``trim`` are literal implementations on explicit instances.
``unravel`` (core after trim after unfold) never materialises the unfolding:
a node of the unfolded tree only depends on the source term and on its depth
up to the trim bound, so cored subtrees are computed once per such state and
hash-consed in a :class:`TreeCodes` table.  The same table gives canonical
ids, hence constant-time isomorphism tests between trees interned in it.

The bounded evaluation also covers instances with cycles, which ``embed``
produces: below the trim depth only E edges are followed, and an E-cycle
there means the unravelling is infinite (:class:`InfiniteUnravel`).
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

from .formula import ModalFormula, modal_depth
from .instance import (
    E, R, Atom, Instance, Term, TreeView, classify_shape, core, longest_path, term_str,
    tree_view,
)
from .kripke import Qdp, QdpSet


@dataclass(frozen=True)
class Parameters:
    n: int
    K: int

    @property
    def N(self) -> int:
        return 4 * self.n + self.K

    @classmethod
    def of(cls, f: ModalFormula, p: QdpSet) -> "Parameters":
        return cls(modal_depth(f), p.K)

    def to_json(self) -> dict:
        return {"n": self.n, "K": self.K, "N": self.N}


class InfiniteUnravel(ValueError):
    """The bounded unfolding does not terminate (an E-cycle below the trim depth)."""


# --------------------------------------------------------------------------
# literal operations

def unfold(inst: Instance) -> Instance:
    """Multi-tree of root paths; a path's last term is appended to its word."""
    shape = classify_shape(inst)
    if not shape.is_rooted_dag:
        raise ValueError("unfold needs a DAG with a single root")
    out: list[Atom] = list(inst.nullary)
    stack = [(shape.root, shape.root)]
    while stack:
        t, word = stack.pop()
        out.extend(Atom(p, (word,)) for p in inst.labels(t))
        for s, preds in inst.out_edges(t).items():
            child = word + s
            out.extend(Atom(p, (word, child)) for p in preds)
            stack.append((s, child))
    return Instance(out)


def trim(tree: Instance, i: int) -> Instance:
    """Drop terms deeper than ``i`` unless an E-path from depth ``<= i`` reaches them."""
    if not classify_shape(tree).is_multi_tree:
        raise ValueError("trim needs a multi-tree")
    view = tree_view(tree)
    keep = set()
    stack = [view.root]
    while stack:
        t = stack.pop()
        keep.add(t)
        for c in view.children[t]:
            if view.depth[c] <= i or E in view.edge[c]:
                stack.append(c)
    return tree.restrict(keep)


# --------------------------------------------------------------------------
# hash-consed trees

class TreeCodes:
    """Interning table for labelled multi-trees with a memoised hom test.

    A tree is identified by its label set and the sorted multiset of
    ``(edge predicates, child id)`` pairs; equal ids mean isomorphic trees.
    """

    def __init__(self):
        self._ids: dict[tuple, int] = {}
        self.labels: list[frozenset[str]] = []
        self.kids: list[tuple[tuple[tuple[str, ...], int], ...]] = []
        self.height: list[int] = []
        self._hom: dict[tuple[int, int], bool] = {}

    def intern(self, labels: frozenset[str], kids) -> int:
        kids = tuple(sorted(kids))
        key = (labels, kids)
        cid = self._ids.get(key)
        if cid is None:
            cid = len(self.labels)
            self._ids[key] = cid
            self.labels.append(labels)
            self.kids.append(kids)
            self.height.append(1 + max((self.height[c] for _, c in kids), default=-1))
        return cid

    def hom(self, a: int, b: int) -> bool:
        """Root-preserving homomorphism from tree ``a`` into tree ``b``."""
        if a == b:
            return True
        key = (a, b)
        got = self._hom.get(key)
        if got is not None:
            return got
        ok = self.height[a] <= self.height[b] and self.labels[a] <= self.labels[b]
        if ok:
            for ea, ca in self.kids[a]:
                sa = set(ea)
                if not any(sa.issubset(eb) and self.hom(ca, cb) for eb, cb in self.kids[b]):
                    ok = False
                    break
        self._hom[key] = ok
        return ok

    def __len__(self) -> int:
        return len(self.labels)

    def tree_id(self, view: TreeView, node: Optional[Term] = None) -> int:
        """Id of the (not necessarily cored) subtree of ``view`` at ``node``."""
        start = view.root if node is None else node
        ids: dict[Term, int] = {}
        for t in reversed(view.subtree(start)):
            ids[t] = self.intern(
                view.labels[t],
                ((tuple(sorted(view.edge[c])), ids[c]) for c in view.children[t]),
            )
        return ids[start]


def _core_children(codes: TreeCodes, cands):
    """Keep the children of one node that no sibling dominates.

    ``cands`` are ``(preds, child_id, payload)``; the earliest of identical
    siblings survives, so the payload order decides which copy is kept.
    """
    cands = sorted(cands, key=lambda c: (-codes.height[c[1]], c[0], c[1], c[2]))
    kept: list = []
    for c in cands:
        ec = set(c[0])
        if any(ec.issubset(d[0]) and codes.hom(c[1], d[1]) for d in kept):
            continue
        kept = [d for d in kept if not (set(d[0]).issubset(c[0]) and codes.hom(d[1], c[1]))]
        kept.append(c)
    return sorted(kept, key=lambda c: c[2])


class _Unraveller:
    def __init__(self, inst: Instance, i: int, codes: TreeCodes, root: Term):
        self.inst = inst
        self.i = i
        self.codes = codes
        self.root = root
        self.ids: dict[tuple[Term, int], int] = {}
        self.kept: dict[tuple[Term, int], list] = {}
        self.active: set[tuple[Term, int]] = set()

    def state_id(self, u: Term, d: int) -> int:
        # d in 0..i is a depth; d == i + 1 marks the E-only tail below the trim depth
        key = (u, d)
        got = self.ids.get(key)
        if got is not None:
            return got
        if key in self.active:
            raise InfiniteUnravel(f"E-cycle through {term_str(u)} below depth {self.i}")
        self.active.add(key)
        cands = []
        for v, preds in self.inst.out_edges(u).items():
            if d < self.i:
                nd = d + 1
            elif E in preds:
                nd = self.i + 1
            else:
                continue
            cands.append((tuple(sorted(preds)), self.state_id(v, nd), (v, nd)))
        kept = _core_children(self.codes, cands)
        self.active.discard(key)
        cid = self.codes.intern(self.inst.labels(u), ((e, c) for e, c, _ in kept))
        self.ids[key] = cid
        self.kept[key] = kept
        return cid

    def materialise(self) -> Instance:
        out: list[Atom] = list(self.inst.nullary)
        stack = [((self.root, 0), self.root)]
        while stack:
            (u, d), word = stack.pop()
            out.extend(Atom(p, (word,)) for p in self.inst.labels(u))
            for preds, _, (v, nd) in self.kept[(u, d)]:
                child = word + v
                out.extend(Atom(p, (word, child)) for p in preds)
                stack.append(((v, nd), child))
        # a bare root without labels leaves no atoms at all
        return Instance(out)


def find_root(inst: Instance) -> Term:
    """The unique term without incoming edges (cycles elsewhere are allowed)."""
    sources = sorted(t for t in inst.terms if not inst.in_edges(t))
    if len(sources) != 1:
        raise ValueError("instance does not have a unique root")
    return sources[0]


def _limit_recursion(inst: Instance, i: int) -> None:
    need = 4 * (i + len(inst.terms)) + 1000
    if sys.getrecursionlimit() < need:
        sys.setrecursionlimit(need)


def unravel_id(inst: Instance, i: int, codes: TreeCodes, root: Optional[Term] = None) -> int:
    """Canonical id of ``unravel_i(inst)`` in ``codes`` (nullary atoms excluded)."""
    root = find_root(inst) if root is None else root
    _limit_recursion(inst, i)
    return _Unraveller(inst, i, codes, root).state_id(root, 0)


def unravel(inst: Instance, i: int, root: Optional[Term] = None,
            codes: Optional[TreeCodes] = None) -> Instance:
    """``core(trim_i(unfold(inst)))`` computed without building the unfolding."""
    root = find_root(inst) if root is None else root
    _limit_recursion(inst, i)
    u = _Unraveller(inst, i, codes if codes is not None else TreeCodes(), root)
    u.state_id(root, 0)
    return u.materialise()


def unravel_literal(inst: Instance, i: int) -> Instance:
    """Reference composite for tests: explicit unfold, trim and core."""
    return core(trim(unfold(inst), i))


# --------------------------------------------------------------------------
# partial isomorphisms and embedding

def subtree_instance(tree: Instance, t: Term) -> Instance:
    view = tree_view(tree)
    return tree.restrict(view.subtree(t))


def partial_isos(view: TreeView, src: Term, dst: Term) -> Iterator[dict[Term, Term]]:
    """Injective maps of the subtree at ``src`` into the one at ``dst``.

    Labels and edge predicates must match exactly, so the image is an
    isomorphic copy inside the target subtree.
    """
    if view.labels[src] != view.labels[dst]:
        return
    kids = view.children[src]
    targets = view.children[dst]
    options = []
    for c in kids:
        opts = [d for d in targets if view.edge[d] == view.edge[c]
                and view.labels[d] == view.labels[c]]
        if not opts:
            return
        options.append(opts)
    # cheapest first: fewest options
    order = sorted(range(len(kids)), key=lambda j: len(options[j]))

    def assign(pos: int, used: set, chosen: dict[Term, Term]) -> Iterator[dict[Term, Term]]:
        if pos == len(order):
            yield from combine(list(chosen.items()), {src: dst})
            return
        c = kids[order[pos]]
        for d in options[order[pos]]:
            if d in used:
                continue
            used.add(d)
            chosen[c] = d
            yield from assign(pos + 1, used, chosen)
            del chosen[c]
            used.discard(d)

    def combine(pairs, acc) -> Iterator[dict[Term, Term]]:
        if not pairs:
            yield dict(acc)
            return
        (c, d), rest = pairs[0], pairs[1:]
        for sub in partial_isos(view, c, d):
            merged = dict(acc)
            merged.update(sub)
            yield from combine(rest, merged)

    yield from assign(0, set(), {})


def is_partial_isomorphism(tree: Instance, t_prime: Term, t_plus: Term,
                           iso: Mapping[Term, Term]) -> bool:
    view = tree_view(tree)
    dom = view.subtree(t_plus)
    target = set(view.subtree(t_prime))
    if set(iso) != set(dom) or iso.get(t_plus) != t_prime:
        return False
    if len(set(iso.values())) != len(dom) or not set(iso.values()) <= target:
        return False
    for x in dom:
        if view.labels[x] != view.labels[iso[x]]:
            return False
        for c in view.children[x]:
            img = iso[c]
            if view.parent.get(img) != iso[x] or view.edge[img] != view.edge[c]:
                return False
    return True


def embed(tree: Instance, t_prime: Term, t_plus: Term, iso: Mapping[Term, Term]) -> Instance:
    """Apply ``iso`` extended by the identity to every atom of ``tree``."""
    if not is_partial_isomorphism(tree, t_prime, t_plus, iso):
        raise ValueError(
            f"not a partial isomorphism from the subtree at {term_str(t_plus)} "
            f"into the one at {term_str(t_prime)}"
        )
    return tree.rename(iso)


def is_proper_embedding(tree: Instance, t_prime: Term, t_plus: Term,
                        iso: Mapping[Term, Term], codes: Optional[TreeCodes] = None,
                        depth: Optional[int] = None) -> bool:
    """``unravel_l(embed(...))`` is isomorphic to ``tree``.

    ``l`` defaults to the longest path of ``tree``; templates pass their trim
    depth ``N`` instead.
    """
    codes = TreeCodes() if codes is None else codes
    view = tree_view(tree)
    ell = longest_path(tree) if depth is None else depth
    try:
        got = unravel_id(embed(tree, t_prime, t_plus, iso), ell, codes, root=view.root)
    except InfiniteUnravel:
        return False
    return got == codes.tree_id(view)


# --------------------------------------------------------------------------
# compliance

@dataclass(frozen=True)
class ComplianceWitness:
    t: Term
    qdp: Qdp
    t_prime: Term
    t_plus: Term
    iso: tuple[tuple[Term, Term], ...]
    depth: Optional[int] = None  # unravel depth of the properness check, None = longest path

    @property
    def mapping(self) -> dict[Term, Term]:
        return dict(self.iso)

    def to_json(self) -> dict:
        return {
            "t": term_str(self.t),
            "qdp": str(self.qdp),
            "t_prime": term_str(self.t_prime),
            "t_plus": term_str(self.t_plus),
            "iso": {term_str(a): term_str(b) for a, b in self.iso},
            "depth": self.depth,
        }


class ComplianceChecker:
    """Compliance queries against one tree, sharing codes and properness results."""

    def __init__(self, tree: Instance, codes: Optional[TreeCodes] = None,
                 depth: Optional[int] = None):
        self.tree = tree
        self.view = tree_view(tree)
        self.codes = TreeCodes() if codes is None else codes
        self.depth = depth
        self.ell = longest_path(tree) if depth is None else depth
        self.target = self.codes.tree_id(self.view)
        self._proper: dict[frozenset, bool] = {}
        self._witness: dict[tuple[Term, Term], Optional[dict]] = {}

    def proper(self, iso: dict[Term, Term]) -> bool:
        key = frozenset(iso.items())
        got = self._proper.get(key)
        if got is None:
            try:
                img = self.tree.rename(iso)
                got = unravel_id(img, self.ell, self.codes, root=self.view.root) == self.target
            except InfiniteUnravel:
                got = False
            self._proper[key] = got
        return got

    def embedding(self, t_prime: Term, t_plus: Term) -> Optional[dict[Term, Term]]:
        key = (t_prime, t_plus)
        if key not in self._witness:
            found = None
            for iso in partial_isos(self.view, t_plus, t_prime):
                if self.proper(iso):
                    found = iso
                    break
            self._witness[key] = found
        return self._witness[key]

    def witnesses(self, t: Term, q: Qdp) -> Optional[list[ComplianceWitness]]:
        """One witness per distance-``k`` descendant, ``[]`` if there is none,
        ``None`` if some descendant has no properly embeddable partner."""
        out = []
        far = self.view.descendants_at(t, q.k_plus, pred=R)
        for t_prime in self.view.descendants_at(t, q.k, pred=R):
            hit = None
            for t_plus in far:
                iso = self.embedding(t_prime, t_plus)
                if iso is not None:
                    hit = ComplianceWitness(t, q, t_prime, t_plus, tuple(sorted(iso.items())), self.depth)
                    break
            if hit is None:
                return None
            out.append(hit)
        return out


def check_compliance(tree: Instance, t: Term, q: Qdp,
                     depth: Optional[int] = None) -> Optional[list[ComplianceWitness]]:
    return ComplianceChecker(tree, depth=depth).witnesses(t, q)


def verify_witness(tree: Instance, w: ComplianceWitness) -> bool:
    """Independent re-check of a witness: distances, partial iso and properness."""
    view = tree_view(tree)
    if w.t_prime not in view.descendants_at(w.t, w.qdp.k, pred=R):
        return False
    if w.t_plus not in view.descendants_at(w.t, w.qdp.k_plus, pred=R):
        return False
    iso = w.mapping
    if not is_partial_isomorphism(tree, w.t_prime, w.t_plus, iso):
        return False
    return is_proper_embedding(tree, w.t_prime, w.t_plus, iso, depth=w.depth)


__all__ = [
    "Parameters", "InfiniteUnravel", "unfold", "trim", "TreeCodes", "unravel", "unravel_id",
    "unravel_literal", "find_root", "subtree_instance", "partial_isos",
    "is_partial_isomorphism", "embed", "is_proper_embedding", "ComplianceWitness",
    "ComplianceChecker", "check_compliance", "verify_witness",
]
