from __future__ import annotations

import itertools

from hypothesis import given

from quasik.instance import (
    Atom, Instance, atom, classify_shape, core, depth_of, depths, find_homomorphism,
    fold_core, is_homomorphism, is_isomorphic, term, tree_core,
)
from strategies import rooted_dags, rooted_trees, small_instances


def I(*atoms):
    return Instance(atoms)


def brute_hom(src, dst):
    """Reference: all assignments of src terms to dst terms (a fixed)."""
    a = term("a")
    ts = sorted(src.terms)
    targets = sorted(dst.terms)
    for img in itertools.product(targets, repeat=len(ts)):
        h = dict(zip(ts, img))
        if a in h and h[a] != a:
            continue
        if all(Atom(x.pred, tuple(h[t] for t in x.args)) in dst for x in src):
            return h
    return None


def test_hom_examples():
    assert find_homomorphism(I(atom("A", "x")), I(atom("A", "a"))) == {term("x"): term("a")}
    assert find_homomorphism(I(atom("A", "a")), I(atom("A", "b"))) is None
    h = find_homomorphism(I(atom("R", "x", "y"), atom("R", "y", "z")), I(atom("R", "u", "u")))
    assert set(h.values()) == {term("u")}


@given(small_instances(), small_instances())
def test_hom_search_matches_brute_force(src, dst):
    h = find_homomorphism(src, dst)
    ref = brute_hom(src, dst)
    assert (h is None) == (ref is None)
    if h is not None:
        assert is_homomorphism(h, src, dst)


def test_core_examples():
    inst = I(atom("R", "a", "x"), atom("R", "a", "y"))
    assert is_isomorphic(core(inst), I(atom("R", "a", "x")))
    rigid = I(atom("R", "a", "x"), atom("R", "a", "y"), atom("P", "x"), atom("Q", "y"))
    assert core(rigid) == rigid


@given(small_instances())
def test_core_idempotent_and_equivalent(inst):
    c = core(inst)
    assert is_isomorphic(core(c), c)
    assert find_homomorphism(inst, c) is not None
    assert find_homomorphism(c, inst) is not None
    assert len(c) <= len(inst)


@given(small_instances())
def test_fold_core_agrees_with_core(inst):
    assert is_isomorphic(fold_core(inst), core(inst))


@given(rooted_trees())
def test_tree_core_agrees_with_core(t):
    assert is_isomorphic(tree_core(t), core(t))


def test_shape_examples():
    assert classify_shape(I(atom("R", "a", "x"), atom("R", "x", "a"))).kind == "other"
    s = classify_shape(I(atom("R", "a", "x"), atom("E", "a", "x"), atom("R", "x", "y")))
    assert s.kind == "multi-tree" and s.root == term("a")
    s = classify_shape(I(atom("R", "a", "x"), atom("R", "a", "y"), atom("R", "x", "z"), atom("R", "y", "z")))
    assert s.kind == "rooted-dag" and not s.is_multi_tree


def test_depth_examples():
    inst = I(atom("R", "a", "x"), atom("R", "x", "y"), atom("R", "a", "y"))
    assert depth_of(inst, "a") == 0
    assert depth_of(inst, "y") == 1


def _all_paths(inst, root):
    best = {root: 0}
    stack = [(root, 0, (root,))]
    while stack:
        t, d, path = stack.pop()
        for s in inst.out_edges(t):
            if s in path:
                continue
            best[s] = min(best.get(s, d + 1), d + 1)
            stack.append((s, d + 1, path + (s,)))
    return best


@given(rooted_dags())
def test_bfs_depth_matches_path_enumeration(inst):
    assert depths(inst) == _all_paths(inst, term("a"))


def test_json_round_trip():
    inst = I(atom("R", "a", "x"), atom("P_p", "x"), Atom("contr", ()))
    assert Instance.from_json(inst.to_json()) == inst
