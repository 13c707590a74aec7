from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasik.chase import ChaseBudget, chase_explore
from quasik.formula import modal_depth
from quasik.instance import (
    CONTR_ATOM, Atom, Instance, atom, classify_shape, core, find_homomorphism, is_isomorphic,
    longest_path, term, tree_view,
)
from quasik.kripke import Qdp, QdpSet
from quasik.treeops import (
    ComplianceChecker, Parameters, TreeCodes, check_compliance, embed, is_partial_isomorphism,
    is_proper_embedding, partial_isos, trim, unfold, unravel, unravel_id, unravel_literal,
    verify_witness,
)
from strategies import formulas, rooted_dags, rooted_trees

Q12 = Qdp(1, 2)


def I(*specs):
    return Instance([atom(*s.split()) for s in specs])


def T(text):
    return tuple(text.split("."))


def test_parameters():
    from quasik.formula import parse_formula
    p = Parameters.of(parse_formula("<><>p"), QdpSet.of((1, 2), (2, 5)))
    assert (p.n, p.K, p.N) == (2, 5, 13)
    assert Parameters.of(parse_formula("p"), QdpSet()).N == 0


def test_unfold_example():
    # [DERIVED] hand application of the path recursion
    got = unfold(I("R a b", "R b c", "R a c", "P c"))
    want = Instance([
        Atom("R", (T("a"), T("a.b"))), Atom("R", (T("a.b"), T("a.b.c"))),
        Atom("R", (T("a"), T("a.c"))), Atom("P", (T("a.b.c"),)), Atom("P", (T("a.c"),)),
    ])
    assert got == want


@given(rooted_trees())
def test_unfold_of_tree_is_isomorphic(t):
    assert is_isomorphic(unfold(t), t)


def test_trim_examples():
    chain = unfold(I("R a x", "R x y", "R y z"))
    assert trim(chain, 2) == unfold(I("R a x", "R x y"))
    kept = trim(unfold(I("R a x", "R x y", "E x y")), 1)
    assert T("a.x.y") in kept.terms


def _sub_dag(j: Instance, rng: random.Random) -> Instance:
    """A random sub-instance of ``j`` still rooted at ``a``."""
    keep = [x for x in j if rng.random() < 0.7]
    sub = Instance(keep)
    reach = {term("a")}
    stack = [term("a")]
    while stack:
        t = stack.pop()
        for s in sub.out_edges(t):
            if s not in reach:
                reach.add(s)
                stack.append(s)
    return sub.restrict(reach)


@settings(max_examples=100)
@given(rooted_dags(), st.integers(0, 2**16))
def test_unfold_preserves_homomorphisms(j, seed):
    i = _sub_dag(j, random.Random(seed))
    if not i.terms:
        return
    assert find_homomorphism(unfold(i), unfold(j)) is not None


@settings(max_examples=100)
@given(rooted_dags(), st.integers(0, 2**16), st.integers(0, 3), st.integers(0, 2))
def test_trim_preserves_homomorphisms(j, seed, i_depth, extra):
    i = _sub_dag(j, random.Random(seed))
    if not i.terms:
        return
    a, b = trim(unfold(i), i_depth), trim(unfold(j), i_depth + extra)
    if not a.terms:
        return
    assert find_homomorphism(a, b) is not None


@settings(max_examples=100)
@given(rooted_dags(), st.integers(0, 2**16), st.integers(0, 3))
def test_unravel_preserves_homomorphisms(j, seed, depth):
    i = _sub_dag(j, random.Random(seed))
    if not i.terms:
        return
    a, b = unravel(i, depth), unravel(j, depth)
    if not a.terms:
        return
    assert find_homomorphism(a, b) is not None


@settings(max_examples=100)
@given(rooted_dags(), st.integers(0, 4))
def test_unravel_matches_literal_composite(inst, i):
    assert is_isomorphic(unravel(inst, i), unravel_literal(inst, i))


@settings(max_examples=100)
@given(rooted_dags(), st.integers(0, 4))
def test_unravel_idempotent(inst, i):
    once = unravel(inst, i)
    if not once.terms:
        return
    assert is_isomorphic(unravel(once, i), once)
    codes = TreeCodes()
    assert unravel_id(once, i, codes) == codes.tree_id(tree_view(once))


@settings(max_examples=100)
@given(rooted_dags(), st.integers(0, 3))
def test_unravel_preserves_contr(inst, i):
    with_contr = inst.union([CONTR_ATOM])
    assert unravel(with_contr, i).has_contr
    assert not unravel(inst, i).has_contr


@given(rooted_dags(), st.integers(0, 3))
def test_unravel_is_a_cored_multi_tree(inst, i):
    out = unravel(inst, i)
    if out.terms:
        assert classify_shape(out).is_multi_tree
        assert is_isomorphic(core(out), out)


def test_single_node_unravel():
    node = I("P_p a")
    for i in range(3):
        assert unravel(node, i) == node


@settings(max_examples=40)
@given(formulas(max_md=2, max_leaves=6), st.sampled_from(["", "1->2"]), st.integers(0, 3))
def test_unravel_depth_bound_on_chase_branches(f, qdps, i):
    res = chase_explore(f, QdpSet.parse(qdps), ChaseBudget(120, 8, 600), stop_at_witness=False)
    n = modal_depth(f)
    for b in res.branches:
        out = unravel(b.instance, i)
        if out.terms:
            assert longest_path(out) <= i + n


def test_compliance_vacuous():
    assert check_compliance(I("R a x"), term("x"), Q12) == []


def test_compliance_chain():
    tree = I("R a x", "R x y")
    (w,) = check_compliance(tree, term("a"), Q12)
    assert (w.t_prime, w.t_plus, w.mapping) == (term("x"), term("y"), {term("y"): term("x")})
    assert verify_witness(tree, w)


def test_non_compliant_chain():
    tree = I("R a x", "R x y", "R y c", "P c")
    assert check_compliance(tree, term("a"), Q12) is None


def test_embed_examples():
    tree = I("R a x", "R x y")
    assert embed(tree, term("x"), term("x"), {term("x"): term("x"), term("y"): term("y")}) == tree
    folded = embed(tree, term("x"), term("y"), {term("y"): term("x")})
    assert folded == I("R a x", "R x x")
    with pytest.raises(ValueError):
        embed(I("R a x", "R x y", "P y"), term("x"), term("y"), {term("y"): term("x")})


@settings(max_examples=60)
@given(rooted_trees(max_nodes=6))
def test_properness_matches_literal_unravel(tree):
    tree = unravel(tree, 6)
    if not tree.terms:
        return
    view = tree_view(tree)
    ell = longest_path(tree)
    for src in view.subtree(view.root):
        for dst in view.subtree(view.root):
            for iso in partial_isos(view, src, dst):
                assert is_partial_isomorphism(tree, dst, src, iso)
                img = embed(tree, dst, src, iso)
                if classify_shape(img).is_rooted_dag:
                    literal = is_isomorphic(unravel_literal(img, ell), tree)
                    assert literal == is_proper_embedding(tree, dst, src, iso)


@settings(max_examples=60)
@given(rooted_trees(max_nodes=7), st.sampled_from([(1, 2), (1, 3), (2, 3)]))
def test_compliance_witnesses_reverify(tree, kq):
    tree = unravel(tree, 7)
    if not tree.terms:
        return
    q = Qdp(*kq)
    checker = ComplianceChecker(tree)
    view = tree_view(tree)
    for t in view.subtree(view.root):
        got = checker.witnesses(t, q)
        if got is None:
            continue
        assert {w.t_prime for w in got} == set(view.descendants_at(t, q.k))
        assert all(verify_witness(tree, w) for w in got)
