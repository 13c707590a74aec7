"""Hypothesis strategies and seeded generators shared by the test modules."""
from __future__ import annotations

import random

from hypothesis import strategies as st

from quasik.formula import And, Box, Diamond, NegAtom, Or, PropAtom, modal_depth
from quasik.instance import Atom, Instance, term
from quasik.kripke import KripkeModel


def formulas(props=("p", "q", "r"), max_md: int = 2, max_leaves: int = 8):
    leaf = st.sampled_from(props).flatmap(lambda n: st.sampled_from([PropAtom(n), NegAtom(n)]))

    def extend(inner):
        return st.one_of(
            st.builds(And, inner, inner), st.builds(Or, inner, inner),
            st.builds(Diamond, inner), st.builds(Box, inner),
        )

    return st.recursive(leaf, extend, max_leaves=max_leaves).filter(
        lambda f: modal_depth(f) <= max_md)


def random_formula(rng: random.Random, props=("p", "q", "r"), md: int = 2, size: int = 4):
    """Seeded NNF formula of modal depth at most ``md``."""
    if size <= 1:
        n = rng.choice(props)
        return PropAtom(n) if rng.random() < 0.5 else NegAtom(n)
    choices = ["and", "or"] + (["dia", "box"] if md > 0 else [])
    op = rng.choice(choices)
    if op in ("dia", "box"):
        inner = random_formula(rng, props, md - 1, size - 1)
        return Diamond(inner) if op == "dia" else Box(inner)
    k = rng.randint(1, size - 1)
    a = random_formula(rng, props, md, k)
    b = random_formula(rng, props, md, size - k)
    return And(a, b) if op == "and" else Or(a, b)


@st.composite
def models(draw, max_worlds: int = 4, props=("p", "q")):
    n = draw(st.integers(1, max_worlds))
    pairs = [(i, j) for i in range(n) for j in range(n)]
    rel = draw(st.sets(st.sampled_from(pairs)))
    val = {p: frozenset(draw(st.sets(st.integers(0, n - 1)))) for p in props}
    return KripkeModel(tuple(f"w{i}" for i in range(n)), frozenset(rel), val)


NAMES = ["a", "b", "c", "d", "e", "g", "h", "k"]


@st.composite
def rooted_dags(draw, max_nodes: int = 6, labels=("A", "B"), with_e: bool = True):
    """Random DAG rooted at ``a``: every node gets a parent among earlier nodes."""
    n = draw(st.integers(1, max_nodes))
    names = NAMES[:n]
    atoms = []
    preds = st.sampled_from([("R",), ("E",), ("R", "E")] if with_e else [("R",)])
    for i in range(1, n):
        parent = draw(st.integers(0, i - 1))
        for p in draw(preds):
            atoms.append(Atom(p, (term(names[parent]), term(names[i]))))
        for j in draw(st.sets(st.integers(0, i - 1), max_size=2)):
            for p in draw(preds):
                atoms.append(Atom(p, (term(names[j]), term(names[i]))))
    for i in range(n):
        for lab in draw(st.sets(st.sampled_from(labels))):
            atoms.append(Atom(lab, (term(names[i]),)))
    if not atoms:
        atoms.append(Atom(labels[0], (term("a"),)))
    return Instance(atoms)


@st.composite
def rooted_trees(draw, max_nodes: int = 6, labels=("A", "B")):
    n = draw(st.integers(1, max_nodes))
    names = NAMES[:n]
    atoms = []
    for i in range(1, n):
        parent = draw(st.integers(0, i - 1))
        for p in draw(st.sampled_from([("R",), ("E",), ("R", "E")])):
            atoms.append(Atom(p, (term(names[parent]), term(names[i]))))
    for i in range(n):
        for lab in draw(st.sets(st.sampled_from(labels))):
            atoms.append(Atom(lab, (term(names[i]),)))
    if not atoms:
        atoms.append(Atom(labels[0], (term("a"),)))
    return Instance(atoms)


@st.composite
def small_instances(draw, max_terms: int = 4):
    """Arbitrary small instances (cycles allowed) over constant ``a`` and variables."""
    names = ["a", "x", "y", "z"][:max_terms]
    ts = [term(n) for n in names]
    atoms = draw(st.sets(
        st.one_of(
            st.builds(lambda t, p: Atom(p, (t,)), st.sampled_from(ts), st.sampled_from(["A", "B"])),
            st.builds(lambda s, t, p: Atom(p, (s, t)), st.sampled_from(ts), st.sampled_from(ts),
                      st.sampled_from(["R", "E"])),
        ),
        min_size=1, max_size=7,
    ))
    return Instance(atoms)


def random_dag(rng: random.Random, max_nodes: int = 6, labels=("A", "B"), p_extra: float = 0.3) -> Instance:
    """Seeded counterpart of :func:`rooted_dags`."""
    n = rng.randint(1, max_nodes)
    names = NAMES[:n]
    atoms = [Atom(labels[0], (term("a"),))] if rng.random() < 0.5 else []
    kinds = [("R",), ("E",), ("R", "E")]
    for i in range(1, n):
        parents = {rng.randrange(i)} | {j for j in range(i) if rng.random() < p_extra}
        for j in parents:
            for pr in rng.choice(kinds):
                atoms.append(Atom(pr, (term(names[j]), term(names[i]))))
    for i in range(n):
        for lab in labels:
            if rng.random() < 0.4:
                atoms.append(Atom(lab, (term(names[i]),)))
    if not atoms:
        atoms.append(Atom(labels[0], (term("a"),)))
    return Instance(atoms)


def random_instance(rng: random.Random, n_terms: int = 4, n_atoms: int = 6) -> Instance:
    """Seeded small instance over ``a, x, y, z``; cycles allowed."""
    ts = [term(x) for x in ["a", "x", "y", "z"][:n_terms]]
    atoms = set()
    for _ in range(rng.randint(1, n_atoms)):
        if rng.random() < 0.4:
            atoms.add(Atom(rng.choice(["A", "B"]), (rng.choice(ts),)))
        else:
            atoms.add(Atom(rng.choice(["R", "E"]), (rng.choice(ts), rng.choice(ts))))
    return Instance(atoms)
