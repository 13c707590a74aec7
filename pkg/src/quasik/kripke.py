"""Finite Kripke models, quasi-density frame conditions and two test oracles.

A quasi-density property ``k -> k_plus`` (``0 < k < k_plus``) requires that
every pair of worlds joined by an R-path of length ``k`` is also joined by
one of length ``k_plus``.

The oracles are independent of the chase machinery:

* :func:`brute_force_sat` enumerates frames up to isomorphism and all
  valuations over the formula's atoms.  It is one-sided: a returned model
  witnesses satisfiability, ``None`` proves nothing beyond the bound.
* :func:`k_tree_sat` is a textbook tableau for plain K (no QDPs), complete
  because K has the finite tree model property.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from . import _kernels
from .formula import (
    And, Box, Diamond, ModalFormula, NegAtom, Or, PropAtom, atoms_of, iter_nodes,
)


@dataclass(frozen=True, order=True)
class Qdp:
    k: int
    k_plus: int

    def __post_init__(self):
        if not (0 < self.k < self.k_plus):
            raise ValueError(f"quasi-density needs 0 < k < k_plus, got {self.k}->{self.k_plus}")

    def __str__(self) -> str:
        return f"{self.k}->{self.k_plus}"


_QDP_ITEM = re.compile(r"^\s*(\d+)\s*->\s*(\d+)\s*$")


@dataclass(frozen=True)
class QdpSet:
    items: tuple[Qdp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(sorted(set(self.items))))

    @classmethod
    def of(cls, *pairs: Union[Qdp, tuple[int, int]]) -> "QdpSet":
        return cls(tuple(p if isinstance(p, Qdp) else Qdp(*p) for p in pairs))

    @classmethod
    def parse(cls, text: str) -> "QdpSet":
        """Parse ``"1->2,2->3"``; the empty string is plain K."""
        items = []
        for chunk in text.split(","):
            if not chunk.strip():
                continue
            m = _QDP_ITEM.match(chunk)
            if m is None:
                raise ValueError(f"malformed QDP {chunk.strip()!r}, expected 'k->n'")
            items.append(Qdp(int(m.group(1)), int(m.group(2))))
        return cls(tuple(items))

    @property
    def K(self) -> int:
        return max((q.k_plus for q in self.items), default=0)

    def pairs(self) -> list[tuple[int, int]]:
        return [(q.k, q.k_plus) for q in self.items]

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __str__(self) -> str:
        return ",".join(str(q) for q in self.items)


@dataclass(frozen=True)
class KripkeModel:
    worlds: tuple[str, ...]
    rel: frozenset[tuple[int, int]]
    val: Mapping[str, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.worlds:
            raise ValueError("a Kripke model needs at least one world")
        n = len(self.worlds)
        object.__setattr__(self, "rel", frozenset((int(i), int(j)) for i, j in self.rel))
        object.__setattr__(
            self, "val", {p: frozenset(int(w) for w in ws) for p, ws in self.val.items()}
        )
        for i, j in self.rel:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"relation pair {(i, j)} mentions an unknown world")
        for p, ws in self.val.items():
            if any(not (0 <= w < n) for w in ws):
                raise ValueError(f"valuation of {p!r} mentions an unknown world")

    def __hash__(self):
        return hash((self.worlds, self.rel, tuple(sorted(self.val.items()))))

    def world_index(self, w: Union[int, str]) -> int:
        if isinstance(w, (int, np.integer)) and not isinstance(w, bool):
            if not 0 <= w < len(self.worlds):
                raise ValueError(f"no world with index {w}")
            return int(w)
        try:
            return self.worlds.index(w)
        except ValueError:
            pass
        if isinstance(w, str) and w.isdigit() and int(w) < len(self.worlds):
            return int(w)
        raise ValueError(f"no world named {w!r}")

    def successors(self, w: int) -> list[int]:
        return sorted(j for i, j in self.rel if i == w)

    def adjacency(self) -> np.ndarray:
        n = len(self.worlds)
        adj = np.zeros((n, n), dtype=bool)
        for i, j in self.rel:
            adj[i, j] = True
        return adj

    def to_json(self) -> dict:
        return {
            "worlds": list(self.worlds),
            "rel": [[i, j] for i, j in sorted(self.rel)],
            "val": {p: sorted(ws) for p, ws in sorted(self.val.items())},
        }

    @classmethod
    def from_json(cls, data: Union[str, Mapping]) -> "KripkeModel":
        if isinstance(data, str):
            data = json.loads(data)
        worlds = tuple(str(w) for w in data["worlds"])
        index = {w: i for i, w in enumerate(worlds)}

        def world(x):
            if isinstance(x, int):
                return x
            return index[str(x)]

        rel = frozenset((world(i), world(j)) for i, j in data.get("rel", []))
        val = {p: frozenset(world(w) for w in ws) for p, ws in data.get("val", {}).items()}
        return cls(worlds, rel, val)


# --------------------------------------------------------------------------
# frame conditions

def check_qdp(m: KripkeModel, q: Qdp) -> bool:
    """Every exact ``k``-step R-path is matched by an exact ``k_plus``-step one."""
    adj = m.adjacency()
    rk = _kernels.exact_reach(adj, q.k)
    rn = _kernels.exact_reach(adj, q.k_plus)
    return not bool(np.any(rk & ~rn))


def check_qdps(m: KripkeModel, p: Iterable[Qdp]) -> bool:
    return all(check_qdp(m, q) for q in p)


# --------------------------------------------------------------------------
# forcing

def force(m: KripkeModel, w: Union[int, str], f: ModalFormula) -> bool:
    """The forcing relation ``M, w |- f``, clause by clause."""
    return _force(m, m.world_index(w), f)


def _force(m: KripkeModel, w: int, f: ModalFormula) -> bool:
    if isinstance(f, PropAtom):
        return w in m.val.get(f.name, frozenset())
    if isinstance(f, NegAtom):
        return w not in m.val.get(f.name, frozenset())
    if isinstance(f, Or):
        return _force(m, w, f.left) or _force(m, w, f.right)
    if isinstance(f, And):
        return _force(m, w, f.left) and _force(m, w, f.right)
    if isinstance(f, Diamond):
        return any(_force(m, u, f.inner) for u in m.successors(w))
    if isinstance(f, Box):
        return all(_force(m, u, f.inner) for u in m.successors(w))
    raise TypeError(f"not a modal formula: {f!r}")


def globally_true(m: KripkeModel, f: ModalFormula) -> bool:
    return all(_force(m, w, f) for w in range(len(m.worlds)))


# --------------------------------------------------------------------------
# brute-force oracle

def compile_program(f: ModalFormula, props: list[str]):
    """Post-order program over the distinct subformulas; the root comes last."""
    slot: dict[ModalFormula, int] = {}
    ops: list[int] = []
    arg0: list[int] = []
    arg1: list[int] = []
    prop_index = {p: i for i, p in enumerate(props)}

    def emit(g: ModalFormula) -> int:
        if g in slot:
            return slot[g]
        if isinstance(g, PropAtom):
            code, a, b = _kernels.OP_ATOM, prop_index[g.name], 0
        elif isinstance(g, NegAtom):
            code, a, b = _kernels.OP_NEGATOM, prop_index[g.name], 0
        elif isinstance(g, And):
            code, a, b = _kernels.OP_AND, emit(g.left), emit(g.right)
        elif isinstance(g, Or):
            code, a, b = _kernels.OP_OR, emit(g.left), emit(g.right)
        elif isinstance(g, Diamond):
            code, a, b = _kernels.OP_DIA, emit(g.inner), 0
        else:
            code, a, b = _kernels.OP_BOX, emit(g.inner), 0
        slot[g] = len(ops)
        ops.append(code)
        arg0.append(a)
        arg1.append(b)
        return slot[g]

    emit(f)
    return (np.array(ops, dtype=np.int64), np.array(arg0, dtype=np.int64),
            np.array(arg1, dtype=np.int64))


@lru_cache(maxsize=64)
def _frames(n_worlds: int, qdps: tuple[tuple[int, int], ...]) -> tuple[np.ndarray, np.ndarray]:
    codes = _kernels.canonical_relation_codes(n_worlds)
    codes = codes[_kernels.qdp_mask(codes, n_worlds, qdps)]
    return codes, _kernels.codes_to_successors(codes, n_worlds)


def max_oracle_worlds(n_props: int, requested: int) -> int:
    """Largest world count not above ``requested`` the oracle can enumerate."""
    w = min(requested, 4)
    while w > 1 and max(n_props, 1) * w > _kernels.MAX_VALUATION_BITS:
        w -= 1
    return w


def brute_force_sat(
    f: ModalFormula,
    p: QdpSet = QdpSet(),
    max_worlds: int = 4,
    use_numba: Optional[bool] = None,
) -> Optional[tuple[KripkeModel, int]]:
    """Search every P-model with at most ``max_worlds`` worlds for one forcing ``f``.

    Frames are enumerated one representative per isomorphism class, smallest
    world count first; valuations range over the atoms of ``f`` only.  The
    enumeration stops at four worlds (and earlier when the formula has so
    many atoms that the valuation space would not fit the kernel); beyond
    that the answer is simply "nothing found".
    """
    if max_worlds < 1:
        raise ValueError("max_worlds must be at least 1")
    props = atoms_of(f)
    ops, arg0, arg1 = compile_program(f, props)
    limit = max_oracle_worlds(len(props), max_worlds)
    qdps = tuple(p.pairs())
    for n in range(1, limit + 1):
        codes, succ = _frames(n, qdps)
        if len(codes) == 0:
            continue
        masks, valid = _kernels.atom_masks(len(props), n)
        fi, world, valuation = _kernels.first_satisfying(
            ops, arg0, arg1, succ, masks, valid, use_numba=use_numba
        )
        if fi < 0:
            continue
        code = int(codes[fi])
        rel = frozenset((i, j) for i in range(n) for j in range(n) if (code >> (i * n + j)) & 1)
        val = {
            name: frozenset(u for u in range(n) if (valuation >> (j * n + u)) & 1)
            for j, name in enumerate(props)
        }
        model = KripkeModel(tuple(f"w{i}" for i in range(n)), rel, val)
        return model, world
    return None


# --------------------------------------------------------------------------
# complete oracle for K

def k_tree_sat(f: ModalFormula) -> bool:
    """K-satisfiability by a standard tableau (tree models, depth <= md(f))."""
    return _k_sat(frozenset([f]))


@lru_cache(maxsize=100_000)
def _k_sat(todo: frozenset) -> bool:
    return _expand(list(todo), frozenset())


def _expand(todo: list, done: frozenset) -> bool:
    todo = list(todo)
    done = set(done)
    while todo:
        g = todo.pop()
        if g in done:
            continue
        if isinstance(g, And):
            done.add(g)
            todo.extend([g.left, g.right])
        elif isinstance(g, Or):
            done.add(g)
            return any(_expand(todo + [branch], frozenset(done)) for branch in (g.left, g.right))
        else:
            if isinstance(g, PropAtom) and NegAtom(g.name) in done:
                return False
            if isinstance(g, NegAtom) and PropAtom(g.name) in done:
                return False
            done.add(g)
    boxed = frozenset(g.inner for g in done if isinstance(g, Box))
    return all(_k_sat(boxed | {g.inner}) for g in done if isinstance(g, Diamond))


def formula_props(f: ModalFormula) -> set[str]:
    return {g.name for g in iter_nodes(f) if isinstance(g, (PropAtom, NegAtom))}
