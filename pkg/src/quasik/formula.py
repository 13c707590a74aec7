"""Modal formulas in negation normal form.

The language has literals ``p`` / ``~p``, binary ``&`` and ``|`` and the two
modalities ``<>`` (diamond) and ``[]`` (box). Negation only ever sits on an
atom, so :func:`negate` computes the NNF dual instead of wrapping a node.

Surface syntax::

    formula := disj
    disj    := conj ("|" conj)*
    conj    := unary ("&" unary)*
    unary   := "<>" unary | "[]" unary | "~" atom | atom | "(" formula ")"
    atom    := [a-z][a-zA-Z0-9_]*
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class PropAtom:
    name: str


@dataclass(frozen=True)
class NegAtom:
    name: str


@dataclass(frozen=True)
class And:
    left: "ModalFormula"
    right: "ModalFormula"


@dataclass(frozen=True)
class Or:
    left: "ModalFormula"
    right: "ModalFormula"


@dataclass(frozen=True)
class Diamond:
    inner: "ModalFormula"


@dataclass(frozen=True)
class Box:
    inner: "ModalFormula"


ModalFormula = Union[PropAtom, NegAtom, And, Or, Diamond, Box]


class FormulaSyntaxError(ValueError):
    """Raised by :func:`parse_formula`; ``position`` is a 0-based offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(r"\s*(?:(<>)|(\[\])|([a-z][a-zA-Z0-9_]*)|(.))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:  # only trailing whitespace left
            break
        if m.lastindex is None:
            break
        start = m.start(m.lastindex)
        dia, box, name, other = m.groups()
        if dia:
            tokens.append(("DIA", dia, start))
        elif box:
            tokens.append(("BOX", box, start))
        elif name:
            tokens.append(("ATOM", name, start))
        elif other in ("&", "|", "~", "(", ")"):
            tokens.append((other, other, start))
        else:
            raise FormulaSyntaxError(f"unexpected character {other!r}", start, text)
        pos = m.end()
    tokens.append(("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self, kind: str) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        if tok[0] != kind:
            what = "end of input" if tok[0] == "EOF" else repr(tok[1])
            raise FormulaSyntaxError(f"expected {kind}, found {what}", tok[2], self.text)
        self.i += 1
        return tok

    def formula(self) -> ModalFormula:
        node = self.conj()
        while self.peek()[0] == "|":
            self.i += 1
            node = Or(node, self.conj())
        return node

    def conj(self) -> ModalFormula:
        node = self.unary()
        while self.peek()[0] == "&":
            self.i += 1
            node = And(node, self.unary())
        return node

    def unary(self) -> ModalFormula:
        kind, value, pos = self.peek()
        if kind == "DIA":
            self.i += 1
            return Diamond(self.unary())
        if kind == "BOX":
            self.i += 1
            return Box(self.unary())
        if kind == "~":
            self.i += 1
            nxt = self.peek()
            if nxt[0] != "ATOM":
                raise FormulaSyntaxError(
                    "negation may only be applied to a propositional atom", pos, self.text
                )
            self.i += 1
            return NegAtom(nxt[1])
        if kind == "ATOM":
            self.i += 1
            return PropAtom(value)
        if kind == "(":
            self.i += 1
            node = self.formula()
            self.take(")")
            return node
        what = "end of input" if kind == "EOF" else repr(value)
        raise FormulaSyntaxError(f"unexpected {what}", pos, self.text)


def parse_formula(text: str) -> ModalFormula:
    """Parse the surface syntax into an NNF AST."""
    parser = _Parser(text)
    node = parser.formula()
    kind, value, pos = parser.peek()
    if kind != "EOF":
        raise FormulaSyntaxError(f"unexpected trailing {value!r}", pos, text)
    return node


# --------------------------------------------------------------------------
# printing

def to_text(f: ModalFormula) -> str:
    """Render with the minimal parentheses that :func:`parse_formula` needs."""
    if isinstance(f, PropAtom):
        return f.name
    if isinstance(f, NegAtom):
        return "~" + f.name
    if isinstance(f, Diamond):
        return "<>" + _unary_operand(f.inner)
    if isinstance(f, Box):
        return "[]" + _unary_operand(f.inner)
    if isinstance(f, Or):
        right = to_text(f.right)
        if isinstance(f.right, Or):
            right = f"({right})"
        return f"{to_text(f.left)} | {right}"
    if isinstance(f, And):
        left = to_text(f.left)
        if isinstance(f.left, Or):
            left = f"({left})"
        right = to_text(f.right)
        if isinstance(f.right, (Or, And)):
            right = f"({right})"
        return f"{left} & {right}"
    raise TypeError(f"not a modal formula: {f!r}")


def _unary_operand(f: ModalFormula) -> str:
    if isinstance(f, (And, Or)):
        return f"({to_text(f)})"
    return to_text(f)


# --------------------------------------------------------------------------
# structural operations

def negate(f: ModalFormula) -> ModalFormula:
    """NNF negation: the De Morgan / modal dual, pushed down to the literals."""
    if isinstance(f, PropAtom):
        return NegAtom(f.name)
    if isinstance(f, NegAtom):
        return PropAtom(f.name)
    if isinstance(f, Or):
        return And(negate(f.left), negate(f.right))
    if isinstance(f, And):
        return Or(negate(f.left), negate(f.right))
    if isinstance(f, Diamond):
        return Box(negate(f.inner))
    if isinstance(f, Box):
        return Diamond(negate(f.inner))
    raise TypeError(f"not a modal formula: {f!r}")


def modal_depth(f: ModalFormula) -> int:
    if isinstance(f, (PropAtom, NegAtom)):
        return 0
    if isinstance(f, (And, Or)):
        return max(modal_depth(f.left), modal_depth(f.right))
    return modal_depth(f.inner) + 1


def children(f: ModalFormula) -> tuple[ModalFormula, ...]:
    if isinstance(f, (And, Or)):
        return (f.left, f.right)
    if isinstance(f, (Diamond, Box)):
        return (f.inner,)
    return ()


def iter_nodes(f: ModalFormula) -> Iterator[ModalFormula]:
    """Pre-order walk over every syntactic occurrence."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def node_count(f: ModalFormula) -> int:
    return sum(1 for _ in iter_nodes(f))


def atoms_of(f: ModalFormula) -> list[str]:
    """Proposition names in order of first occurrence."""
    seen: dict[str, None] = {}
    for node in iter_nodes(f):
        if isinstance(node, (PropAtom, NegAtom)):
            seen.setdefault(node.name, None)
    return list(seen)


class SubformulaIndex:
    """Distinct subformulas of a root formula with stable ordinals.

    Ordinals follow first occurrence in a pre-order walk, so the root is 0.
    """

    def __init__(self, root: ModalFormula):
        self.root = root
        self.formulas: list[ModalFormula] = []
        self.ordinal: dict[ModalFormula, int] = {}
        for node in iter_nodes(root):
            if node not in self.ordinal:
                self.ordinal[node] = len(self.formulas)
                self.formulas.append(node)

    def __len__(self) -> int:
        return len(self.formulas)

    def __iter__(self) -> Iterator[ModalFormula]:
        return iter(self.formulas)

    def __contains__(self, f: object) -> bool:
        return f in self.ordinal


def subformulas(f: ModalFormula) -> list[ModalFormula]:
    return SubformulaIndex(f).formulas


def modal_subformulas_at_depth(f: ModalFormula, i: int) -> set[ModalFormula]:
    """Subformulas ``<>g`` / ``[]g`` whose modal depth is ``md(f) - i``."""
    md = modal_depth(f)
    return {
        g for g in subformulas(f)
        if isinstance(g, (Diamond, Box)) and md - modal_depth(g) == i
    }


def diamond_count(f: ModalFormula) -> int:
    return sum(1 for g in subformulas(f) if isinstance(g, Diamond))


# --------------------------------------------------------------------------
# convenience builders used by the decision layer and the tests

def diamonds(k: int, f: ModalFormula) -> ModalFormula:
    for _ in range(k):
        f = Diamond(f)
    return f


def boxes(k: int, f: ModalFormula) -> ModalFormula:
    for _ in range(k):
        f = Box(f)
    return f


def implies(antecedent: ModalFormula, consequent: ModalFormula) -> ModalFormula:
    """NNF encoding of ``antecedent -> consequent``."""
    return Or(negate(antecedent), consequent)


def conjoin(*parts: ModalFormula) -> ModalFormula:
    node = parts[0]
    for part in parts[1:]:
        node = And(node, part)
    return node


def disjoin(*parts: ModalFormula) -> ModalFormula:
    node = parts[0]
    for part in parts[1:]:
        node = Or(node, part)
    return node
