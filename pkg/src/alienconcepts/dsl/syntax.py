"""Concept program AST, parser and printer.

Surface syntax::

    p1 | p2 | p3 | p4 | S | x
    (has p1)
    (rotate A 90)
    (attach A B)
    (attach* A B 2)
    (map (lambda x BODY) P)
    (all-rotations A)

Commas are treated as whitespace so that ``(rotate A, 180)`` also reads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from ..errors import ArityError, IllTypedProgram, ProgramSyntaxError, UnboundVariable

PRIMITIVE_NAMES = ("p1", "p2", "p3", "p4")
ALL_PRIMITIVES = "S"
VARIABLE = "x"
ANGLES = (0, 90, 180, 270)


@dataclass(frozen=True)
class PrimSet:
    name: str


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Has:
    prim: str


@dataclass(frozen=True)
class Rotate:
    child: "Node"
    angle: int


@dataclass(frozen=True)
class Attach:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class AttachFixed:
    left: "Node"
    right: "Node"
    index: int


@dataclass(frozen=True)
class Map:
    body: "Node"
    over: "Node"


@dataclass(frozen=True)
class AllRotations:
    child: "Node"


Node = Union[PrimSet, Var, Has, Rotate, Attach, AttachFixed, Map, AllRotations]


def children(node) -> tuple:
    if isinstance(node, (Rotate, AllRotations)):
        return (node.child,)
    if isinstance(node, (Attach, AttachFixed)):
        return (node.left, node.right)
    if isinstance(node, Map):
        return (node.body, node.over)
    return ()


def replace_child(node, slot: int, new):
    if isinstance(node, Rotate):
        return Rotate(new, node.angle)
    if isinstance(node, AllRotations):
        return AllRotations(new)
    if isinstance(node, Attach):
        return Attach(new, node.right) if slot == 0 else Attach(node.left, new)
    if isinstance(node, AttachFixed):
        if slot == 0:
            return AttachFixed(new, node.right, node.index)
        return AttachFixed(node.left, new, node.index)
    if isinstance(node, Map):
        return Map(new, node.over) if slot == 0 else Map(node.body, new)
    raise IndexError(f"{type(node).__name__} has no children")


def node_count(node) -> int:
    return 1 + sum(node_count(c) for c in children(node))


def to_text(node) -> str:
    """Canonical text of a program."""
    if isinstance(node, PrimSet):
        return node.name
    if isinstance(node, Var):
        return VARIABLE
    if isinstance(node, Has):
        return f"(has {node.prim})"
    if isinstance(node, Rotate):
        return f"(rotate {to_text(node.child)} {node.angle})"
    if isinstance(node, Attach):
        return f"(attach {to_text(node.left)} {to_text(node.right)})"
    if isinstance(node, AttachFixed):
        return f"(attach* {to_text(node.left)} {to_text(node.right)} {node.index})"
    if isinstance(node, Map):
        return f"(map (lambda {VARIABLE} {to_text(node.body)}) {to_text(node.over)})"
    if isinstance(node, AllRotations):
        return f"(all-rotations {to_text(node.child)})"
    raise IllTypedProgram(f"not a program node: {node!r}")


_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s(),]+))")


def _tokenize(text):
    tokens = []
    pos = 0
    text_clean = text.replace(",", " ")
    while pos < len(text_clean):
        m = _TOKEN.match(text_clean, pos)
        if m is None:
            if text_clean[pos:].strip() == "":
                break
            raise ProgramSyntaxError("unexpected character", pos)
        if m.group(1):
            tokens.append(("(", m.start(1)))
        elif m.group(2):
            tokens.append((")", m.start(2)))
        elif m.group(3):
            tokens.append((m.group(3), m.start(3)))
        else:
            break
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return (None, len(self.text))

    def take(self):
        tok = self.peek()
        if tok[0] is None:
            raise ProgramSyntaxError("unexpected end of input", tok[1])
        self.i += 1
        return tok

    def expect(self, value):
        tok, pos = self.take()
        if tok != value:
            raise ProgramSyntaxError(f"expected {value!r}, found {tok!r}", pos)

    def integer(self):
        tok, pos = self.take()
        if tok == ")":
            raise ArityError(f"missing argument at position {pos}")
        try:
            return int(tok), pos
        except ValueError:
            raise ProgramSyntaxError(f"expected an integer, found {tok!r}", pos) from None

    def expr(self, bound, root):
        tok, pos = self.take()
        if tok == ")":
            raise ProgramSyntaxError("unexpected ')'", pos)
        if tok != "(":
            return self.atom(tok, pos, bound)
        head, hpos = self.take()
        if head == "has":
            name, npos = self.take()
            if name not in PRIMITIVE_NAMES:
                raise IllTypedProgram(f"has expects a primitive name, got {name!r} at position {npos}")
            node = Has(name)
        elif head == "rotate":
            child = self.expr(bound, False)
            angle, apos = self.integer()
            if angle not in ANGLES:
                raise IllTypedProgram(f"rotation angle {angle} at position {apos} is not one of {ANGLES}")
            node = Rotate(child, angle)
        elif head == "attach":
            node = Attach(self.expr(bound, False), self.expr(bound, False))
        elif head == "attach*":
            left = self.expr(bound, False)
            right = self.expr(bound, False)
            index, ipos = self.integer()
            if index < 1:
                raise IllTypedProgram(f"configuration index must be >= 1 at position {ipos}")
            node = AttachFixed(left, right, index)
        elif head == "map":
            self.expect("(")
            kw, kpos = self.take()
            if kw != "lambda":
                raise ProgramSyntaxError(f"expected 'lambda', found {kw!r}", kpos)
            var, vpos = self.take()
            if var != VARIABLE:
                raise ProgramSyntaxError(f"lambda variable must be {VARIABLE!r}", vpos)
            body = self.expr(True, False)
            self.expect(")")
            over = self.expr(bound, False)
            if not isinstance(over, (PrimSet, Var)):
                raise IllTypedProgram("map ranges over a primitive set or the bound variable")
            node = Map(body, over)
        elif head == "all-rotations":
            if not root:
                raise IllTypedProgram(f"all-rotations is only allowed at the root (position {hpos})")
            node = AllRotations(self.expr(bound, False))
        else:
            raise ProgramSyntaxError(f"unknown operator {head!r}", hpos)
        tok, pos = self.take()
        if tok != ")":
            arity = {"has": 1, "rotate": 2, "attach": 2, "attach*": 3, "map": 2, "all-rotations": 1}[head]
            raise ArityError(f"{head} takes {arity} arguments; extra argument at position {pos}")
        return node

    def atom(self, tok, pos, bound):
        if tok == VARIABLE:
            if not bound:
                raise UnboundVariable(f"variable {tok!r} at position {pos} is not bound by a lambda")
            return Var()
        if tok in PRIMITIVE_NAMES or tok == ALL_PRIMITIVES:
            return PrimSet(tok)
        if re.fullmatch(r"[A-Za-z_][\w-]*", tok):
            raise UnboundVariable(f"unknown symbol {tok!r} at position {pos}")
        raise ProgramSyntaxError(f"unexpected token {tok!r}", pos)


def parse_program(text: str):
    """Parse concept program text into an AST."""
    parser = _Parser(text)
    try:
        node = parser.expr(False, True)
    except ProgramSyntaxError as err:
        # a missing argument shows up as ')' or end of input where an
        # expression was expected; report it as an arity problem
        tok = parser.tokens[parser.i - 1][0] if parser.i else None
        if tok == ")" and "unexpected ')'" in str(err):
            raise ArityError(f"missing argument at position {err.position}") from None
        raise
    tok, pos = parser.peek()
    if tok is not None:
        raise ProgramSyntaxError(f"trailing input {tok!r}", pos)
    return node


def print_program(node) -> str:
    return to_text(node)
