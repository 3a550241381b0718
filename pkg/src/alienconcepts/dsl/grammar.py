"""Probabilistic grammar over concept programs.

Productions (depth-capped, uniform except for the two free parameters)::

    START   -> (all-rotations FSET)            theta_orient
             | FSET                            1 - theta_orient
    FSET    -> PRIMSET | (has PRIM) | COMB | (map (lambda x FBODY) PRIMSET)
             | (rotate FSET ANGLE)             uniform over allowed options
    COMB    -> (attach FSET FSET)              theta_config
             | (attach* FSET FSET IDX)         1 - theta_config
    PRIMSET -> p1 | p2 | p3 | p4 | S  (| x inside a lambda body)
    PRIM    -> p1 | p2 | p3 | p4
    ANGLE   -> 0 | 90 | 180 | 270
    IDX     -> 1 .. n_indices

Depth counts nonterminals along a derivation path, START being level 1.  An
FSET at level L may only pick alternatives whose shortest completion fits in
the cap, with the surviving options renormalized.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import NamedTuple

from ..errors import EnumerationBudgetExceeded, IllTypedProgram, NoTerminalAlternative
from .syntax import (
    ALL_PRIMITIVES,
    ANGLES,
    PRIMITIVE_NAMES,
    AllRotations,
    Attach,
    AttachFixed,
    Has,
    Map,
    PrimSet,
    Rotate,
    Var,
    children,
    replace_child,
)

DEFAULT_DEPTH_CAP = 12
DEFAULT_INDICES = 8

# alternative name -> extra levels needed below the FSET to finish
_FSET_ALTERNATIVES = (
    ("primset", 1),
    ("has", 1),
    ("rotate", 2),
    ("map", 2),
    ("comb", 3),
)


@dataclass(frozen=True)
class Grammar:
    theta_orient: float = 0.999
    theta_config: float = 0.725
    depth_cap: int = DEFAULT_DEPTH_CAP
    n_indices: int = DEFAULT_INDICES

    def __post_init__(self):
        for name in ("theta_orient", "theta_config"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie strictly inside (0, 1), got {v}")
        if self.n_indices < 1:
            raise ValueError("n_indices must be positive")

    def with_params(self, theta_orient=None, theta_config=None, depth_cap=None) -> "Grammar":
        changes = {}
        if theta_orient is not None:
            changes["theta_orient"] = theta_orient
        if theta_config is not None:
            changes["theta_config"] = theta_config
        if depth_cap is not None:
            changes["depth_cap"] = depth_cap
        return replace(self, **changes)

    def to_dict(self):
        return {
            "theta_orient": self.theta_orient,
            "theta_config": self.theta_config,
            "depth_cap": self.depth_cap,
            "n_indices": self.n_indices,
        }


class Label(NamedTuple):
    """Nonterminal a node was generated from, with its level and scope."""

    kind: str  # START, FSET or PRIMSET
    level: int
    body: bool


START = Label("START", 1, False)


@dataclass(frozen=True)
class ExpansionCounts:
    n_orient_yes: int = 0
    n_orient_no: int = 0
    n_config_free: int = 0
    n_config_fixed: int = 0
    log_const: float = 0.0

    def log_prior(self, theta_orient: float, theta_config: float) -> float:
        return (
            self.log_const
            + self.n_orient_yes * math.log(theta_orient)
            + self.n_orient_no * math.log1p(-theta_orient)
            + self.n_config_free * math.log(theta_config)
            + self.n_config_fixed * math.log1p(-theta_config)
        )

    def vector(self):
        return (self.n_orient_yes, self.n_orient_no, self.n_config_free, self.n_config_fixed)

    def __add__(self, other):
        return ExpansionCounts(
            self.n_orient_yes + other.n_orient_yes,
            self.n_orient_no + other.n_orient_no,
            self.n_config_free + other.n_config_free,
            self.n_config_fixed + other.n_config_fixed,
            self.log_const + other.log_const,
        )


def allowed_alternatives(level: int, depth_cap: int) -> tuple:
    room = depth_cap - level
    return tuple(name for name, need in _FSET_ALTERNATIVES if need <= room)


def _primset_size(body: bool) -> int:
    return len(PRIMITIVE_NAMES) + 1 + (1 if body else 0)


def _alternative_of(node) -> str:
    if isinstance(node, (PrimSet, Var)):
        return "primset"
    if isinstance(node, Has):
        return "has"
    if isinstance(node, Rotate):
        return "rotate"
    if isinstance(node, Map):
        return "map"
    if isinstance(node, (Attach, AttachFixed)):
        return "comb"
    raise IllTypedProgram(f"{type(node).__name__} cannot appear here")


def child_labels(node, label: Label) -> tuple:
    """Labels of ``node``'s children given the label ``node`` was generated from."""
    if label.kind == "START":
        if isinstance(node, AllRotations):
            return (Label("FSET", 2, False),)
        label = Label("FSET", 2, False)
    if label.kind == "PRIMSET":
        return ()
    L, body = label.level, label.body
    if isinstance(node, Rotate):
        return (Label("FSET", L + 1, body),)
    if isinstance(node, (Attach, AttachFixed)):
        return (Label("FSET", L + 2, body), Label("FSET", L + 2, body))
    if isinstance(node, Map):
        return (Label("FSET", L + 1, True), Label("PRIMSET", L + 1, body))
    return ()


def _check_primset(node, body):
    if isinstance(node, Var):
        if not body:
            raise IllTypedProgram("variable used outside a lambda body")
    elif not isinstance(node, PrimSet) or node.name not in PRIMITIVE_NAMES + (ALL_PRIMITIVES,):
        raise IllTypedProgram(f"expected a primitive set, got {node!r}")


def log_prior(node, g: Grammar, label: Label = START) -> float:
    """Log generation probability of ``node`` from ``label`` under ``g``."""
    if label.kind == "START":
        if isinstance(node, AllRotations):
            return math.log(g.theta_orient) + log_prior(node.child, g, Label("FSET", 2, False))
        return math.log1p(-g.theta_orient) + log_prior(node, g, Label("FSET", 2, False))
    if label.kind == "PRIMSET":
        _check_primset(node, label.body)
        return -math.log(_primset_size(label.body))
    alts = allowed_alternatives(label.level, g.depth_cap)
    if not alts:
        raise IllTypedProgram(f"no room for an expression at level {label.level}")
    kind = _alternative_of(node)
    if kind not in alts:
        raise IllTypedProgram(f"{type(node).__name__} exceeds the depth cap at level {label.level}")
    lp = -math.log(len(alts))
    if kind == "primset":
        _check_primset(node, label.body)
        return lp - math.log(_primset_size(label.body))
    if kind == "has":
        if node.prim not in PRIMITIVE_NAMES:
            raise IllTypedProgram(f"has expects a primitive, got {node.prim!r}")
        return lp - math.log(len(PRIMITIVE_NAMES))
    if kind == "rotate":
        if node.angle not in ANGLES:
            raise IllTypedProgram(f"bad angle {node.angle}")
        return lp - math.log(len(ANGLES)) + log_prior(node.child, g, child_labels(node, label)[0])
    if kind == "map":
        body_label, over_label = child_labels(node, label)
        return lp + log_prior(node.body, g, body_label) + log_prior(node.over, g, over_label)
    sub, _ = child_labels(node, label)
    lp += log_prior(node.left, g, sub) + log_prior(node.right, g, sub)
    if isinstance(node, Attach):
        return lp + math.log(g.theta_config)
    if not 1 <= node.index <= g.n_indices:
        raise IllTypedProgram(f"configuration index {node.index} outside 1..{g.n_indices}")
    return lp + math.log1p(-g.theta_config) - math.log(g.n_indices)


def expansion_counts(node, g: Grammar, label: Label = START) -> ExpansionCounts:
    """Counts of the parameterized choices plus the summed fixed log-probabilities."""
    yes = no = free = fixed = 0
    const = 0.0
    stack = [(node, label)]
    while stack:
        n, lab = stack.pop()
        if lab.kind == "START":
            if isinstance(n, AllRotations):
                yes += 1
                stack.append((n.child, Label("FSET", 2, False)))
            else:
                no += 1
                stack.append((n, Label("FSET", 2, False)))
            continue
        if lab.kind == "PRIMSET":
            _check_primset(n, lab.body)
            const -= math.log(_primset_size(lab.body))
            continue
        alts = allowed_alternatives(lab.level, g.depth_cap)
        kind = _alternative_of(n)
        if kind not in alts:
            raise IllTypedProgram(f"{type(n).__name__} exceeds the depth cap at level {lab.level}")
        const -= math.log(len(alts))
        if kind == "primset":
            _check_primset(n, lab.body)
            const -= math.log(_primset_size(lab.body))
        elif kind == "has":
            if n.prim not in PRIMITIVE_NAMES:
                raise IllTypedProgram(f"has expects a primitive, got {n.prim!r}")
            const -= math.log(len(PRIMITIVE_NAMES))
        elif kind == "rotate":
            if n.angle not in ANGLES:
                raise IllTypedProgram(f"bad angle {n.angle}")
            const -= math.log(len(ANGLES))
        elif kind == "comb":
            if isinstance(n, Attach):
                free += 1
            else:
                if not 1 <= n.index <= g.n_indices:
                    raise IllTypedProgram(f"configuration index {n.index} outside 1..{g.n_indices}")
                fixed += 1
                const -= math.log(g.n_indices)
        for c, cl in zip(children(n), child_labels(n, lab)):
            stack.append((c, cl))
    return ExpansionCounts(yes, no, free, fixed, const)


def _rng(rng):
    if isinstance(rng, random.Random):
        return rng
    return random.Random(rng)


def sample_subtree(g: Grammar, rng, label: Label):
    """Draw a subtree for ``label``; ``rng`` is a ``random.Random`` or a seed."""
    rng = _rng(rng)
    if label.kind == "START":
        if rng.random() < g.theta_orient:
            return AllRotations(sample_subtree(g, rng, Label("FSET", 2, False)))
        return sample_subtree(g, rng, Label("FSET", 2, False))
    if label.kind == "PRIMSET":
        return _sample_primset(rng, label.body)
    alts = allowed_alternatives(label.level, g.depth_cap)
    if not alts:
        raise NoTerminalAlternative(f"depth cap {g.depth_cap} leaves no option at level {label.level}")
    kind = alts[int(rng.random() * len(alts))]
    L, body = label.level, label.body
    if kind == "primset":
        return _sample_primset(rng, body)
    if kind == "has":
        return Has(PRIMITIVE_NAMES[int(rng.random() * len(PRIMITIVE_NAMES))])
    if kind == "rotate":
        child = sample_subtree(g, rng, Label("FSET", L + 1, body))
        return Rotate(child, ANGLES[int(rng.random() * len(ANGLES))])
    if kind == "map":
        inner = sample_subtree(g, rng, Label("FSET", L + 1, True))
        return Map(inner, _sample_primset(rng, body))
    sub = Label("FSET", L + 2, body)
    if rng.random() < g.theta_config:
        return Attach(sample_subtree(g, rng, sub), sample_subtree(g, rng, sub))
    left = sample_subtree(g, rng, sub)
    right = sample_subtree(g, rng, sub)
    return AttachFixed(left, right, 1 + int(rng.random() * g.n_indices))


def _sample_primset(rng, body):
    options = PRIMITIVE_NAMES + (ALL_PRIMITIVES,)
    k = int(rng.random() * _primset_size(body))
    return Var() if k == len(options) else PrimSet(options[k])


def sample_program(g: Grammar, rng, depth_cap: int = None):
    """Draw a whole program from the prior."""
    if depth_cap is not None:
        g = g.with_params(depth_cap=depth_cap)
    if g.depth_cap < 3:
        raise NoTerminalAlternative(f"depth cap must be at least 3, got {g.depth_cap}")
    return sample_subtree(g, rng, START)


def positions(node, label: Label = START) -> list:
    """Preorder list of ``(path, label)`` for every node in the tree."""
    out = []
    stack = [((), node, label)]
    while stack:
        path, n, lab = stack.pop()
        out.append((path, lab))
        kids = children(n)
        labs = child_labels(n, lab)
        for slot in range(len(kids) - 1, -1, -1):
            stack.append((path + (slot,), kids[slot], labs[slot]))
    return out


def subtree_at(node, path):
    for slot in path:
        node = children(node)[slot]
    return node


def replace_at(node, path, new):
    if not path:
        return new
    head, rest = path[0], path[1:]
    return replace_child(node, head, replace_at(children(node)[head], rest, new))


def count_programs(g: Grammar, label: Label = START, _memo=None) -> int:
    memo = {} if _memo is None else _memo
    if label in memo:
        return memo[label]
    if label.kind == "START":
        n = 2 * count_programs(g, Label("FSET", 2, False), memo)
    elif label.kind == "PRIMSET":
        n = _primset_size(label.body)
    else:
        L, body = label.level, label.body
        n = 0
        for kind in allowed_alternatives(L, g.depth_cap):
            if kind == "primset":
                n += _primset_size(body)
            elif kind == "has":
                n += len(PRIMITIVE_NAMES)
            elif kind == "rotate":
                n += len(ANGLES) * count_programs(g, Label("FSET", L + 1, body), memo)
            elif kind == "map":
                n += count_programs(g, Label("FSET", L + 1, True), memo) * _primset_size(body)
            else:
                k = count_programs(g, Label("FSET", L + 2, body), memo)
                n += (1 + g.n_indices) * k * k
    memo[label] = n
    return n


def enumerate_programs(g: Grammar, label: Label = START, budget: int = 10**6) -> list:
    """Every program derivable from ``label`` within the depth cap."""
    total = count_programs(g, label)
    if total > budget:
        raise EnumerationBudgetExceeded(f"{total} programs exceed the budget of {budget}")
    memo = {}

    def build(lab):
        if lab in memo:
            return memo[lab]
        if lab.kind == "START":
            inner = build(Label("FSET", 2, False))
            out = [AllRotations(n) for n in inner] + list(inner)
        elif lab.kind == "PRIMSET":
            out = [PrimSet(p) for p in PRIMITIVE_NAMES + (ALL_PRIMITIVES,)]
            if lab.body:
                out.append(Var())
        else:
            L, body = lab.level, lab.body
            out = []
            for kind in allowed_alternatives(L, g.depth_cap):
                if kind == "primset":
                    out.extend(build(Label("PRIMSET", L + 1, body)))
                elif kind == "has":
                    out.extend(Has(p) for p in PRIMITIVE_NAMES)
                elif kind == "rotate":
                    sub = build(Label("FSET", L + 1, body))
                    out.extend(Rotate(c, a) for c in sub for a in ANGLES)
                elif kind == "map":
                    bodies = build(Label("FSET", L + 1, True))
                    overs = build(Label("PRIMSET", L + 1, body))
                    out.extend(Map(b, o) for b in bodies for o in overs)
                else:
                    sub = build(Label("FSET", L + 2, body))
                    for a in sub:
                        for b in sub:
                            out.append(Attach(a, b))
                            out.extend(AttachFixed(a, b, i) for i in range(1, g.n_indices + 1))
        memo[lab] = out
        return out

    return build(label)
