"""Set-valued interpreter: a program denotes a set of universe figures.

Sets are Python ints used as bitmasks over universe ids.  Figures produced by
an operation but absent from the universe (more than ``max_parts`` parts, or
mixed part orientations) are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import EvaluationBudgetExceeded, IllTypedProgram, UnboundVariable
from .syntax import (
    ALL_PRIMITIVES,
    AllRotations,
    Attach,
    AttachFixed,
    Has,
    Map,
    PrimSet,
    Rotate,
    Var,
)

DEFAULT_PAIR_BUDGET = 5_000_000


def iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class Extension:
    mask: int

    @property
    def members(self) -> frozenset:
        return frozenset(iter_bits(self.mask))

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")

    def __contains__(self, figure_id: int) -> bool:
        return bool(self.mask >> figure_id & 1)

    def __len__(self):
        return self.size


class Evaluator:
    """Evaluates programs against one universe, caching by subprogram.

    Caches are plain dicts whose entries are written once with a value that
    depends only on the key, so concurrent callers can at worst duplicate work.
    """

    def __init__(self, universe, memoize: bool = True, pair_budget: int = DEFAULT_PAIR_BUDGET):
        self.universe = universe
        self.memoize = memoize
        self.pair_budget = pair_budget
        self._memo = {}
        self._attach_memo = {}
        u = universe
        self._all_base = 0
        for i in u.base.values():
            self._all_base |= 1 << i
        # figures small enough to join a figure with k parts
        self._fits = {
            k: sum(m for n, m in u.mask_by_parts.items() if n + k <= u.max_parts)
            for k in range(1, u.max_parts + 1)
        }

    def extension(self, node) -> Extension:
        return Extension(self.mask(node))

    def mask(self, node, binding=None) -> int:
        if not self.memoize:
            return self._eval(node, binding)
        key = (node, binding)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._eval(node, binding)
            self._memo[key] = hit
        return hit

    def _eval(self, node, binding):
        u = self.universe
        if isinstance(node, PrimSet):
            if node.name == ALL_PRIMITIVES:
                return self._all_base
            return 1 << u.base[node.name]
        if isinstance(node, Var):
            if binding is None:
                raise UnboundVariable("variable evaluated outside a lambda body")
            return 1 << binding
        if isinstance(node, Has):
            return u.containing[node.prim]
        if isinstance(node, Rotate):
            return self.rotate_mask(self.mask(node.child, binding), node.angle)
        if isinstance(node, AllRotations):
            m = self.mask(node.child, binding)
            out = m
            for angle in (90, 180, 270):
                out |= self.rotate_mask(m, angle)
            return out
        if isinstance(node, Attach):
            return self.attach_mask(self.mask(node.left, binding), self.mask(node.right, binding), None)
        if isinstance(node, AttachFixed):
            return self.attach_mask(
                self.mask(node.left, binding), self.mask(node.right, binding), node.index
            )
        if isinstance(node, Map):
            out = 0
            for fig in iter_bits(self.mask(node.over, binding)):
                out |= self.mask(node.body, fig)
            return out
        raise IllTypedProgram(f"cannot evaluate {node!r}")

    def rotate_mask(self, mask: int, angle: int) -> int:
        if angle == 0:
            return mask
        out = 0
        for i in iter_bits(mask):
            out |= 1 << self.universe.rotated(i, angle)
        return out

    def attach_mask(self, left: int, right: int, index) -> int:
        key = (left, right, index)
        if self.memoize:
            hit = self._attach_memo.get(key)
            if hit is not None:
                return hit
        u = self.universe
        out = 0
        pairs = 0
        for a in iter_bits(left):
            partners = right & self._fits.get(u.part_counts[a], 0)
            for b in iter_bits(partners):
                pairs += 1
                if pairs > self.pair_budget:
                    raise EvaluationBudgetExceeded(f"more than {self.pair_budget} figure pairs")
                configs = u.attachments(a, b)
                if not configs:
                    continue
                if index is None:
                    for r in configs:
                        if r >= 0:
                            out |= 1 << r
                else:
                    r = configs[(index - 1) % len(configs)]
                    if r >= 0:
                        out |= 1 << r
        if self.memoize:
            self._attach_memo[key] = out
        return out


def evaluate(program, universe, evaluator: Evaluator = None) -> Extension:
    """Extension of ``program`` over ``universe``."""
    ev = evaluator if evaluator is not None else Evaluator(universe)
    return ev.extension(program)
