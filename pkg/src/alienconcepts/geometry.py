"""Exact lattice geometry for alien figures.

Coordinates are integers with x growing to the right and y growing downward.
A unit cell ``(x, y)`` covers ``[x, x+1] x [y, y+1]`` and is split into two
triangles by one of its diagonals; a :class:`TriCell` names the cell and the
corner its triangle contains.  Everything here is integer arithmetic.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import (
    DisconnectedShape,
    InvalidAngle,
    OverlappingCells,
    PartBudgetExceeded,
    UniverseCapExceeded,
)

ANGLES = (0, 90, 180, 270)
MAX_PARTS = 3
DEFAULT_UNIVERSE_CAP = 200_000


class Half(enum.IntEnum):
    # ordered so that a quarter turn adds one
    NW = 0
    NE = 1
    SE = 2
    SW = 3

    @property
    def complement(self):
        return Half((self + 2) % 4)


class TriCell(NamedTuple):
    x: int
    y: int
    half: Half

    def vertices(self):
        """Triangle corners, counter-clockwise on screen (y down)."""
        x, y = self.x, self.y
        if self.half == Half.NW:
            return (x, y), (x, y + 1), (x + 1, y)
        if self.half == Half.NE:
            return (x, y), (x + 1, y + 1), (x + 1, y)
        if self.half == Half.SE:
            return (x + 1, y), (x, y + 1), (x + 1, y + 1)
        return (x, y), (x, y + 1), (x + 1, y + 1)

    def directed_edges(self):
        a, b, c = self.vertices()
        return (a, b), (b, c), (c, a)

    def shifted(self, dx, dy):
        return TriCell(self.x + dx, self.y + dy, self.half)


def tricells_overlap(a: TriCell, b: TriCell) -> bool:
    """Closed-form interior overlap test for two lattice triangles."""
    if (a.x, a.y) != (b.x, b.y):
        return False
    return b.half != a.half.complement


def _parse_half(value):
    if isinstance(value, Half):
        return value
    if isinstance(value, str):
        return Half[value.upper()]
    return Half(value)


def make_cell(x, y, half) -> TriCell:
    return TriCell(int(x), int(y), _parse_half(half))


@dataclass(frozen=True, order=True)
class Shape:
    """Canonical set of triangles: translated to the origin and sorted.

    A fully covered cell is always stored as its NW/SE pair so that equal
    regions have equal representations.
    """

    cells: tuple

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    @functools.cached_property
    def key(self) -> str:
        return ";".join(f"{c.x},{c.y},{c.half.name}" for c in self.cells)

    @functools.cached_property
    def occupancy(self) -> dict:
        occ = {}
        for c in self.cells:
            occ.setdefault((c.x, c.y), set()).add(c.half)
        return occ

    @functools.cached_property
    def sides(self) -> tuple:
        return tuple(boundary_sides(self))

    @property
    def width(self):
        return max(c.x for c in self.cells) + 1

    @property
    def height(self):
        return max(c.y for c in self.cells) + 1

    @classmethod
    def from_key(cls, key: str) -> "Shape":
        cells = []
        for chunk in key.split(";"):
            x, y, h = chunk.split(",")
            cells.append(make_cell(x, y, h))
        return canonicalize(cells)


def _normalize_full_cells(cells):
    by_cell = {}
    for c in cells:
        by_cell.setdefault((c.x, c.y), set()).add(c.half)
    out = []
    for (x, y), halves in by_cell.items():
        if len(halves) == 2:
            out.append(TriCell(x, y, Half.NW))
            out.append(TriCell(x, y, Half.SE))
        else:
            out.extend(TriCell(x, y, h) for h in halves)
    return out


def _check_disjoint(cells):
    by_cell = {}
    for c in cells:
        by_cell.setdefault((c.x, c.y), []).append(c)
    for group in by_cell.values():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                if tricells_overlap(group[i], group[j]):
                    raise OverlappingCells(f"{group[i]} overlaps {group[j]}")


def _is_connected(cells) -> bool:
    if not cells:
        return False
    owners = {}
    for i, c in enumerate(cells):
        for u, v in c.directed_edges():
            owners.setdefault(frozenset((u, v)), []).append(i)
    neighbours = [[] for _ in cells]
    for group in owners.values():
        for i in group:
            neighbours[i].extend(j for j in group if j != i)
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in neighbours[i]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == len(cells)


def canonicalize(cells: Iterable) -> Shape:
    """Validate a set of triangles and return its canonical :class:`Shape`."""
    cells = [c if isinstance(c, TriCell) else make_cell(*c) for c in cells]
    if len(set(cells)) != len(cells):
        raise OverlappingCells("duplicate triangle")
    _check_disjoint(cells)
    if not _is_connected(cells):
        raise DisconnectedShape("triangles are not edge-connected")
    return _canonical_unchecked(cells)


def _canonical_unchecked(cells) -> Shape:
    cells = _normalize_full_cells(cells)
    mx = min(c.x for c in cells)
    my = min(c.y for c in cells)
    return Shape(tuple(sorted(TriCell(c.x - mx, c.y - my, c.half) for c in cells)))


def _rotate_cell_90(c: TriCell) -> TriCell:
    # (x, y) -> (-y, x) on points; the unit cell lands at (-y-1, x)
    return TriCell(-c.y - 1, c.x, Half((c.half + 1) % 4))


def _rotate_cells(cells, angle):
    if angle not in ANGLES:
        raise InvalidAngle(f"angle must be one of {ANGLES}, got {angle!r}")
    for _ in range(angle // 90):
        cells = [_rotate_cell_90(c) for c in cells]
    return list(cells)


def rotate_shape(s: Shape, angle: int) -> Shape:
    return _canonical_unchecked(_rotate_cells(s.cells, angle))


class Side(NamedTuple):
    """Maximal straight run of boundary, directed with the interior on its left."""

    start: tuple
    end: tuple

    @property
    def vector(self):
        return (self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def squared_length(self) -> int:
        dx, dy = self.vector
        return dx * dx + dy * dy

    @property
    def kind(self) -> str:
        dx, dy = self.vector
        return "diagonal" if dx and dy else "axis"


def _sign(v):
    return (v > 0) - (v < 0)


def boundary_sides(s: Shape) -> list:
    """Maximal straight boundary segments of ``s`` (outer and inner), sorted."""
    edges = set()
    for c in s.cells:
        edges.update(c.directed_edges())
    boundary = {e for e in edges if (e[1], e[0]) not in edges}
    by_start = {}
    for u, v in boundary:
        d = (_sign(v[0] - u[0]), _sign(v[1] - u[1]))
        by_start[(u, d)] = v
    sides = []
    for (u, d), v in by_start.items():
        prev = (u[0] - d[0], u[1] - d[1])
        if by_start.get((prev, d)) == u:
            continue
        end = v
        while (end, d) in by_start:
            end = by_start[(end, d)]
        sides.append(Side(u, end))
    sides.sort()
    return sides


class Part(NamedTuple):
    """One primitive placed in a figure: rotated, canonicalized, then shifted."""

    prim: str
    dx: int
    dy: int
    rotation: int


class Derivation(NamedTuple):
    """Construction record: nested part string, configuration indices, rotation."""

    parts: str
    configs: tuple
    rotation: int


@dataclass(frozen=True)
class Primitive:
    id: str
    shape: Shape

    def __post_init__(self):
        if len(self.shape) != 4:
            raise ValueError(f"primitive {self.id} must have 4 triangles, has {len(self.shape)}")


@dataclass(frozen=True)
class Figure:
    """A canonical shape together with every part list known to build it.

    Equality and hashing use the shape only.
    """

    shape: Shape
    parses: frozenset = field(compare=False, hash=False)
    derivations: frozenset = field(default=frozenset(), compare=False, hash=False)

    @property
    def part_count(self) -> int:
        return len(self.shape) // 4

    def merged(self, other: "Figure") -> "Figure":
        return Figure(self.shape, self.parses | other.parses, self.derivations | other.derivations)

    def least_derivation(self):
        if not self.derivations:
            return None
        return min(self.derivations, key=derivation_sort_key)


def derivation_sort_key(d: Derivation):
    return (d.parts, d.configs, d.rotation)


@functools.lru_cache(maxsize=None)
def _oriented_prim_cells(shape: Shape, rotation: int) -> tuple:
    return rotate_shape(shape, rotation).cells


def part_cells(part: Part, primitives: dict) -> list:
    base = _oriented_prim_cells(primitives[part.prim].shape, part.rotation)
    return [c.shifted(part.dx, part.dy) for c in base]


def _shift_parse(parse, dx, dy):
    return tuple(Part(p.prim, p.dx + dx, p.dy + dy, p.rotation) for p in parse)


def primitive_figure(prim: Primitive) -> Figure:
    return Figure(
        prim.shape,
        frozenset({(Part(prim.id, 0, 0, 0),)}),
        frozenset({Derivation(prim.id, (), 0)}),
    )


def _placements(a: Shape, b: Shape):
    """Translations of ``b`` that glue one of its sides onto a side of ``a``."""
    seen = set()
    out = []
    occ = a.occupancy
    for sa in a.sides:
        va = sa.vector
        for sb in b.sides:
            vb = sb.vector
            if vb[0] != -va[0] or vb[1] != -va[1]:
                continue
            t = (sa.start[0] - sb.end[0], sa.start[1] - sb.end[1])
            if t in seen:
                continue
            seen.add(t)
            ok = True
            for c in b.cells:
                halves = occ.get((c.x + t[0], c.y + t[1]))
                if halves and (len(halves) > 1 or c.half.complement not in halves):
                    ok = False
                    break
            if ok:
                out.append(t)
    return out


def attach_shapes(a: Shape, b: Shape) -> list:
    """Ordered distinct shapes obtained by gluing ``b`` onto ``a``.

    Returns ``(shape, shift_a, shift_b)`` triples sorted by cell list, where the
    shifts map each input's coordinates into the result's canonical frame.
    """
    found = {}
    for tx, ty in _placements(a, b):
        raw = list(a.cells) + [c.shifted(tx, ty) for c in b.cells]
        mx = min(c.x for c in raw)
        my = min(c.y for c in raw)
        shape = _canonical_unchecked(raw)
        found.setdefault(shape, []).append(((-mx, -my), (tx - mx, ty - my)))
    return [(shape, found[shape]) for shape in sorted(found, key=lambda s: s.cells)]


def enumerate_attachments(a: Figure, b: Figure, max_parts: int = MAX_PARTS) -> list:
    """All configurations of ``a`` and ``b`` sharing one full equal-length side.

    ``b`` is only translated.  Results are deduplicated by shape, carry the
    merged parses of every placement producing them, and come back in
    configuration order (lexicographic on canonical cells).
    """
    if a.part_count + b.part_count > max_parts:
        raise PartBudgetExceeded(
            f"{a.part_count} + {b.part_count} parts exceeds the budget of {max_parts}"
        )
    out = []
    for shape, shifts in attach_shapes(a.shape, b.shape):
        parses = set()
        for (ax, ay), (bx, by) in shifts:
            for pa in a.parses:
                for pb in b.parses:
                    parses.add(_shift_parse(pa, ax, ay) + _shift_parse(pb, bx, by))
        out.append(Figure(shape, frozenset(parses)))
    return out


def rotate_figure(f: Figure, angle: int, primitives: dict) -> Figure:
    if angle not in ANGLES:
        raise InvalidAngle(f"angle must be one of {ANGLES}, got {angle!r}")
    if angle == 0:
        return f
    raw = _rotate_cells(f.shape.cells, angle)
    mx = min(c.x for c in raw)
    my = min(c.y for c in raw)
    parses = set()
    for parse in f.parses:
        parts = []
        for p in parse:
            cells = _rotate_cells(part_cells(p, primitives), angle)
            parts.append(
                Part(
                    p.prim,
                    min(c.x for c in cells) - mx,
                    min(c.y for c in cells) - my,
                    (p.rotation + angle) % 360,
                )
            )
        parses.add(tuple(parts))
    derivs = frozenset(
        Derivation(d.parts, d.configs, (d.rotation + angle) % 360) for d in f.derivations
    )
    return Figure(_canonical_unchecked(raw), frozenset(parses), derivs)


# quarter triangles of a unit cell, meeting at its centre
_QUARTERS = {Half.NW: ("N", "W"), Half.NE: ("N", "E"), Half.SE: ("S", "E"), Half.SW: ("S", "W")}
_QUARTER_NEIGHBOURS = {"N": ("E", "W", (0, -1, "S")), "S": ("E", "W", (0, 1, "N")),
                       "E": ("N", "S", (1, 0, "W")), "W": ("N", "S", (-1, 0, "E"))}


def _quarters(cells, dx=0, dy=0) -> set:
    """Region as quarter triangles; unlike half cells this form is unique."""
    return {(c.x + dx, c.y + dy, q) for c in cells for q in _QUARTERS[c.half]}


def _quarters_connected(region: set) -> bool:
    start = next(iter(region))
    seen = {start}
    stack = [start]
    while stack:
        x, y, q = stack.pop()
        a, b, (ox, oy, oq) = _QUARTER_NEIGHBOURS[q]
        for n in ((x, y, a), (x, y, b), (x + ox, y + oy, oq)):
            if n in region and n not in seen:
                seen.add(n)
                stack.append(n)
    return len(seen) == len(region)


def check_attachment(a: Shape, b: Shape, result: Shape) -> bool:
    """Independent validity check for one attachment output.

    Works on quarter-triangle regions, so it does not depend on how full cells
    are normalized.  Searches every translation of ``b`` inside ``result`` for
    one where the remainder is exactly a translate of ``a`` (hence the pieces
    are disjoint), the union is connected, and the two pieces touch along a
    segment that is a full side of each.
    """
    rq = _quarters(result.cells)
    aq = _quarters(a.cells)
    if len(rq) != len(aq) + 2 * len(b):
        return False
    ax0 = min(x for x, _, _ in aq)
    ay0 = min(y for _, y, _ in aq)
    for tbx in range(-b.width, result.width + 1):
        for tby in range(-b.height, result.height + 1):
            bq = _quarters(b.cells, tbx, tby)
            if not bq <= rq:
                continue
            rest = rq - bq
            tax = min(x for x, _, _ in rest) - ax0
            tay = min(y for _, y, _ in rest) - ay0
            if _quarters(a.cells, tax, tay) != rest:
                continue
            if not _quarters_connected(rq):
                continue
            if _shared_full_side(a, (tax, tay), b, (tbx, tby)):
                return True
    return False


def _unit_steps(side: Side):
    dx, dy = side.vector
    n = max(abs(dx), abs(dy))
    sx, sy = _sign(dx), _sign(dy)
    return [
        frozenset(((side.start[0] + i * sx, side.start[1] + i * sy),
                   (side.start[0] + (i + 1) * sx, side.start[1] + (i + 1) * sy)))
        for i in range(n)
    ]


def _shared_full_side(a: Shape, ta, b: Shape, tb) -> bool:
    def moved(side, t):
        return Side((side.start[0] + t[0], side.start[1] + t[1]), (side.end[0] + t[0], side.end[1] + t[1]))

    a_sides = [moved(s, ta) for s in boundary_sides(a)]
    b_sides = [moved(s, tb) for s in boundary_sides(b)]
    for sa in a_sides:
        for sb in b_sides:
            if set(_unit_steps(sa)) == set(_unit_steps(sb)):
                return True
    return False


class Universe:
    """Every distinct figure buildable from four primitives with 1..max_parts parts."""

    def __init__(self, primitives, figures, max_parts):
        self.primitives = {p.id: p for p in primitives}
        self.primitive_ids = tuple(p.id for p in primitives)
        self.figures = list(figures)
        self.max_parts = max_parts
        self.index = {f.shape: i for i, f in enumerate(self.figures)}
        self.part_counts = [f.part_count for f in self.figures]
        self.base = {
            pid: self.index[canonicalize(p.shape.cells)] for pid, p in self.primitives.items()
        }
        self.containing = {pid: 0 for pid in self.primitive_ids}
        for i, f in enumerate(self.figures):
            prims = {part.prim for parse in f.parses for part in parse}
            for pid in prims:
                self.containing[pid] |= 1 << i
        self.mask_by_parts = {}
        for i, n in enumerate(self.part_counts):
            self.mask_by_parts[n] = self.mask_by_parts.get(n, 0) | (1 << i)
        self._rot90 = [self.index[rotate_shape(f.shape, 90)] for f in self.figures]
        self._attach_cache = {}

    def __len__(self):
        return len(self.figures)

    def __getitem__(self, i) -> Figure:
        return self.figures[i]

    def id_of(self, shape: Shape):
        return self.index.get(shape)

    def rotated(self, i: int, angle: int) -> int:
        if angle not in ANGLES:
            raise InvalidAngle(f"angle must be one of {ANGLES}, got {angle!r}")
        for _ in range(angle // 90):
            i = self._rot90[i]
        return i

    def attachments(self, i: int, j: int) -> tuple:
        """Configuration list for figures ``i`` and ``j`` as universe ids.

        Entries that fall outside the universe are ``-1``; they keep their slot
        so configuration indices stay aligned with :func:`attach_shapes`.
        """
        key = (i, j)
        hit = self._attach_cache.get(key)
        if hit is None:
            if self.part_counts[i] + self.part_counts[j] > self.max_parts:
                hit = ()
            else:
                shapes = attach_shapes(self.figures[i].shape, self.figures[j].shape)
                hit = tuple(self.index.get(s, -1) for s, _ in shapes)
            self._attach_cache[key] = hit
        return hit

    def shape_set(self):
        return {f.shape for f in self.figures}


def enumerate_universe(primitives, max_parts: int = MAX_PARTS, cap: int = DEFAULT_UNIVERSE_CAP) -> Universe:
    """Enumerate all figures of 1..max_parts parts in all four orientations.

    Assemblies are built from unrotated parts by repeated attachment over every
    split of the part count, then each assembly is rotated as a whole.
    """
    primitives = list(primitives)
    if len({p.id for p in primitives}) != len(primitives):
        raise ValueError("primitive ids must be unique")
    prim_map = {p.id: p for p in primitives}
    assemblies = {1: {}}
    for p in primitives:
        f = primitive_figure(p)
        assemblies[1][f.shape] = assemblies[1][f.shape].merged(f) if f.shape in assemblies[1] else f
    for n in range(2, max_parts + 1):
        layer = {}
        for k in range(1, n):
            for a in sorted(assemblies[k].values(), key=lambda f: f.shape.cells):
                for b in sorted(assemblies[n - k].values(), key=lambda f: f.shape.cells):
                    results = enumerate_attachments(a, b, max_parts)
                    for idx, f in enumerate(results, start=1):
                        derivs = frozenset(
                            Derivation(f"({da.parts}{db.parts})", da.configs + db.configs + (idx,), 0)
                            for da in a.derivations
                            for db in b.derivations
                        )
                        f = Figure(f.shape, f.parses, derivs)
                        layer[f.shape] = layer[f.shape].merged(f) if f.shape in layer else f
                        if len(layer) > cap:
                            raise UniverseCapExceeded(f"more than {cap} assemblies")
        assemblies[n] = layer
    merged = {}
    for n in sorted(assemblies):
        for f in assemblies[n].values():
            for angle in ANGLES:
                g = rotate_figure(f, angle, prim_map)
                merged[g.shape] = merged[g.shape].merged(g) if g.shape in merged else g
                if len(merged) > cap:
                    raise UniverseCapExceeded(f"more than {cap} figures")
    figures = sorted(merged.values(), key=lambda f: (f.part_count, f.shape.cells))
    return Universe(primitives, figures, max_parts)
