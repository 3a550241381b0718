"""SVG rendering of figures: part outlines, optionally colour-coded by primitive."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

from ..geometry import Figure, Shape, boundary_sides, part_cells

PALETTE = {"p1": "#e69f00", "p2": "#56b4e9", "p3": "#009e73", "p4": "#cc79a7"}


@dataclass(frozen=True)
class SvgStyle:
    unit: int = 24
    margin: int = 6
    stroke: str = "#000000"
    stroke_width: int = 2
    color: bool = False
    palette: dict = field(default_factory=lambda: dict(PALETTE), hash=False)


def _parts(f: Figure, primitives):
    """Cell groups to outline: one per part of the least parse when known."""
    if primitives is None or not f.parses:
        return [(None, list(f.shape.cells))]
    parse = min(f.parses)
    return [(p.prim, part_cells(p, primitives)) for p in parse]


def _outline(cells, unit, margin) -> str:
    def pt(v):
        return f"{margin + v[0] * unit},{margin + v[1] * unit}"

    sides = boundary_sides(Shape(tuple(sorted(cells))))
    return " ".join(f"M{pt(s.start)} L{pt(s.end)}" for s in sides)


def render_svg(f: Figure, style: SvgStyle = None, primitives: dict = None) -> str:
    """Deterministic SVG text for a figure.

    Without ``primitives`` the whole figure is drawn as one outline; with them
    each part of the least parse gets its own outline (and fill colour when
    ``style.color`` is set).
    """
    style = style or SvgStyle()
    u, m = style.unit, style.margin
    width = f.shape.width * u + 2 * m
    height = f.shape.height * u + 2 * m
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for prim, cells in _parts(f, primitives):
        if style.color and prim is not None:
            fill = style.palette.get(prim, "#bbbbbb")
            for c in sorted(cells):
                pts = " ".join(f"{m + x * u},{m + y * u}" for x, y in c.vertices())
                lines.append(f"<polygon points={quoteattr(pts)} fill={quoteattr(fill)} stroke=\"none\"/>")
        label = f" data-part={quoteattr(prim)}" if prim else ""
        lines.append(
            f'<path d="{_outline(cells, u, m)}" fill="none" stroke={quoteattr(style.stroke)} '
            f'stroke-width="{style.stroke_width}" stroke-linecap="round"{label}/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
