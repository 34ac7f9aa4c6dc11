"""Byte-stable SVG output for laid-out scenes.

Coordinates are written with two decimals, attributes in a fixed order, and
elements in scene order, so identical scenes always give identical bytes.
Every color comes from the :class:`Theme`.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from xml.sax.saxutils import escape

from .layout import (
    FOOTNOTE_LINE_H,
    LINE_H,
    MARGIN,
    PAD,
    SceneEdge,
    SceneGraph,
    SceneNode,
    class_line_y,
    footnote_text,
)

# Default hex values are this package's choice; only the roles are prescribed.
DEFAULT_COLORS = {
    "inputArrow": "#E07B26",
    "outputArrow": "#2E8B57",
    "mutationArrow": "#555555",
    "transitionArrow": "#333333",
    "functionBoxFill": "#000000",
    "functionBoxText": "#FFFFFF",
    "stateNode": "#D6E8F5",
    "classBoxFill": "#FFFFFF",
    "snapshotFill": "#FFF8E7",
    "cellFill": "#FFFFFF",
    "outline": "#000000",
    "text": "#000000",
    "glyph": "#7A5230",
    "asterisk": "#C0392B",
    "background": "#FFFFFF",
}

HEX_RE = re.compile(r"#[0-9A-Fa-f]{6}\Z")
DASH_PATTERN = "6,4"
ARROW_LEN = 8.0
ARROW_HALF = 4.0


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class Theme:
    colors: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_COLORS))
    font_family: str = "sans-serif"
    base_font_size: float = 12.0

    def __post_init__(self) -> None:
        missing = set(DEFAULT_COLORS) - set(self.colors)
        if missing:
            raise ValueError("theme is missing color tokens: " + ", ".join(sorted(missing)))
        for token, value in self.colors.items():
            if not HEX_RE.match(value):
                raise ValueError(f"color {token} = {value!r} is not a #RRGGBB hex value")
        if not re.fullmatch(r"[A-Za-z][A-Za-z -]*", self.font_family):
            raise ValueError(f"font family must be a plain family name, got {self.font_family!r}")
        if self.base_font_size <= 0:
            raise ValueError("base_font_size must be positive")

    def __getitem__(self, token: str) -> str:
        return self.colors[token]


def load_theme(path: Path | str) -> Theme:
    """Read a ``key = value`` theme file; unspecified tokens keep their defaults."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=None)
    cp.optionxform = str
    cp.read_string("[theme]\n" + Path(path).read_text(encoding="utf-8"))
    colors = dict(DEFAULT_COLORS)
    theme = Theme()
    changes: dict = {}
    for key, raw in cp["theme"].items():
        value = raw.strip().strip("\"'")
        if key == "fontFamily":
            changes["font_family"] = value
        elif key == "baseFontSize":
            changes["base_font_size"] = float(value)
        elif key in DEFAULT_COLORS:
            colors[key] = value
        else:
            raise ValueError(f"unknown theme key {key!r}")
    return replace(theme, colors=colors, **changes)


def _n(v: float) -> str:
    out = f"{v:.2f}"
    return "0.00" if out == "-0.00" else out


class _Writer:
    def __init__(self, theme: Theme, outline_text: bool):
        self.theme = theme
        self.outline = _Outliner(theme) if outline_text else None
        self.out: list[str] = []

    def emit(self, line: str, depth: int = 1) -> None:
        self.out.append("  " * depth + line)

    def text(self, x: float, y: float, content: str, *, anchor: str = "start", weight: str = "normal",
             style: str = "normal", fill: str = "text", size: float | None = None, cls: str = "",
             depth: int = 2) -> None:
        size = size or self.theme.base_font_size
        color = self.theme[fill]
        css = f' class="{cls}"' if cls else ""
        if self.outline is not None:
            d = self.outline.path(content, x, y, size, anchor, weight, style)
            self.emit(f'<path{css} d="{d}" fill="{color}"/>', depth)
            return
        extras = ""
        if weight != "normal":
            extras += f' font-weight="{weight}"'
        if style != "normal":
            extras += f' font-style="{style}"'
        self.emit(
            f'<text{css} x="{_n(x)}" y="{_n(y)}" font-family="{self.theme.font_family}" '
            f'font-size="{_n(size)}" text-anchor="{anchor}" fill="{color}"{extras}>{escape(content)}</text>',
            depth,
        )

    def rect(self, x: float, y: float, w: float, h: float, fill: str | None, stroke: str | None = "outline",
             rx: float = 0.0, depth: int = 2) -> None:
        fill_v = self.theme[fill] if fill else "none"
        stroke_part = f' stroke="{self.theme[stroke]}" stroke-width="1.00"' if stroke else ""
        rx_part = f' rx="{_n(rx)}"' if rx else ""
        self.emit(f'<rect x="{_n(x)}" y="{_n(y)}" width="{_n(w)}" height="{_n(h)}"{rx_part} '
                  f'fill="{fill_v}"{stroke_part}/>', depth)

    def line(self, x1: float, y1: float, x2: float, y2: float, stroke: str = "outline", depth: int = 2) -> None:
        self.emit(f'<line x1="{_n(x1)}" y1="{_n(y1)}" x2="{_n(x2)}" y2="{_n(y2)}" '
                  f'stroke="{self.theme[stroke]}" stroke-width="1.00"/>', depth)


_NODE_CLASS = {
    "function_box": "function-box",
    "class_box": "class-box",
    "array_strip": "array-strip",
    "snapshot_box": "snapshot-box",
    "state_node": "state-node",
    "label": "label",
    "glyph": "glyph",
    "asterisk": "asterisk",
    "caption": "caption",
}
_EDGE_CLASS = {
    "solid_input": "input",
    "solid_output": "output",
    "dashed_mutation": "mutation",
    "transition": "transition",
}


def _boxed_lines(w: _Writer, node: SceneNode, fill: str, rx: float = 0.0) -> None:
    w.rect(node.x, node.y, node.width, node.height, fill, rx=rx)
    w.text(node.x + node.width / 2, node.y + LINE_H - 2, node.text, anchor="middle", weight="bold")
    lines = node.sections[0] if node.sections else ()
    if lines:
        w.line(node.x, node.y + LINE_H + 2, node.right, node.y + LINE_H + 2)
    for i, line in enumerate(lines):
        w.text(node.x + PAD, node.y + LINE_H * (i + 2), line)


def _node(w: _Writer, node: SceneNode) -> None:
    w.emit(f'<g class="node {_NODE_CLASS[node.kind]}">')
    size = w.theme.base_font_size
    if node.kind == "function_box":
        w.rect(node.x, node.y, node.width, node.height, "functionBoxFill")
        w.text(node.x + node.width / 2, node.y + node.height / 2 + size / 3, node.text, anchor="middle",
               weight="bold", fill="functionBoxText")
    elif node.kind == "class_box":
        w.rect(node.x, node.y, node.width, node.height, "classBoxFill")
        w.text(node.x + node.width / 2, node.y + LINE_H, node.text, anchor="middle", weight="bold")
        for s, section in enumerate(node.sections):
            top = class_line_y(node, s, 0)
            w.line(node.x, top - PAD / 2, node.right, top - PAD / 2)
            for i, line in enumerate(section):
                w.text(node.x + PAD, class_line_y(node, s, i) + LINE_H - 4, line)
    elif node.kind == "array_strip":
        count = max(len(node.cells), 1)
        cell_w = node.width / count
        for i in range(count):
            w.rect(node.x + i * cell_w, node.y, cell_w, node.height, "cellFill")
        for i, cell in enumerate(node.cells):
            w.text(node.x + (i + 0.5) * cell_w, node.y + node.height / 2 + size / 3, cell, anchor="middle")
    elif node.kind == "snapshot_box":
        _boxed_lines(w, node, "snapshotFill")
    elif node.kind == "state_node":
        _boxed_lines(w, node, "stateNode", rx=8.0)
    elif node.kind == "label":
        w.text(node.x + PAD, node.y + node.height / 2 + size / 3, node.text)
    elif node.kind == "glyph":
        # generic "this attribute is an object" icon: a box inside a box
        w.rect(node.x, node.y, node.width, node.height, None, "glyph")
        inset = node.width / 4
        w.rect(node.x + inset, node.y + inset, node.width - 2 * inset, node.height - 2 * inset, "glyph", None)
    elif node.kind == "asterisk":
        w.text(node.x + node.width / 2, node.y + node.height - 2, "*", anchor="middle", weight="bold",
               fill="asterisk", size=size * 1.5)
    elif node.kind == "caption":
        w.text(node.x, node.y + node.height / 2 + size / 3, node.text, style="italic")
    else:
        raise RenderError(f"unknown node kind {node.kind!r}")
    w.emit("</g>")


def _arrowhead(tip: tuple[float, float], dx: float, dy: float) -> str:
    length = (dx * dx + dy * dy) ** 0.5 or 1.0
    ux, uy = dx / length, dy / length
    bx, by = tip[0] - ux * ARROW_LEN, tip[1] - uy * ARROW_LEN
    px, py = -uy * ARROW_HALF, ux * ARROW_HALF
    return (f"M {_n(tip[0])} {_n(tip[1])} L {_n(bx + px)} {_n(by + py)} "
            f"L {_n(bx - px)} {_n(by - py)} Z")


def _edge(w: _Writer, edge: SceneEdge) -> None:
    color = w.theme[edge.color]
    (sx, sy), (ex, ey) = edge.start, edge.end
    dash = f' stroke-dasharray="{DASH_PATTERN}"' if edge.style == "dashed_mutation" else ""
    w.emit(f'<g class="edge {_EDGE_CLASS[edge.style]}">')
    if edge.bend is None:
        w.emit(f'<path d="M {_n(sx)} {_n(sy)} L {_n(ex)} {_n(ey)}" fill="none" stroke="{color}" '
               f'stroke-width="1.50"{dash}/>', 2)
        head = _arrowhead((ex, ey), ex - sx, ey - sy)
        label_at = ((sx + ex) / 2, (sy + ey) / 2 - 6)
    else:
        b = edge.bend
        w.emit(f'<path d="M {_n(sx)} {_n(sy)} C {_n(sx)} {_n(b)} {_n(ex)} {_n(b)} {_n(ex)} {_n(ey)}" '
               f'fill="none" stroke="{color}" stroke-width="1.50"{dash}/>', 2)
        head = _arrowhead((ex, ey), 0.0, ey - b)
        label_at = ((sx + ex) / 2, 0.75 * b + 0.125 * (sy + ey) + LINE_H)
    w.emit(f'<path d="{head}" fill="{color}"/>', 2)
    if edge.label:
        w.text(label_at[0], label_at[1], edge.label, anchor="middle", cls="edge-label")
    w.emit("</g>")


def render(scene: SceneGraph, theme: Theme | None = None, *, outline_text: bool = False) -> str:
    """SVG 1.1 document for ``scene``.

    With ``outline_text`` every label becomes a filled path, so the text is
    not machine-readable from the file (needs matplotlib for glyph outlines).
    """
    if not scene.nodes:
        raise RenderError("cannot render an empty scene")
    theme = theme or Theme()
    w = _Writer(theme, outline_text)
    w.out.append('<?xml version="1.0" encoding="UTF-8"?>')
    w.out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_n(scene.width)}" '
        f'height="{_n(scene.height)}" viewBox="0 0 {_n(scene.width)} {_n(scene.height)}">'
    )
    if scene.title:
        w.emit(f"<title>{escape(scene.title)}</title>")
    w.rect(0, 0, scene.width, scene.height, "background", None, depth=1)
    for node in scene.nodes:
        _node(w, node)
    for edge in scene.edges:
        _edge(w, edge)
    count = len(scene.footnotes)
    for i, ref in enumerate(scene.footnotes):
        y = scene.height - MARGIN - (count - 1 - i) * FOOTNOTE_LINE_H - 4
        w.text(MARGIN, y, footnote_text(ref), fill="asterisk", cls="footnote", depth=1)
    w.out.append("</svg>")
    return "\n".join(w.out) + "\n"


class _Outliner:
    """Turns strings into SVG path data using matplotlib's bundled font."""

    def __init__(self, theme: Theme):
        try:
            from matplotlib.font_manager import FontProperties
            from matplotlib.path import Path as MplPath
            from matplotlib.textpath import TextPath
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise RenderError("outlined text needs matplotlib (install the 'outline' extra)") from exc
        self._props = FontProperties
        self._path = MplPath
        self._text_path = TextPath

    def path(self, content: str, x: float, y: float, size: float, anchor: str, weight: str, style: str) -> str:
        prop = self._props(family="DejaVu Sans", weight=weight, style=style)
        tp = self._text_path((0, 0), content, size=size, prop=prop)
        verts = tp.vertices
        width = float(verts[:, 0].max()) if len(verts) else 0.0
        shift = {"start": 0.0, "middle": -width / 2, "end": -width}[anchor]
        parts: list[str] = []
        for points, code in tp.iter_segments(simplify=False, curves=True):
            pts = [(x + shift + points[i], y - points[i + 1]) for i in range(0, len(points), 2)]
            coords = " ".join(f"{_n(px)} {_n(py)}" for px, py in pts)
            if code == self._path.MOVETO:
                parts.append(f"M {coords}")
            elif code == self._path.LINETO:
                parts.append(f"L {coords}")
            elif code == self._path.CURVE3:
                parts.append(f"Q {coords}")
            elif code == self._path.CURVE4:
                parts.append(f"C {coords}")
            elif code == self._path.CLOSEPOLY:
                parts.append("Z")
        return " ".join(parts) or f"M {_n(x)} {_n(y)}"
