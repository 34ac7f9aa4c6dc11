"""Deterministic geometry for diagrams.

All sizes are abstract units snapped to an 8-unit grid. Text width is
estimated from character count, so layout never depends on installed fonts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    AlgorithmicFunction,
    ArrayValue,
    BoolValue,
    ClassDecl,
    ClassDeclaration,
    Diagram,
    ExerciseAssignment,
    FunctionExample,
    Inheritance,
    IntValue,
    ObjectSnapshot,
    Severity,
    StateChangeFunction,
    StateTransitionRules,
    SymbolicCount,
    TextValue,
    Value,
    value_equal,
)

GRID = 8
CHAR_W = 7.0
LINE_H = 16
PAD = 8
MARGIN = 24
CELL_MIN = 24
SCALAR_H = 24
ITEM_GAP = 8
ROW_GAP = 32
COLUMN_GAP = 48
CLASS_GAP = 48
FUNC_MIN_W = 64
FUNC_MIN_H = 40
ASTERISK_W = 12
ASTERISK_H = 16
ASTERISK_GAP = 4
GLYPH_SIZE = 12
STATE_V_GAP = 32
LOOP_DROP = 32
FOOTNOTE_LINE_H = 20

CAPTION_TEXT = "Dashed arrow: the object's state changes. Solid arrow: the value returned."

NODE_KINDS = (
    "function_box", "class_box", "array_strip", "snapshot_box", "state_node",
    "label", "glyph", "asterisk", "caption",
)
EDGE_STYLES = ("solid_input", "solid_output", "dashed_mutation", "transition")
EDGE_COLOR = {
    "solid_input": "inputArrow",
    "solid_output": "outputArrow",
    "dashed_mutation": "mutationArrow",
    "transition": "transitionArrow",
}


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class SceneNode:
    kind: str
    x: float
    y: float
    width: float
    height: float
    text: str = ""
    # class boxes: sections of body lines; snapshot/state boxes: one section
    sections: tuple[tuple[str, ...], ...] = ()
    cells: tuple[str, ...] = ()
    # glyphs sit on top of a class box and may overlap it
    opaque: bool = True
    ref: str | None = None

    @property
    def right(self) -> float:
        return self.x + self.width

    @property
    def bottom(self) -> float:
        return self.y + self.height

    def overlaps(self, other: SceneNode) -> bool:
        return (self.x < other.right and other.x < self.right
                and self.y < other.bottom and other.y < self.bottom)

    def on_boundary(self, px: float, py: float, eps: float = 1e-6) -> bool:
        inside_x = self.x - eps <= px <= self.right + eps
        inside_y = self.y - eps <= py <= self.bottom + eps
        on_vertical = abs(px - self.x) <= eps or abs(px - self.right) <= eps
        on_horizontal = abs(py - self.y) <= eps or abs(py - self.bottom) <= eps
        return (on_vertical and inside_y) or (on_horizontal and inside_x)


@dataclass(frozen=True)
class SceneEdge:
    source: int
    target: int
    start: tuple[float, float]
    end: tuple[float, float]
    style: str
    label: str | None = None
    # y of the control points for edges routed below the nodes
    bend: float | None = None

    @property
    def color(self) -> str:
        return EDGE_COLOR[self.style]


@dataclass(frozen=True)
class SceneGraph:
    width: float
    height: float
    nodes: tuple[SceneNode, ...]
    edges: tuple[SceneEdge, ...]
    # rules-diagram ids named by asterisks, one footnote line each
    footnotes: tuple[str, ...] = ()
    title: str = ""


def snap(value: float) -> float:
    return float(math.ceil(value / GRID - 1e-9) * GRID)


def text_width(text: str) -> float:
    return len(text) * CHAR_W


def compact(value: Value) -> str:
    """One-line rendering of a value for cells and field lines."""
    if isinstance(value, BoolValue):
        return "true" if value.value else "false"
    if isinstance(value, IntValue):
        return str(value.value)
    if isinstance(value, TextValue):
        return '"' + value.value.replace("\n", " ") + '"'
    if isinstance(value, SymbolicCount):
        return str(value)
    if isinstance(value, ArrayValue):
        return "[" + ", ".join(compact(v) for v in value.items) + "]"
    head = value.class_name + (f"({value.state_tag})" if value.state_tag else "")
    return head + "{" + ", ".join(f"{n}: {compact(v)}" for n, v in value.fields) + "}"


def _snapshot_header(snap_: ObjectSnapshot) -> str:
    return snap_.class_name + (f" ({snap_.state_tag})" if snap_.state_tag else "")


# -- building blocks ----------------------------------------------------------


@dataclass
class _Item:
    """A node-to-be with a size, placed later."""

    kind: str
    width: float
    height: float
    text: str = ""
    sections: tuple[tuple[str, ...], ...] = ()
    cells: tuple[str, ...] = ()


def _value_item(value: Value) -> _Item:
    if isinstance(value, ArrayValue):
        cells = tuple(compact(v) for v in value.items)
        cell_w = snap(max([CELL_MIN] + [text_width(c) + PAD for c in cells]))
        return _Item("array_strip", cell_w * max(len(cells), 1), SCALAR_H, cells=cells)
    if isinstance(value, ObjectSnapshot):
        header = _snapshot_header(value)
        lines = tuple(f"{n}: {compact(v)}" for n, v in value.fields)
        width = snap(max([text_width(header)] + [text_width(l) for l in lines]) + 2 * PAD)
        height = snap((1 + len(lines)) * LINE_H + PAD)
        return _Item("snapshot_box", width, height, text=header, sections=(lines,))
    text = compact(value)
    return _Item("label", snap(text_width(text) + 2 * PAD), SCALAR_H, text=text)


def _stack_height(items: list[_Item]) -> float:
    if not items:
        return 0.0
    return sum(i.height for i in items) + ITEM_GAP * (len(items) - 1)


def _anchors(top: float, height: float, count: int) -> list[float]:
    return [top + height * (i + 1) / (count + 1) for i in range(count)]


class _Scene:
    def __init__(self) -> None:
        self.nodes: list[SceneNode] = []
        self.edges: list[SceneEdge] = []
        self.footnotes: list[str] = []
        self.reserve_bottom = 0.0

    def add(self, item: _Item | None = None, x: float = 0, y: float = 0, **kw) -> int:
        if item is not None:
            node = SceneNode(item.kind, x, y, item.width, item.height, item.text, item.sections, item.cells, **kw)
        else:
            node = SceneNode(x=x, y=y, **kw)
        self.nodes.append(node)
        return len(self.nodes) - 1

    def bounds(self) -> tuple[float, float]:
        right = max((n.right for n in self.nodes), default=0.0)
        bottom = max((n.bottom for n in self.nodes), default=0.0)
        return right, max(bottom, self.reserve_bottom)


# -- function rows ------------------------------------------------------------


@dataclass
class _Row:
    left: list[_Item]
    right: list[_Item]
    output_index: int | None
    marked: bool
    label: str

    @property
    def height(self) -> float:
        return max(_stack_height(self.left), _stack_height(self.right), FUNC_MIN_H)

    @property
    def left_width(self) -> float:
        return max((i.width for i in self.left), default=0.0)

    @property
    def right_width(self) -> float:
        width = max((i.width for i in self.right), default=0.0)
        if self.marked and self.output_index is not None:
            out = self.right[self.output_index]
            width = max(width, out.width + ASTERISK_GAP + ASTERISK_W)
        return width

    @property
    def box_width(self) -> float:
        return max(FUNC_MIN_W, snap(text_width(self.label) + 3 * PAD))


def _row_for(example: FunctionExample, label: str) -> _Row:
    left_values: list[Value] = list(example.inputs)
    for snap_ in example.before:
        if not any(value_equal(snap_, v) for v in left_values):
            left_values.append(snap_)
    right: list[_Item] = []
    output_index = None
    if example.output is not None:
        output_index = 0
        right.append(_value_item(example.output))
    for before, after in example.pairs():
        if not value_equal(before, after):
            right.append(_value_item(after))
    # snapshots with no before counterpart are still shown as resulting states
    for after in example.after[len(example.before):]:
        right.append(_value_item(after))
    return _Row([_value_item(v) for v in left_values], right, output_index,
                example.marked and example.output is not None, label)


def _place_rows(scene: _Scene, rows: list[_Row], x0: float, y0: float, rule_ref: str | None) -> tuple[float, float]:
    """Lay out example rows in aligned columns; returns (right, bottom)."""
    if not rows:
        return x0, y0
    left_w = max(r.left_width for r in rows)
    box_w = max(r.box_width for r in rows)
    right_w = max(r.right_width for r in rows)
    has_left = left_w > 0
    box_x = x0 + (left_w + COLUMN_GAP if has_left else 0)
    right_x = box_x + box_w + COLUMN_GAP
    y = y0
    for row in rows:
        h = snap(row.height)
        box = scene.add(kind="function_box", x=box_x, y=y, width=box_w, height=h, text=row.label)
        box_node = scene.nodes[box]

        top = y + (h - _stack_height(row.left)) / 2
        left_ids = []
        for item in row.left:
            left_ids.append(scene.add(item, x=box_x - COLUMN_GAP - item.width, y=top))
            top += item.height + ITEM_GAP
        for node_id, ay in zip(left_ids, _anchors(y, h, len(left_ids))):
            n = scene.nodes[node_id]
            scene.edges.append(SceneEdge(node_id, box, (n.right, n.y + n.height / 2), (box_node.x, ay),
                                         "solid_input"))

        top = y + (h - _stack_height(row.right)) / 2
        right_ids = []
        for item in row.right:
            right_ids.append(scene.add(item, x=right_x, y=top))
            top += item.height + ITEM_GAP
        for pos, (node_id, ay) in enumerate(zip(right_ids, _anchors(y, h, len(right_ids)))):
            n = scene.nodes[node_id]
            style = "solid_output" if pos == row.output_index else "dashed_mutation"
            scene.edges.append(SceneEdge(box, node_id, (box_node.right, ay), (n.x, n.y + n.height / 2), style))
        if row.marked:
            out = scene.nodes[right_ids[row.output_index]]
            scene.add(kind="asterisk", x=out.right + ASTERISK_GAP, y=out.y, width=ASTERISK_W,
                      height=ASTERISK_H, text="*", ref=rule_ref)
            if rule_ref is not None and rule_ref not in scene.footnotes:
                scene.footnotes.append(rule_ref)
        y += h + ROW_GAP
    return right_x + right_w, y - ROW_GAP


def _function_label(name: str) -> str:
    return f"{name}()"


def _layout_function(scene: _Scene, d: AlgorithmicFunction | StateChangeFunction) -> None:
    label = _function_label(d.function.name)
    rows = [_row_for(ex, label) for ex in d.function.examples]
    ref = d.rule_ref.target if d.rule_ref is not None else None
    if rows:
        _place_rows(scene, rows, MARGIN, MARGIN, ref)
    else:
        # signature only: a lone function box
        width = max(FUNC_MIN_W, snap(text_width(label) + 3 * PAD))
        scene.add(kind="function_box", x=MARGIN, y=MARGIN, width=width, height=FUNC_MIN_H, text=label)


# -- classes ------------------------------------------------------------------


def _class_lines(cls: ClassDecl) -> tuple[tuple[str, ...], ...]:
    attrs = tuple(a.name + (f": {a.type_name}" if a.type_name else "") for a in cls.attributes)
    ctors = tuple(f"{cls.name}({', '.join(c.params)})" for c in cls.constructors)
    methods = tuple(
        f"{m.name}({', '.join(p.type_name for p in m.params)})" + (f": {m.return_type}" if m.return_type else "")
        for m in cls.methods
    )
    return tuple(section for section in (attrs, ctors, methods) if section)


def _class_box_size(cls: ClassDecl) -> tuple[float, float, tuple[tuple[str, ...], ...]]:
    sections = _class_lines(cls)
    widest = text_width(cls.name)
    for section in sections:
        for line in section:
            widest = max(widest, text_width(line))
    has_glyph = any(a.is_object for a in cls.attributes)
    width = snap(widest + 2 * PAD + (GLYPH_SIZE + PAD if has_glyph else 0))
    lines = sum(len(s) for s in sections)
    height = snap(LINE_H + PAD + lines * LINE_H + PAD * len(sections) + PAD)
    return width, height, sections


def class_line_y(box: SceneNode, section: int, line: int) -> float:
    """Top of a body line inside a class box; shared with the renderer."""
    before = sum(len(s) for s in box.sections[:section])
    return box.y + LINE_H + PAD + PAD * (section + 1) + (before + line) * LINE_H


def _layout_classes(scene: _Scene, d: ClassDeclaration | Inheritance) -> None:
    x = MARGIN
    for cls in d.classes:
        width, height, sections = _class_box_size(cls)
        rows = [_row_for(ex, _function_label(m.name)) for m in cls.methods for ex in m.examples]
        box = scene.add(kind="class_box", x=x, y=MARGIN, width=width, height=height, text=cls.name,
                        sections=sections)
        box_node = scene.nodes[box]
        for i, attr in enumerate(cls.attributes):
            if attr.is_object:
                ly = class_line_y(box_node, 0, i)
                scene.add(kind="glyph", x=box_node.right - PAD - GLYPH_SIZE, y=ly + (LINE_H - GLYPH_SIZE) / 2,
                          width=GLYPH_SIZE, height=GLYPH_SIZE, opaque=False, ref=attr.name)
        right = box_node.right
        if rows:
            right, _ = _place_rows(scene, rows, x, box_node.bottom + ROW_GAP, None)
        x = max(right, x + width) + CLASS_GAP


# -- state machines -----------------------------------------------------------


def state_layers(d: StateTransitionRules) -> dict[str, int]:
    """Longest-path layer per state; cycles are broken in declaration order."""
    names = list(dict.fromkeys(s.name for s in d.states))
    preds: dict[str, set[str]] = {n: set() for n in names}
    for t in d.transitions:
        if t.source in preds and t.target in preds and t.source != t.target:
            preds[t.target].add(t.source)
    layer: dict[str, int] = {}
    remaining = list(names)
    while remaining:
        ready = [n for n in remaining if preds[n] <= layer.keys()]
        if not ready:
            ready = [remaining[0]]
        for n in ready:
            layer[n] = 1 + max((layer[p] for p in preds[n] if p in layer), default=-1)
        remaining = [n for n in remaining if n not in layer]
    return layer


def _layout_states(scene: _Scene, d: StateTransitionRules) -> None:
    layer = state_layers(d)
    states = [s for s in d.states if layer.get(s.name) is not None]
    seen: set[str] = set()
    unique = []
    for s in states:
        if s.name not in seen:
            unique.append(s)
            seen.add(s.name)
    if not unique:
        return
    items: dict[str, _Item] = {}
    for s in unique:
        lines = tuple(s.visible_fields)
        width = snap(max([text_width(s.name)] + [text_width(l) for l in lines]) + 2 * PAD)
        height = snap((1 + len(lines)) * LINE_H + PAD)
        items[s.name] = _Item("state_node", width, height, text=s.name, sections=(lines,) if lines else ())
    n_layers = max(layer.values()) + 1
    columns: list[list[str]] = [[] for _ in range(n_layers)]
    for s in unique:
        columns[layer[s.name]].append(s.name)
    col_h = [sum(items[n].height for n in col) + STATE_V_GAP * max(len(col) - 1, 0) for col in columns]
    total_h = max(col_h)
    label_w = max((text_width(t.action) for t in d.transitions), default=0.0)
    gap = snap(max(COLUMN_GAP * 2, label_w + 2 * COLUMN_GAP))

    ids: dict[str, int] = {}
    x = MARGIN
    for col, h in zip(columns, col_h):
        if not col:
            continue
        y = MARGIN + snap((total_h - h) / 2)
        col_w = max(items[n].width for n in col)
        for name in col:
            ids[name] = scene.add(items[name], x=x, y=y)
            y += items[name].height + STATE_V_GAP
        x += col_w + gap

    content_bottom = max(scene.nodes[i].bottom for i in ids.values())
    valid = [t for t in d.transitions if t.source in ids and t.target in ids]
    forward = [t for t in valid if layer[t.target] > layer[t.source]]
    below = [t for t in valid if layer[t.target] <= layer[t.source]]

    # spread anchors per node side so parallel edges stay apart
    slots: dict[tuple[str, str], list[tuple[int, int]]] = {}
    for i, t in enumerate(valid):
        src_side, dst_side = ("right", "left") if t in forward else ("bottom", "bottom")
        slots.setdefault((t.source, src_side), []).append((i, 0))
        slots.setdefault((t.target, dst_side), []).append((i, 1))

    def anchor(name: str, side: str, edge_index: int, role: int) -> tuple[float, float]:
        node = scene.nodes[ids[name]]
        taken = slots[(name, side)]
        k = taken.index((edge_index, role))
        if side == "right":
            return node.right, _anchors(node.y, node.height, len(taken))[k]
        if side == "left":
            return node.x, _anchors(node.y, node.height, len(taken))[k]
        return _anchors(node.x, node.width, len(taken))[k], node.bottom

    bend = content_bottom + LOOP_DROP
    for i, t in enumerate(valid):
        if t in forward:
            scene.edges.append(SceneEdge(ids[t.source], ids[t.target], anchor(t.source, "right", i, 0),
                                         anchor(t.target, "left", i, 1), "transition", t.action))
        else:
            scene.edges.append(SceneEdge(ids[t.source], ids[t.target], anchor(t.source, "bottom", i, 0),
                                         anchor(t.target, "bottom", i, 1), "transition", t.action, bend=bend))
    if below:
        # room under the nodes for the curves and their labels
        scene.reserve_bottom = bend + LINE_H + PAD


# -- entry point --------------------------------------------------------------

_CONTEXT_RULES = {"V5", "V6", "V10"}


def _check(diagram: Diagram, assignment: ExerciseAssignment | None) -> None:
    from .validator import validate

    context = assignment if assignment is not None else ExerciseAssignment("_", None, (diagram,))
    errors = [
        d for d in validate(context)
        if d.severity is Severity.ERROR and d.diagram == diagram.id
        and (assignment is not None or d.rule not in _CONTEXT_RULES)
    ]
    if errors:
        raise LayoutError(f"diagram {diagram.id!r} has validation errors: " + "; ".join(e.format() for e in errors))


def layout(diagram: Diagram, *, assignment: ExerciseAssignment | None = None, check: bool = True) -> SceneGraph:
    """Place every element of ``diagram``.

    With ``check`` on, a diagram carrying validation errors is refused. Pass
    the owning ``assignment`` so cross-diagram references can be resolved;
    without it, rules that need other diagrams are skipped.
    """
    if check:
        _check(diagram, assignment)
    scene = _Scene()
    if isinstance(diagram, (AlgorithmicFunction, StateChangeFunction)):
        _layout_function(scene, diagram)
    elif isinstance(diagram, (ClassDeclaration, Inheritance)):
        _layout_classes(scene, diagram)
    elif isinstance(diagram, StateTransitionRules):
        _layout_states(scene, diagram)
    else:
        raise LayoutError(f"unknown diagram kind {type(diagram).__name__}")

    _, bottom = scene.bounds()
    bottom = max(bottom, MARGIN)
    if diagram.note is not None:
        y = bottom + ROW_GAP if scene.nodes else MARGIN
        scene.add(kind="label", x=MARGIN, y=y, width=snap(text_width(diagram.note) + 2 * PAD),
                  height=SCALAR_H, text=diagram.note)
        _, bottom = scene.bounds()
    if isinstance(diagram, StateChangeFunction):
        y = bottom + ROW_GAP if scene.nodes else MARGIN
        scene.add(kind="caption", x=MARGIN, y=y, width=snap(text_width(CAPTION_TEXT)), height=SCALAR_H,
                  text=CAPTION_TEXT)

    right, bottom = scene.bounds()
    # footnotes need the full width of their text
    for ref in scene.footnotes:
        right = max(right, MARGIN + snap(text_width(footnote_text(ref))))
    height = bottom + (GRID + FOOTNOTE_LINE_H * len(scene.footnotes) if scene.footnotes else 0) + MARGIN
    return SceneGraph(right + MARGIN, height, tuple(scene.nodes), tuple(scene.edges),
                      tuple(scene.footnotes), diagram.id)


def footnote_text(ref: str) -> str:
    return f"* the rules in diagram \"{ref}\" decide this result"
