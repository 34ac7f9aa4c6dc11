"""Typed syntax tree and value model for exercise assignments.

Every node is an immutable dataclass. Source spans are carried on each node
but excluded from equality, so two trees parsed from differently formatted
sources compare equal when they describe the same assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar, Union


@dataclass(frozen=True, order=True)
class SourceSpan:
    """1-based source range; the end column is exclusive."""

    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if (self.start_line, self.start_col) > (self.end_line, self.end_col):
            raise ValueError(f"span start after end: {self}")

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"

    def to(self, other: SourceSpan) -> SourceSpan:
        return SourceSpan(self.file, self.start_line, self.start_col, other.end_line, other.end_col)


NO_SPAN = SourceSpan("<generated>", 1, 1, 1, 1)


def _span() -> SourceSpan:
    return field(default=NO_SPAN, compare=False, repr=False)


# -- values -------------------------------------------------------------------


@dataclass(frozen=True)
class IntValue:
    value: int
    span: SourceSpan = _span()


@dataclass(frozen=True)
class BoolValue:
    value: bool
    span: SourceSpan = _span()


@dataclass(frozen=True)
class TextValue:
    value: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ArrayValue:
    items: tuple[Value, ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class SymbolicCount:
    """A relative collection size such as ``N + 1 "tasks"``."""

    base: str
    offset: int = 0
    unit: str = "items"
    span: SourceSpan = _span()

    def __post_init__(self) -> None:
        if not self.unit:
            raise ValueError("symbolic count needs a non-empty unit")
        if len(self.base) != 1 or not self.base.isalpha() or not self.base.isascii():
            raise ValueError(f"symbolic count base must be a single letter, got {self.base!r}")

    def __str__(self) -> str:
        if self.offset == 0:
            return f"{self.base} {self.unit}"
        sign = "+" if self.offset > 0 else "-"
        return f"{self.base} {sign} {abs(self.offset)} {self.unit}"


@dataclass(frozen=True)
class ObjectSnapshot:
    """State of one object; ``fields`` keeps source order for rendering."""

    class_name: str
    fields: tuple[tuple[str, Value], ...] = ()
    state_tag: str | None = None
    span: SourceSpan = _span()

    def field_map(self) -> dict[str, Value]:
        return dict(self.fields)


Value = Union[IntValue, BoolValue, TextValue, ArrayValue, SymbolicCount, ObjectSnapshot]
VALUE_TYPES = (IntValue, BoolValue, TextValue, ArrayValue, SymbolicCount, ObjectSnapshot)


def value_kind(value: Value) -> str:
    return {
        IntValue: "int",
        BoolValue: "bool",
        TextValue: "text",
        ArrayValue: "array",
        SymbolicCount: "count",
        ObjectSnapshot: "object",
    }[type(value)]


def value_equal(a: Value, b: Value) -> bool:
    """Structural equality of two values.

    Snapshot fields are compared as a mapping, so field order is ignored.
    Spans never take part.
    """
    if type(a) is not type(b):
        return False
    if isinstance(a, ArrayValue):
        return len(a.items) == len(b.items) and all(
            value_equal(x, y) for x, y in zip(a.items, b.items)
        )
    if isinstance(a, ObjectSnapshot):
        if a.class_name != b.class_name or a.state_tag != b.state_tag:
            return False
        if len(a.fields) != len(b.fields):
            return False
        # stable sort by name: order-insensitive, still well defined for duplicate names
        return all(
            n1 == n2 and value_equal(v1, v2)
            for (n1, v1), (n2, v2) in zip(sorted(a.fields, key=_field_name), sorted(b.fields, key=_field_name))
        )
    if isinstance(a, SymbolicCount):
        return (a.base, a.offset, a.unit) == (b.base, b.offset, b.unit)
    return a.value == b.value


def _field_name(item: tuple[str, Value]) -> str:
    return item[0]


def symbolic_delta(before: Value, after: Value) -> int | None:
    """Offset change between two symbolic counts, or None if not comparable."""
    if not (isinstance(before, SymbolicCount) and isinstance(after, SymbolicCount)):
        return None
    if before.base != after.base or before.unit != after.unit:
        return None
    return after.offset - before.offset


# -- functions and examples ---------------------------------------------------

PRIMITIVE_TYPES = frozenset(
    {"int", "long", "short", "byte", "boolean", "bool", "char", "float", "double",
     "String", "string", "text", "void", "Object"}
)


def _base_type(type_name: str) -> str:
    return type_name.split("<", 1)[0].split("[", 1)[0]


@dataclass(frozen=True)
class ParamSpec:
    type_name: str
    span: SourceSpan = _span()

    @property
    def class_ref(self) -> str | None:
        """Domain class the parameter refers to, if it is not a primitive."""
        base = _base_type(self.type_name)
        if base in PRIMITIVE_TYPES or "<" in self.type_name or "[" in self.type_name:
            return None
        return base


@dataclass(frozen=True)
class RuleRef:
    target: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class FunctionExample:
    inputs: tuple[Value, ...] = ()
    output: Value | None = None
    before: tuple[ObjectSnapshot, ...] = ()
    after: tuple[ObjectSnapshot, ...] = ()
    # asterisk beside the output; points at the owning diagram's rule_ref
    marked: bool = False
    span: SourceSpan = _span()

    def pairs(self) -> list[tuple[ObjectSnapshot, ObjectSnapshot]]:
        return list(zip(self.before, self.after))


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: tuple[ParamSpec, ...] = ()
    return_type: str | None = None
    examples: tuple[FunctionExample, ...] = ()
    span: SourceSpan = _span()

    def __post_init__(self) -> None:
        if not self.params and self.return_type is None:
            raise ValueError(f"function {self.name!r} has neither parameters nor a return type")


# -- classes ------------------------------------------------------------------


@dataclass(frozen=True)
class Attribute:
    name: str
    type_name: str | None = None
    is_object: bool = False
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Constructor:
    params: tuple[str, ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class MethodBehavior:
    name: str
    params: tuple[ParamSpec, ...] = ()
    return_type: str | None = None
    examples: tuple[FunctionExample, ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ClassDecl:
    name: str
    attributes: tuple[Attribute, ...] = ()
    constructors: tuple[Constructor, ...] = ()
    methods: tuple[MethodBehavior, ...] = ()
    span: SourceSpan = _span()


# -- state machines -----------------------------------------------------------


@dataclass(frozen=True)
class State:
    name: str
    visible_fields: tuple[str, ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    action: str
    span: SourceSpan = _span()


# -- diagrams -----------------------------------------------------------------


class Diagram:
    """Base of the five diagram kinds. No other subclasses may exist."""

    kind: ClassVar[str]
    id: str
    note: str | None
    span: SourceSpan

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.__module__ != __name__:
            raise TypeError("the set of diagram kinds is closed")


@dataclass(frozen=True)
class AlgorithmicFunction(Diagram):
    kind: ClassVar[str] = "algorithmic"
    id: str
    function: FunctionSpec
    note: str | None = None
    rule_ref: RuleRef | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class StateChangeFunction(Diagram):
    kind: ClassVar[str] = "state_change"
    id: str
    function: FunctionSpec
    note: str | None = None
    rule_ref: RuleRef | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ClassDeclaration(Diagram):
    kind: ClassVar[str] = "class"
    id: str
    classes: tuple[ClassDecl, ...] = ()
    note: str | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Inheritance(Diagram):
    kind: ClassVar[str] = "inheritance"
    id: str
    classes: tuple[ClassDecl, ...] = ()
    note: str | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class StateTransitionRules(Diagram):
    kind: ClassVar[str] = "state_transitions"
    id: str
    states: tuple[State, ...] = ()
    transitions: tuple[Transition, ...] = ()
    note: str | None = None
    span: SourceSpan = _span()

    def state(self, name: str) -> State | None:
        for s in self.states:
            if s.name == name:
                return s
        return None

    def allows(self, source: str, target: str) -> bool:
        return any(t.source == source and t.target == target for t in self.transitions)


FunctionDiagram = Union[AlgorithmicFunction, StateChangeFunction]
DIAGRAM_KINDS: dict[str, type] = {
    cls.kind: cls
    for cls in (AlgorithmicFunction, StateChangeFunction, ClassDeclaration, Inheritance, StateTransitionRules)
}


@dataclass(frozen=True)
class ExerciseAssignment:
    id: str
    title: str | None = None
    diagrams: tuple[Diagram, ...] = ()
    span: SourceSpan = _span()

    def diagram(self, diagram_id: str) -> Diagram | None:
        for d in self.diagrams:
            if d.id == diagram_id:
                return d
        return None


# -- diagnostics --------------------------------------------------------------


class Severity(str, Enum):
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"

    @property
    def rank(self) -> int:
        return {"info": 0, "warning": 1, "error": 2}[self.value]


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    severity: Severity
    message: str
    span: SourceSpan
    diagram: str | None = None

    def format(self) -> str:
        s = self.span
        return f"{s.file}:{s.start_line}:{s.start_col}: [{self.rule}] {self.severity.value}: {self.message}"
