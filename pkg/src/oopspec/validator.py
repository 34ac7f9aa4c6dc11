"""Notation rules, cross-diagram checks and anti-leakage lints.

Rule codes:

    V1  function diagram has fewer than two examples
    V2  example does not match the function signature
    V3  example does not show the effect its diagram kind requires
    V4  before/after snapshots are not paired by class
    V5  asterisk or rule_ref does not resolve to a state-transition diagram
    V6  tagged before/after states use an undeclared transition
    V7  class or inheritance diagram too small, or the children share nothing
    V8  array elements of mixed kinds
    V9  duplicate id or name
    V10 state or transition reference does not resolve
    L1  function name is not obfuscated
    L2  side note is too long
    L3  function name contains a descriptive word
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .model import (
    AlgorithmicFunction,
    ArrayValue,
    ClassDecl,
    ClassDeclaration,
    Diagnostic,
    Diagram,
    ExerciseAssignment,
    FunctionExample,
    Inheritance,
    ObjectSnapshot,
    Severity,
    SourceSpan,
    StateChangeFunction,
    StateTransitionRules,
    Value,
    value_equal,
    value_kind,
)

RULE_CODES = ("V1", "V2", "V3", "V4", "V5", "V6", "V7", "V8", "V9", "V10", "L1", "L2", "L3")

DESCRIPTIVE_STEMS = (
    "get", "set", "add", "remove", "calc", "compute", "sum", "sort", "withdraw", "deposit",
    "transfer", "find", "search", "count", "max", "min", "avg", "average", "merge", "split",
    "reverse", "filter", "interleave", "assign", "create", "delete", "update", "insert",
    "total", "balance", "swap", "join", "concat", "append", "validate", "check", "convert",
    "parse", "print", "show", "is", "has", "to",
)


@dataclass(frozen=True)
class RuleConfig:
    """Knobs for ``validate``.

    ``severity`` maps rule codes to ``"error"``, ``"warning"``, ``"info"`` or
    ``"off"``. ``strict`` promotes every remaining warning to an error.
    """

    severity: dict[str, str] = field(default_factory=dict)
    obfuscation_pattern: str = r"f\d*"
    max_note_words: int = 12
    strict: bool = False
    descriptive_stems: tuple[str, ...] = DESCRIPTIVE_STEMS

    def __post_init__(self) -> None:
        if not self.obfuscation_pattern:
            raise ValueError("obfuscation_pattern must be non-empty")
        re.compile(self.obfuscation_pattern)
        if self.max_note_words < 0:
            raise ValueError("max_note_words must be >= 0")
        for code, level in self.severity.items():
            if code not in RULE_CODES:
                raise ValueError(f"unknown rule code {code!r}")
            if level not in ("error", "warning", "info", "off"):
                raise ValueError(f"unknown severity {level!r} for {code}")

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.severity.items())), self.obfuscation_pattern,
                     self.max_note_words, self.strict, self.descriptive_stems))


CONFIG_FILENAME = "oopspec.toml"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def parse_config(text: str, base: RuleConfig | None = None) -> RuleConfig:
    """Read ``key = value`` lines into a RuleConfig.

    Recognised keys: ``strict``, ``obfuscation_pattern``, ``max_note_words``,
    ``descriptive_stems`` (comma separated) and any rule code (``L1 = off``),
    optionally written as ``severity.L1``.
    """
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=None)
    cp.optionxform = str
    cp.read_string("[oopspec]\n" + text)
    cfg = base or RuleConfig()
    severity = dict(cfg.severity)
    changes: dict = {}
    for key, raw in cp["oopspec"].items():
        value = _unquote(raw)
        code = key.split(".", 1)[1] if key.startswith("severity.") else key
        if code in RULE_CODES:
            severity[code] = value.lower()
        elif key == "strict":
            if value.lower() not in _TRUE | _FALSE:
                raise ValueError(f"strict: expected a boolean, got {value!r}")
            changes["strict"] = value.lower() in _TRUE
        elif key == "obfuscation_pattern":
            changes["obfuscation_pattern"] = value
        elif key == "max_note_words":
            changes["max_note_words"] = int(value)
        elif key == "descriptive_stems":
            changes["descriptive_stems"] = tuple(s.strip().lower() for s in value.split(",") if s.strip())
        else:
            raise ValueError(f"unknown configuration key {key!r}")
    return replace(cfg, severity=severity, **changes)


def load_config(directory: Path | str) -> RuleConfig:
    """Config from ``oopspec.toml`` in ``directory``, or defaults when absent."""
    path = Path(directory) / CONFIG_FILENAME
    if not path.is_file():
        return RuleConfig()
    return parse_config(path.read_text(encoding="utf-8"))


# -- common-member inference --------------------------------------------------


class Member(NamedTuple):
    name: str
    kind: str  # "attribute" or "method"


def infer_common_members(diagram: Inheritance | Iterable[ClassDecl]) -> frozenset[Member]:
    """Members shared by every child class: the implied superclass.

    Attribute types must agree where both sides declare one; an untyped
    attribute matches any type of the same name.
    """
    classes = list(diagram.classes if isinstance(diagram, (Inheritance, ClassDeclaration)) else diagram)
    if len(classes) < 2:
        raise ValueError(f"need at least 2 classes to infer a superclass, got {len(classes)}")
    common: set[Member] = set()
    for attr in classes[0].attributes:
        types = set()
        for cls in classes:
            found = [a for a in cls.attributes if a.name == attr.name]
            if not found:
                break
            types.update(a.type_name for a in found if a.type_name is not None)
        else:
            if len(types) <= 1:
                common.add(Member(attr.name, "attribute"))
    method_sets = [{m.name for m in cls.methods} for cls in classes]
    for name in set.intersection(*method_sets):
        common.add(Member(name, "method"))
    return frozenset(common)


def common_attribute_type(classes: Iterable[ClassDecl], name: str) -> str | None:
    types = {a.type_name for cls in classes for a in cls.attributes if a.name == name and a.type_name}
    return types.pop() if len(types) == 1 else None


# -- transition consistency ---------------------------------------------------


class UnknownStateError(LookupError):
    def __init__(self, state: str, snapshot: ObjectSnapshot):
        self.state = state
        self.snapshot = snapshot
        super().__init__(f"state {state!r} is not declared")


@dataclass(frozen=True)
class TransitionViolation:
    index: int
    class_name: str
    source: str
    target: str

    @property
    def description(self) -> str:
        return (f"{self.class_name} moves from {self.source} to {self.target} "
                f"(pair {self.index + 1}) but no such transition is declared")


def check_transition_consistency(
    example: FunctionExample, rules: StateTransitionRules
) -> TransitionViolation | None:
    """None when every tagged before/after pair stays put or follows a declared transition.

    Raises UnknownStateError for a tag that names no declared state.
    """
    for i, (before, after) in enumerate(example.pairs()):
        if before.state_tag is None or after.state_tag is None:
            continue
        for snap in (before, after):
            if rules.state(snap.state_tag) is None:
                raise UnknownStateError(snap.state_tag, snap)
        if before.state_tag == after.state_tag:
            continue
        if not rules.allows(before.state_tag, after.state_tag):
            return TransitionViolation(i, before.class_name, before.state_tag, after.state_tag)
    return None


# -- validation ---------------------------------------------------------------


def _walk_values(values: Iterable[Value]) -> Iterator[Value]:
    for v in values:
        yield v
        if isinstance(v, ArrayValue):
            yield from _walk_values(v.items)
        elif isinstance(v, ObjectSnapshot):
            yield from _walk_values(val for _, val in v.fields)


def _example_values(ex: FunctionExample) -> list[Value]:
    out: list[Value] = [*ex.before, *ex.inputs, *ex.after]
    if ex.output is not None:
        out.append(ex.output)
    return out


def _split_words(name: str) -> list[str]:
    parts = re.findall(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+", name)
    return [p.lower() for p in parts]


class _Checker:
    def __init__(self, assignment: ExerciseAssignment, config: RuleConfig):
        self.assignment = assignment
        self.config = config
        self.found: list[tuple[int, Diagnostic]] = []
        self.diagram: Diagram | None = None

    def emit(self, rule: str, severity: Severity, message: str, span: SourceSpan) -> None:
        override = self.config.severity.get(rule)
        if override == "off":
            return
        if override is not None:
            severity = Severity(override)
        if self.config.strict and severity is Severity.WARNING:
            severity = Severity.ERROR
        diagram_id = self.diagram.id if self.diagram is not None else None
        self.found.append((len(self.found), Diagnostic(rule, severity, message, span, diagram_id)))

    def run(self) -> list[Diagnostic]:
        seen: dict[str, Diagram] = {}
        for d in self.assignment.diagrams:
            self.diagram = d
            if d.id in seen:
                self.emit("V9", Severity.ERROR, f"duplicate diagram id {d.id!r}", d.span)
            seen.setdefault(d.id, d)
            self.check_note(d)
            if isinstance(d, (AlgorithmicFunction, StateChangeFunction)):
                self.check_function_diagram(d)
            elif isinstance(d, (ClassDeclaration, Inheritance)):
                self.check_class_diagram(d)
            else:
                self.check_state_rules(d)
        # source order; emission order breaks ties
        ordered = sorted(self.found, key=lambda item: (
            item[1].span.file, item[1].span.start_line, item[1].span.start_col, item[0]))
        return [diag for _, diag in ordered]

    # -- shared --

    def check_note(self, d: Diagram) -> None:
        if d.note is None:
            return
        words = len(d.note.split())
        if words > self.config.max_note_words:
            self.emit("L2", Severity.WARNING,
                      f"note has {words} words (limit {self.config.max_note_words}); "
                      "text in a diagram can be read back by a model", d.span)

    def check_values(self, values: Iterable[Value]) -> None:
        for v in _walk_values(values):
            if isinstance(v, ArrayValue) and v.items:
                kinds = {value_kind(item) for item in v.items}
                if len(kinds) > 1:
                    self.emit("V8", Severity.ERROR,
                              "array mixes element kinds: " + ", ".join(sorted(kinds)), v.span)
            elif isinstance(v, ObjectSnapshot):
                names = [n for n, _ in v.fields]
                for dup in sorted({n for n in names if names.count(n) > 1}):
                    self.emit("V9", Severity.ERROR, f"duplicate field {dup!r} in {v.class_name} snapshot", v.span)

    def rules_target(self, d: Diagram) -> StateTransitionRules | None:
        ref = getattr(d, "rule_ref", None)
        if ref is None:
            return None
        target = self.assignment.diagram(ref.target)
        return target if isinstance(target, StateTransitionRules) else None

    def check_examples(self, d: Diagram, examples, params, return_type, *, kind: str) -> None:
        rules = self.rules_target(d)
        has_ref = getattr(d, "rule_ref", None) is not None
        for ex in examples:
            if len(ex.inputs) != len(params):
                self.emit("V2", Severity.ERROR,
                          f"example has {len(ex.inputs)} inputs but the signature takes {len(params)}", ex.span)
            if ex.output is not None and return_type is None:
                self.emit("V2", Severity.ERROR, "example shows a return value but the signature returns nothing",
                          ex.output.span)
            if ex.output is None and return_type is not None:
                self.emit("V2", Severity.ERROR, f"example is missing its {return_type} return value", ex.span)
            if kind == "algorithmic" and (ex.before or ex.after):
                self.emit("V3", Severity.ERROR,
                          "algorithmic example shows object states; use a state_change diagram", ex.span)
            if kind == "state_change":
                self.check_state_change(ex)
            if ex.after and len(ex.before) != len(ex.after):
                self.emit("V4", Severity.ERROR,
                          f"{len(ex.before)} before snapshots but {len(ex.after)} after snapshots", ex.span)
            for b, a in ex.pairs():
                if b.class_name != a.class_name:
                    self.emit("V4", Severity.ERROR,
                              f"before snapshot {b.class_name} is paired with after snapshot {a.class_name}", a.span)
            if ex.marked and not has_ref:
                self.emit("V5", Severity.ERROR, "asterisk has no rule_ref to point at",
                          (ex.output or ex).span)
            self.check_values(_example_values(ex))
            self.check_tags(ex, rules, has_ref)

    def check_state_change(self, ex: FunctionExample) -> None:
        if not ex.before and not ex.after:
            self.emit("V3", Severity.ERROR, "state-change example shows no object states", ex.span)
            return
        mutated = any(not value_equal(b, a) for b, a in ex.pairs())
        if not mutated and ex.output is None:
            self.emit("V3", Severity.ERROR,
                      "example changes no object and returns nothing; a failure case must return a value", ex.span)

    def check_tags(self, ex: FunctionExample, rules: StateTransitionRules | None, has_ref: bool) -> None:
        tagged = [v for v in _walk_values(_example_values(ex)) if isinstance(v, ObjectSnapshot) and v.state_tag]
        if not tagged:
            return
        if not has_ref:
            self.emit("V10", Severity.ERROR,
                      f"state tag @{tagged[0].state_tag} needs a rule_ref to a state_transitions diagram",
                      tagged[0].span)
            return
        if rules is None:
            return  # unresolved reference already reported as V5
        unknown = False
        for snap in tagged:
            state = rules.state(snap.state_tag)
            if state is None:
                unknown = True
                self.emit("V10", Severity.ERROR,
                          f"state {snap.state_tag!r} is not declared in {rules.id!r}", snap.span)
                continue
            extra = [n for n, _ in snap.fields if n not in state.visible_fields]
            if extra:
                self.emit("V10", Severity.WARNING,
                          f"{snap.class_name}@{state.name} shows fields not visible in that state: "
                          + ", ".join(extra), snap.span)
        if unknown:
            return
        violation = check_transition_consistency(ex, rules)
        if violation is not None:
            self.emit("V6", Severity.ERROR, violation.description, ex.after[violation.index].span)

    # -- per kind --

    def check_function_diagram(self, d: AlgorithmicFunction | StateChangeFunction) -> None:
        fn = d.function
        n = len(fn.examples)
        if n < 2:
            self.emit("V1", Severity.ERROR, f"function diagram needs at least 2 examples, has {n}", fn.span)
        self.check_examples(d, fn.examples, fn.params, fn.return_type, kind=d.kind)
        if d.rule_ref is not None:
            target = self.assignment.diagram(d.rule_ref.target)
            if target is None:
                self.emit("V5", Severity.ERROR, f"rule_ref {d.rule_ref.target!r} names no diagram", d.rule_ref.span)
            elif not isinstance(target, StateTransitionRules):
                self.emit("V5", Severity.ERROR,
                          f"rule_ref {d.rule_ref.target!r} is a {target.kind} diagram, not state_transitions",
                          d.rule_ref.span)
        if not re.fullmatch(self.config.obfuscation_pattern, fn.name):
            self.emit("L1", Severity.WARNING,
                      f"function name {fn.name!r} is not obfuscated (pattern {self.config.obfuscation_pattern})",
                      fn.span)
        stems = self.config.descriptive_stems
        for word in _split_words(fn.name):
            hit = next((s for s in stems if word.startswith(s) and (len(s) > 2 or word == s)), None)
            if hit is not None:
                self.emit("L3", Severity.WARNING,
                          f"function name {fn.name!r} contains the descriptive word {word!r}", fn.span)
                break

    def check_class_diagram(self, d: ClassDeclaration | Inheritance) -> None:
        names: set[str] = set()
        for cls in d.classes:
            if cls.name in names:
                self.emit("V9", Severity.ERROR, f"duplicate class {cls.name!r}", cls.span)
            names.add(cls.name)
            attr_names: set[str] = set()
            for attr in cls.attributes:
                if attr.name in attr_names:
                    self.emit("V9", Severity.ERROR, f"duplicate attribute {attr.name!r} in {cls.name}", attr.span)
                attr_names.add(attr.name)
            for method in cls.methods:
                self.check_examples(d, method.examples, method.params, method.return_type, kind="method")
        if isinstance(d, ClassDeclaration) and not d.classes:
            self.emit("V7", Severity.ERROR, "class diagram declares no classes", d.span)
        if isinstance(d, Inheritance):
            if len(d.classes) < 2:
                self.emit("V7", Severity.ERROR,
                          f"inheritance diagram needs at least 2 classes, has {len(d.classes)}", d.span)
            elif not infer_common_members(d):
                self.emit("V7", Severity.WARNING, "classes share no attribute or method; nothing to generalise",
                          d.span)

    def check_state_rules(self, d: StateTransitionRules) -> None:
        if not d.states:
            self.emit("V10", Severity.ERROR, "state_transitions diagram declares no states", d.span)
        declared: set[str] = set()
        for state in d.states:
            if state.name in declared:
                self.emit("V9", Severity.ERROR, f"duplicate state {state.name!r}", state.span)
            declared.add(state.name)
        for t in d.transitions:
            for end in (t.source, t.target):
                if end not in declared:
                    self.emit("V10", Severity.ERROR, f"transition endpoint {end!r} is not a declared state", t.span)


def validate(assignment: ExerciseAssignment, config: RuleConfig | None = None) -> list[Diagnostic]:
    """All findings for ``assignment`` in source order; empty means clean."""
    return _Checker(assignment, config or RuleConfig()).run()


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diagnostics)
