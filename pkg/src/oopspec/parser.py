"""Recursive-descent parser and canonical printer for the exercise DSL.

The language is brace-nested and line-friendly::

    assignment "a03" {
      algorithmic "interleave" {
        function f(int[], int[]) returns int[]
        example {
          in: [1, 2, 3], [4, 5, 6]
          out: [1, 4, 2, 5, 3, 6]
        }
      }
    }

Newlines are insignificant to the grammar; ``print_assignment`` emits one
declaration per line. ``#`` starts a comment that runs to the end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import (
    DIAGRAM_KINDS,
    AlgorithmicFunction,
    ArrayValue,
    Attribute,
    BoolValue,
    ClassDecl,
    ClassDeclaration,
    Constructor,
    Diagram,
    ExerciseAssignment,
    FunctionExample,
    FunctionSpec,
    Inheritance,
    IntValue,
    MethodBehavior,
    ObjectSnapshot,
    ParamSpec,
    RuleRef,
    SourceSpan,
    State,
    StateChangeFunction,
    StateTransitionRules,
    SymbolicCount,
    TextValue,
    Transition,
    Value,
)

ID_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.-]*\Z")
_BARE_UNIT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")

_PUNCT = {
    "{": "LBRACE", "}": "RBRACE", "(": "LPAREN", ")": "RPAREN", "[": "LBRACK", "]": "RBRACK",
    ":": "COLON", ",": "COMMA", "+": "PLUS", "*": "STAR", "@": "AT", "<": "LT", ">": "GT",
}
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


class ParseError(Exception):
    def __init__(self, span: SourceSpan, expected: list[str], found: str):
        if not expected:
            raise ValueError("ParseError needs at least one expectation")
        self.span = span
        self.expected = list(expected)
        self.found = found
        super().__init__(self.format())

    def format(self) -> str:
        s = self.span
        if len(self.expected) == 1:
            want = self.expected[0]
        else:
            want = "one of " + ", ".join(self.expected)
        return f"{s.file}:{s.start_line}:{s.start_col}: [parse] error: expected {want}, found {self.found}"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of file"
        if self.kind == "STRING":
            return "string " + quote(self.text)
        return repr(self.text) if self.kind != "IDENT" else f"'{self.text}'"


def _normalize_newlines(source: str) -> str:
    source = source.replace("\r\n", "\n").replace("\r", "\n")
    return source[1:] if source.startswith("\ufeff") else source


def tokenize(source: str, file: str = "<string>") -> list[Token]:
    text = _normalize_newlines(source)
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def span_to(j: int, start_line: int, start_col: int) -> SourceSpan:
        return SourceSpan(file, start_line, start_col, line, col + (j - i))

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line, col = line + 1, 1
            continue
        if ch in " \t\f\v":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch.isascii() and ch.isalpha():
            j = i + 1
            while j < n and (text[j].isascii() and (text[j].isalnum() or text[j] == "_")):
                j += 1
            tokens.append(Token("IDENT", text[i:j], span_to(j, start_line, start_col)))
        elif ch.isdigit() and ch.isascii():
            j = i + 1
            while j < n and text[j].isascii() and text[j].isdigit():
                j += 1
            tokens.append(Token("INT", text[i:j], span_to(j, start_line, start_col)))
        elif ch == '"':
            j = i + 1
            chars: list[str] = []
            while True:
                if j >= n or text[j] == "\n":
                    here = SourceSpan(file, line, col + (j - i), line, col + (j - i))
                    raise ParseError(here, ['closing \'"\''], "end of line" if j < n else "end of file")
                c = text[j]
                if c == '"':
                    j += 1
                    break
                if c == "\\":
                    esc = text[j + 1] if j + 1 < n else ""
                    if esc not in _ESCAPES:
                        here = SourceSpan(file, line, col + (j - i), line, col + (j - i) + 1)
                        raise ParseError(here, ["escape sequence"], repr("\\" + esc))
                    chars.append(_ESCAPES[esc])
                    j += 2
                    continue
                chars.append(c)
                j += 1
            tokens.append(Token("STRING", "".join(chars), span_to(j, start_line, start_col)))
        elif ch == "-" and i + 1 < n and text[i + 1] == ">":
            j = i + 2
            tokens.append(Token("ARROW", "->", span_to(j, start_line, start_col)))
        elif ch == "-":
            j = i + 1
            tokens.append(Token("MINUS", "-", span_to(j, start_line, start_col)))
        elif ch in _PUNCT:
            j = i + 1
            tokens.append(Token(_PUNCT[ch], ch, span_to(j, start_line, start_col)))
        else:
            here = SourceSpan(file, line, col, line, col + 1)
            raise ParseError(here, ["token"], f"character {ch!r}")
        col += j - i
        i = j
    tokens.append(Token("EOF", "", SourceSpan(file, line, col, line, col)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing --

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    @property
    def last(self) -> Token:
        return self.tokens[max(self.pos - 1, 0)]

    def fail(self, *expected: str) -> ParseError:
        return ParseError(self.tok.span, list(expected), self.tok.describe())

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def at_keyword(self, word: str) -> bool:
        return self.at("IDENT", word)

    def at_label(self, word: str) -> bool:
        return self.at_keyword(word) and self.peek().kind == "COLON"

    def expect(self, kind: str, describe: str) -> Token:
        if self.tok.kind != kind:
            raise self.fail(describe)
        return self.advance()

    def keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            raise self.fail(f"'{word}'")
        return self.advance()

    def label(self, word: str) -> Token:
        start = self.keyword(word)
        self.expect("COLON", "':'")
        return start

    def ident(self) -> Token:
        return self.expect("IDENT", "identifier")

    def string(self) -> Token:
        return self.expect("STRING", "string")

    def id_string(self) -> Token:
        tok = self.string()
        if not ID_RE.match(tok.text):
            raise ParseError(tok.span, ["id string of letters, digits, '_', '-', '.'"], tok.describe())
        return tok

    def span_from(self, start: Token) -> SourceSpan:
        return start.span.to(self.last.span)

    # -- grammar --

    def assignment(self) -> ExerciseAssignment:
        start = self.keyword("assignment")
        aid = self.id_string()
        self.expect("LBRACE", "'{'")
        title = None
        if self.at_keyword("title"):
            self.advance()
            title = self.string().text
        diagrams: list[Diagram] = []
        while not self.at("RBRACE"):
            if self.tok.kind == "IDENT" and self.tok.text in DIAGRAM_KINDS:
                diagrams.append(self.diagram())
            else:
                raise self.fail("'}'", *(f"'{k}'" for k in DIAGRAM_KINDS))
        self.advance()
        if not self.at("EOF"):
            raise self.fail("end of file")
        return ExerciseAssignment(aid.text, title, tuple(diagrams), self.span_from(start))

    def diagram(self) -> Diagram:
        start = self.advance()
        kind = start.text
        did = self.id_string().text
        self.expect("LBRACE", "'{'")
        note = None
        if self.at_keyword("note"):
            self.advance()
            note = self.string().text
        if kind in ("algorithmic", "state_change"):
            fn = self.function()
            rule_ref = None
            if self.at_keyword("rule_ref"):
                ref_start = self.advance()
                target = self.id_string()
                rule_ref = RuleRef(target.text, self.span_from(ref_start))
            if rule_ref is None:
                self.expect_close("'example'", "'rule_ref'")
            else:
                self.expect_close()
            cls = AlgorithmicFunction if kind == "algorithmic" else StateChangeFunction
            return cls(id=did, function=fn, note=note, rule_ref=rule_ref, span=self.span_from(start))
        if kind in ("class", "inheritance"):
            classes = []
            while self.at_keyword("class"):
                classes.append(self.class_decl())
            self.expect_close("'class'")
            cls = ClassDeclaration if kind == "class" else Inheritance
            return cls(id=did, classes=tuple(classes), note=note, span=self.span_from(start))
        states, transitions = [], []
        while self.at_keyword("state"):
            states.append(self.state())
        while self.at_keyword("transition"):
            transitions.append(self.transition())
        if transitions:
            self.expect_close("'transition'")
        else:
            self.expect_close("'state'", "'transition'")
        return StateTransitionRules(
            id=did, states=tuple(states), transitions=tuple(transitions), note=note, span=self.span_from(start)
        )

    def expect_close(self, *alternatives: str) -> None:
        if not self.at("RBRACE"):
            raise self.fail("'}'", *alternatives)
        self.advance()

    def type_name(self) -> str:
        name = self.ident().text
        if self.at("LT"):
            self.advance()
            args = [self.type_name()]
            while self.at("COMMA"):
                self.advance()
                args.append(self.type_name())
            self.expect("GT", "'>'")
            name += "<" + ", ".join(args) + ">"
        while self.at("LBRACK"):
            self.advance()
            self.expect("RBRACK", "']'")
            name += "[]"
        return name

    def param_list(self) -> tuple[ParamSpec, ...]:
        self.expect("LPAREN", "'('")
        params: list[ParamSpec] = []
        if not self.at("RPAREN"):
            while True:
                start = self.tok
                params.append(ParamSpec(self.type_name(), self.span_from(start)))
                if not self.at("COMMA"):
                    break
                self.advance()
        if not self.at("RPAREN"):
            raise self.fail("')'", "','")
        self.advance()
        return tuple(params)

    def function(self) -> FunctionSpec:
        start = self.keyword("function")
        name = self.ident().text
        params = self.param_list()
        return_type = None
        if self.at_keyword("returns"):
            self.advance()
            return_type = self.type_name()
        if not params and return_type is None:
            raise ParseError(self.span_from(start), ["parameter or 'returns'"], "function without either")
        examples = []
        while self.at_keyword("example"):
            examples.append(self.example())
        return FunctionSpec(name, params, return_type, tuple(examples), self.span_from(start))

    def example(self) -> FunctionExample:
        start = self.keyword("example")
        self.expect("LBRACE", "'{'")
        before: tuple[ObjectSnapshot, ...] = ()
        after: tuple[ObjectSnapshot, ...] = ()
        if self.at_label("before"):
            self.label("before")
            before = self.snapshots()
        if not self.at_label("in"):
            raise self.fail("'in:'") if before else self.fail("'before:'", "'in:'")
        self.label("in")
        inputs = self.values()
        output = None
        marked = False
        if self.at_label("out"):
            self.label("out")
            output = self.value()
            if self.at("STAR"):
                self.advance()
                marked = True
        if self.at_label("after"):
            self.label("after")
            after = self.snapshots()
        if not self.at("RBRACE"):
            follow = ["'}'"]
            if output is None and not after:
                follow += ["'out:'", "'after:'"]
            elif not after:
                follow.append("'after:'")
            raise self.fail(*follow)
        self.advance()
        return FunctionExample(inputs, output, before, after, marked, self.span_from(start))

    def starts_value(self) -> bool:
        tok = self.tok
        if tok.kind in ("INT", "STRING", "LBRACK", "MINUS"):
            return True
        return tok.kind == "IDENT" and self.peek().kind != "COLON"

    def values(self) -> tuple[Value, ...]:
        if not self.starts_value():
            return ()
        items = [self.value()]
        while self.at("COMMA"):
            self.advance()
            items.append(self.value())
        return tuple(items)

    def snapshots(self) -> tuple[ObjectSnapshot, ...]:
        items = [self.snapshot()]
        while self.at("COMMA"):
            self.advance()
            items.append(self.snapshot())
        return tuple(items)

    def value(self) -> Value:
        tok = self.tok
        if tok.kind == "INT":
            self.advance()
            return IntValue(int(tok.text), tok.span)
        if tok.kind == "MINUS":
            self.advance()
            num = self.expect("INT", "integer")
            return IntValue(-int(num.text), tok.span.to(num.span))
        if tok.kind == "STRING":
            self.advance()
            return TextValue(tok.text, tok.span)
        if tok.kind == "LBRACK":
            self.advance()
            items: list[Value] = []
            if not self.at("RBRACK"):
                items.append(self.value())
                while self.at("COMMA"):
                    self.advance()
                    items.append(self.value())
            if not self.at("RBRACK"):
                raise self.fail("']'", "','")
            self.advance()
            return ArrayValue(tuple(items), self.span_from(tok))
        if tok.kind == "IDENT":
            if tok.text in ("true", "false"):
                self.advance()
                return BoolValue(tok.text == "true", tok.span)
            nxt = self.peek().kind
            if nxt in ("LBRACE", "AT"):
                return self.snapshot()
            if nxt in ("PLUS", "MINUS", "STRING") or (nxt == "IDENT" and self.peek(2).kind != "COLON"):
                return self.symbolic_count()
            self.advance()
            raise self.fail("'{'", "'@'", "'+'", "'-'", "unit string")
        raise self.fail("value")

    def symbolic_count(self) -> SymbolicCount:
        base = self.ident()
        if len(base.text) != 1:
            raise ParseError(base.span, ["single-letter count base"], base.describe())
        offset = 0
        if self.at("PLUS") or self.at("MINUS"):
            sign = 1 if self.advance().kind == "PLUS" else -1
            offset = sign * int(self.expect("INT", "integer").text)
        unit = self.tok
        # a bare word is a unit unless it is the next example label
        bare_unit = unit.kind == "IDENT" and self.peek().kind != "COLON"
        if unit.kind != "STRING" and not bare_unit:
            raise self.fail("unit string") if offset else self.fail("'+'", "'-'", "unit string")
        self.advance()
        if not unit.text:
            raise ParseError(unit.span, ["non-empty unit string"], "empty string")
        return SymbolicCount(base.text, offset, unit.text, self.span_from(base))

    def snapshot(self) -> ObjectSnapshot:
        start = self.ident()
        tag = None
        if self.at("AT"):
            self.advance()
            tag = self.ident().text
        self.expect("LBRACE", "'{'")
        fields: list[tuple[str, Value]] = []
        if not self.at("RBRACE"):
            while True:
                name = self.ident().text
                self.expect("COLON", "':'")
                fields.append((name, self.value()))
                if not self.at("COMMA"):
                    break
                self.advance()
        if not self.at("RBRACE"):
            raise self.fail("'}'", "','")
        self.advance()
        return ObjectSnapshot(start.text, tuple(fields), tag, self.span_from(start))

    def class_decl(self) -> ClassDecl:
        start = self.keyword("class")
        name = self.ident().text
        self.expect("LBRACE", "'{'")
        attrs, ctors, methods = [], [], []
        while True:
            if self.at_keyword("attr"):
                attrs.append(self.attribute())
            elif self.at_keyword("ctor"):
                ctor_start = self.advance()
                params = self.param_list()
                ctors.append(Constructor(tuple(p.type_name for p in params), self.span_from(ctor_start)))
            elif self.at_keyword("method"):
                methods.append(self.method())
            elif self.at("RBRACE"):
                self.advance()
                break
            else:
                raise self.fail("'}'", "'attr'", "'ctor'", "'method'")
        return ClassDecl(name, tuple(attrs), tuple(ctors), tuple(methods), self.span_from(start))

    def attribute(self) -> Attribute:
        start = self.keyword("attr")
        name = self.ident().text
        type_name = None
        if self.at("COLON"):
            self.advance()
            type_name = self.type_name()
        is_object = False
        if self.at_keyword("object"):
            self.advance()
            is_object = True
        return Attribute(name, type_name, is_object, self.span_from(start))

    def method(self) -> MethodBehavior:
        start = self.keyword("method")
        name = self.ident().text
        params = self.param_list()
        return_type = None
        if self.at_keyword("returns"):
            self.advance()
            return_type = self.type_name()
        self.expect("LBRACE", "'{'")
        examples = []
        while self.at_keyword("example"):
            examples.append(self.example())
        self.expect_close("'example'")
        return MethodBehavior(name, params, return_type, tuple(examples), self.span_from(start))

    def state(self) -> State:
        start = self.keyword("state")
        name = self.ident().text
        self.expect("LBRACE", "'{'")
        fields: list[str] = []
        if not self.at("RBRACE"):
            fields.append(self.ident().text)
            while self.at("COMMA"):
                self.advance()
                fields.append(self.ident().text)
        if not self.at("RBRACE"):
            raise self.fail("'}'", "','")
        self.advance()
        return State(name, tuple(fields), self.span_from(start))

    def transition(self) -> Transition:
        start = self.keyword("transition")
        source = self.ident().text
        self.expect("ARROW", "'->'")
        target = self.ident().text
        self.keyword("on")
        action = self.string().text
        return Transition(source, target, action, self.span_from(start))


def parse(source: str, file: str = "<string>") -> ExerciseAssignment:
    """Parse DSL source into an assignment; raises ParseError on the first syntax error."""
    return _Parser(tokenize(source, file)).assignment()


# -- printing -----------------------------------------------------------------

_INDENT = "  "


def quote(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"')
    out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{out}"'


def format_value(value: Value) -> str:
    if isinstance(value, BoolValue):
        return "true" if value.value else "false"
    if isinstance(value, IntValue):
        return str(value.value)
    if isinstance(value, TextValue):
        return quote(value.value)
    if isinstance(value, ArrayValue):
        return "[" + ", ".join(format_value(v) for v in value.items) + "]"
    if isinstance(value, SymbolicCount):
        sign = "" if value.offset == 0 else (" + " if value.offset > 0 else " - ") + str(abs(value.offset))
        unit = value.unit if _BARE_UNIT_RE.match(value.unit) and value.unit not in ("true", "false") else quote(value.unit)
        return f"{value.base}{sign} {unit}"
    head = value.class_name + (f"@{value.state_tag}" if value.state_tag else "")
    if not value.fields:
        return head + " {}"
    body = ", ".join(f"{name}: {format_value(v)}" for name, v in value.fields)
    return f"{head} {{ {body} }}"


def _params(params) -> str:
    return "(" + ", ".join(p if isinstance(p, str) else p.type_name for p in params) + ")"


def _example_lines(ex: FunctionExample, depth: int) -> list[str]:
    pad = _INDENT * depth
    inner = _INDENT * (depth + 1)
    lines = [f"{pad}example {{"]
    if ex.before:
        lines.append(f"{inner}before: " + ", ".join(format_value(s) for s in ex.before))
    ins = ", ".join(format_value(v) for v in ex.inputs)
    lines.append(f"{inner}in: {ins}" if ins else f"{inner}in:")
    if ex.output is not None:
        lines.append(f"{inner}out: {format_value(ex.output)}" + (" *" if ex.marked else ""))
    if ex.after:
        lines.append(f"{inner}after: " + ", ".join(format_value(s) for s in ex.after))
    lines.append(f"{pad}}}")
    return lines


def _class_lines(cls: ClassDecl, depth: int) -> list[str]:
    pad = _INDENT * depth
    inner = _INDENT * (depth + 1)
    lines = [f"{pad}class {cls.name} {{"]
    for attr in cls.attributes:
        text = f"{inner}attr {attr.name}"
        if attr.type_name:
            text += f": {attr.type_name}"
        if attr.is_object:
            text += " object"
        lines.append(text)
    for ctor in cls.constructors:
        lines.append(f"{inner}ctor{_params(ctor.params)}")
    for method in cls.methods:
        head = f"{inner}method {method.name}{_params(method.params)}"
        if method.return_type:
            head += f" returns {method.return_type}"
        lines.append(head + " {")
        for ex in method.examples:
            lines.extend(_example_lines(ex, depth + 2))
        lines.append(f"{inner}}}")
    lines.append(f"{pad}}}")
    return lines


def _diagram_lines(d: Diagram) -> list[str]:
    pad, inner = _INDENT, _INDENT * 2
    lines = [f"{pad}{d.kind} {quote(d.id)} {{"]
    if d.note is not None:
        lines.append(f"{inner}note {quote(d.note)}")
    if isinstance(d, (AlgorithmicFunction, StateChangeFunction)):
        fn = d.function
        head = f"{inner}function {fn.name}{_params(fn.params)}"
        if fn.return_type:
            head += f" returns {fn.return_type}"
        lines.append(head)
        for ex in fn.examples:
            lines.extend(_example_lines(ex, 2))
        if d.rule_ref is not None:
            lines.append(f"{inner}rule_ref {quote(d.rule_ref.target)}")
    elif isinstance(d, (ClassDeclaration, Inheritance)):
        for cls in d.classes:
            lines.extend(_class_lines(cls, 2))
    else:
        for state in d.states:
            lines.append(f"{inner}state {state.name} {{ {', '.join(state.visible_fields)} }}".replace("{  }", "{}"))
        for t in d.transitions:
            lines.append(f"{inner}transition {t.source} -> {t.target} on {quote(t.action)}")
    lines.append(f"{pad}}}")
    return lines


def print_assignment(assignment: ExerciseAssignment) -> str:
    """Canonical source text; ``parse(print_assignment(a)) == a`` for valid trees."""
    lines = [f"assignment {quote(assignment.id)} {{"]
    if assignment.title is not None:
        lines.append(f"{_INDENT}title {quote(assignment.title)}")
    for d in assignment.diagrams:
        lines.extend(_diagram_lines(d))
    lines.append("}")
    return "\n".join(lines) + "\n"
