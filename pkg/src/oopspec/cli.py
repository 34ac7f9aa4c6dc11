"""Command-line front end: check, lint, render, bundle, verify, fmt, infer.

Exit codes: 0 clean, 1 validation errors (or hash mismatch), 2 parse or I/O
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .layout import LayoutError, layout
from .model import Diagnostic, ExerciseAssignment, Inheritance, Severity
from .parser import ParseError, parse, print_assignment
from .render import RenderError, Theme, load_theme, render
from .validator import CONFIG_FILENAME, RuleConfig, common_attribute_type, infer_common_members, load_config, validate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILURE = 2

SOURCE_SUFFIX = ".oops"
MANIFEST_NAME = "manifest.json"

_COLORS = {"error": "\033[31m", "warning": "\033[33m", "info": "\033[36m"}


class _Failure(Exception):
    """I/O failure that maps to exit code 2."""

    def __init__(self, where: object, reason: str):
        self.where = str(where)
        self.reason = reason
        super().__init__(f"{where}: {reason}")

    def format(self) -> str:
        return f"{self.where}: [io] error: {self.reason}"


@dataclass
class _Loaded:
    path: Path
    assignment: ExerciseAssignment
    diagnostics: list[Diagnostic]


def _use_color(stream) -> bool:
    if os.environ.get("NO_COLOR") or os.environ.get("OOPSPEC_NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _report(line: str, severity: str = "error") -> None:
    if _use_color(sys.stderr):
        line = line.replace(f"] {severity}:", f"] {_COLORS[severity]}{severity}\033[0m:", 1)
    print(line, file=sys.stderr)


def _expand(paths: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(p.glob(f"*{SOURCE_SUFFIX}")))
        elif p.is_file():
            files.append(p)
        else:
            raise _Failure(raw, "no such file or directory")
    return files


def _read_source(path: Path) -> str:
    try:
        return path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise _Failure(path, f"not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc
    except OSError as exc:
        raise _Failure(path, exc.strerror or str(exc)) from exc


def _config_for(path: Path, strict: bool) -> RuleConfig:
    here = path.parent / CONFIG_FILENAME
    try:
        cfg = load_config(path.parent) if here.is_file() else load_config(Path.cwd())
    except (ValueError, OSError) as exc:
        raise _Failure(path.parent / CONFIG_FILENAME, str(exc)) from exc
    return replace(cfg, strict=True) if strict else cfg


def _load(paths: Sequence[str], strict: bool) -> tuple[list[_Loaded], bool]:
    """Parse and validate every input; the flag is True when any input failed to load."""
    loaded: list[_Loaded] = []
    failed = False
    try:
        files = _expand(paths)
    except _Failure as exc:
        _report(exc.format())
        return [], True
    for path in files:
        try:
            source = _read_source(path)
            assignment = parse(source, path.as_posix())
            config = _config_for(path, strict)
        except ParseError as exc:
            _report(exc.format())
            failed = True
            continue
        except _Failure as exc:
            _report(exc.format())
            failed = True
            continue
        loaded.append(_Loaded(path, assignment, validate(assignment, config)))
    return loaded, failed


def _print_diagnostics(loaded: list[_Loaded], show_all: bool) -> None:
    for item in loaded:
        for diag in item.diagnostics:
            if show_all or diag.severity is Severity.ERROR:
                _report(diag.format(), diag.severity.value)


def _has_errors(loaded: list[_Loaded]) -> bool:
    return any(d.severity is Severity.ERROR for item in loaded for d in item.diagnostics)


def cmd_check(args: argparse.Namespace, show_all: bool = False) -> int:
    loaded, failed = _load(args.paths, args.strict)
    _print_diagnostics(loaded, show_all)
    if failed:
        return EXIT_FAILURE
    return EXIT_INVALID if _has_errors(loaded) else EXIT_OK


def cmd_lint(args: argparse.Namespace) -> int:
    return cmd_check(args, show_all=True)


def _write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def svg_filename(assignment_id: str, diagram_id: str) -> str:
    return f"{assignment_id}__{diagram_id}.svg"


def _render_assignment(item: _Loaded, out_dir: Path, theme: Theme, outline: bool) -> list[dict]:
    """Write one SVG per diagram; returns manifest entries sorted by diagram id."""
    entries = []
    for diagram in item.assignment.diagrams:
        scene = layout(diagram, assignment=item.assignment, check=False)
        svg = render(scene, theme, outline_text=outline).encode("utf-8")
        name = svg_filename(item.assignment.id, diagram.id)
        _write_atomic(out_dir / name, svg)
        entries.append({
            "id": diagram.id,
            "kind": diagram.kind,
            "sourceFile": item.path.name,
            "svgFile": name,
            "contentHash": hashlib.sha256(svg).hexdigest(),
        })
    return sorted(entries, key=lambda e: e["id"])


def _theme(args: argparse.Namespace) -> Theme:
    if not args.theme:
        return Theme()
    try:
        return load_theme(args.theme)
    except (OSError, ValueError) as exc:
        raise _Failure(args.theme, str(exc)) from exc


def _prepare(args: argparse.Namespace) -> tuple[list[_Loaded], int | None]:
    loaded, failed = _load(args.paths, args.strict)
    _print_diagnostics(loaded, show_all=False)
    if failed:
        return loaded, EXIT_FAILURE
    if _has_errors(loaded) and not args.force:
        return loaded, EXIT_INVALID
    return loaded, None


def _mkdir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _Failure(path, exc.strerror or str(exc)) from exc
    if not os.access(path, os.W_OK):
        raise _Failure(path, "not writable")


def cmd_render(args: argparse.Namespace) -> int:
    loaded, code = _prepare(args)
    if code is not None:
        return code
    out = Path(args.out)
    theme = _theme(args)
    _mkdir(out)
    for item in loaded:
        _render_assignment(item, out, theme, args.outline_text)
    return EXIT_OK


def build_manifest(item: _Loaded, entries: list[dict], extra: dict | None = None) -> dict:
    summary = {s.value: 0 for s in Severity}
    for d in item.diagnostics:
        summary[d.severity.value] += 1
    manifest = {
        "assignmentId": item.assignment.id,
        "toolVersion": __version__,
        "diagrams": entries,
        "diagnosticsSummary": summary,
    }
    manifest.update(extra or {})
    return manifest


def dump_manifest(manifest: dict) -> bytes:
    return (json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def cmd_bundle(args: argparse.Namespace) -> int:
    loaded, code = _prepare(args)
    if code is not None:
        return code
    out = Path(args.out)
    theme = _theme(args)
    seen: dict[str, Path] = {}
    for item in loaded:
        aid = item.assignment.id
        if aid in seen:
            raise _Failure(item.path, f"assignment id {aid!r} already bundled from {seen[aid]}")
        seen[aid] = item.path
        target = out / aid
        _mkdir(target)
        entries = _render_assignment(item, target, theme, args.outline_text)
        extra = None
        if args.embed_source:
            source = item.path.read_bytes()
            _write_atomic(target / item.path.name, source)
            extra = {"source": {"file": item.path.name, "contentHash": hashlib.sha256(source).hexdigest()}}
        _write_atomic(target / MANIFEST_NAME, dump_manifest(build_manifest(item, entries, extra)))
    return EXIT_OK


def verify_bundle(directory: Path) -> list[str]:
    """Problems found in a bundle directory; empty when every hash matches."""
    manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    problems = []
    files = [(e["svgFile"], e["contentHash"]) for e in manifest["diagrams"]]
    if "source" in manifest:
        files.append((manifest["source"]["file"], manifest["source"]["contentHash"]))
    for name, expected in files:
        path = directory / name
        if not path.is_file():
            problems.append(f"{path}: [verify] error: file missing")
            continue
        actual = hashlib.sha256(path.read_bytes()).hexdigest()
        if actual != expected:
            problems.append(f"{path}: [verify] error: hash mismatch (manifest {expected[:12]}, file {actual[:12]})")
    return problems


def cmd_verify(args: argparse.Namespace) -> int:
    bad = False
    for raw in args.bundles:
        directory = Path(raw)
        try:
            problems = verify_bundle(directory)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise _Failure(directory, f"cannot read {MANIFEST_NAME} ({exc})") from exc
        for p in problems:
            _report(p)
        bad = bad or bool(problems)
    return EXIT_INVALID if bad else EXIT_OK


def cmd_fmt(args: argparse.Namespace) -> int:
    code = EXIT_OK
    for path in _expand(args.paths):
        try:
            source = _read_source(path)
            assignment = parse(source, path.as_posix())
        except ParseError as exc:
            _report(exc.format())
            code = EXIT_FAILURE
            continue
        formatted = print_assignment(assignment)
        if formatted == source:
            continue
        if args.check:
            print(f"{path}: would reformat", file=sys.stderr)
            code = max(code, EXIT_INVALID)
            continue
        try:
            _write_atomic(path, formatted.encode("utf-8"))
        except OSError as exc:
            raise _Failure(path, exc.strerror or str(exc)) from exc
    return code


def cmd_infer(args: argparse.Namespace) -> int:
    path = Path(args.path)
    try:
        assignment = parse(_read_source(path), path.as_posix())
    except ParseError as exc:
        _report(exc.format())
        return EXIT_FAILURE
    targets = [d for d in assignment.diagrams if isinstance(d, Inheritance)]
    if args.diagram:
        targets = [d for d in targets if d.id == args.diagram]
    if not targets:
        which = f" {args.diagram!r}" if args.diagram else ""
        _report(f"{path}: [infer] error: no inheritance diagram{which}")
        return EXIT_INVALID
    code = EXIT_OK
    for d in targets:
        print(f"{d.id}:")
        try:
            members = infer_common_members(d)
        except ValueError as exc:
            _report(f"{d.span}: [V7] error: {exc}")
            code = EXIT_INVALID
            continue
        for m in sorted(members, key=lambda m: (m.kind, m.name)):
            if m.kind == "attribute":
                t = common_attribute_type(d.classes, m.name)
                print(f"  attribute {m.name}" + (f": {t}" if t else ""))
            else:
                print(f"  method {m.name}()")
    return code


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oopspec", description="Compile diagram-based OOP exercise specifications.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def inputs(p: argparse.ArgumentParser) -> None:
        p.add_argument("paths", nargs="+", help=f"{SOURCE_SUFFIX} files or directories containing them")
        p.add_argument("--strict", action="store_true", help="treat warnings as errors")

    p = sub.add_parser("check", help="validate; report errors")
    inputs(p)
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("lint", help="validate; report errors and warnings")
    inputs(p)
    p.set_defaults(func=cmd_lint)

    for name, func, help_ in (("render", cmd_render, "write one SVG per diagram"),
                              ("bundle", cmd_bundle, "render and write a hashed manifest per assignment")):
        p = sub.add_parser(name, help=help_)
        inputs(p)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--force", action="store_true", help="render despite validation errors")
        p.add_argument("--theme", help="theme file of key = value color overrides")
        p.add_argument("--outline-text", action="store_true", help="draw text as path outlines")
        if name == "bundle":
            p.add_argument("--embed-source", action="store_true",
                           help="copy the DSL source into the bundle (keep it away from students)")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="recheck the hashes of bundle directories")
    p.add_argument("bundles", nargs="+")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fmt", help="rewrite files in canonical form")
    p.add_argument("paths", nargs="+")
    p.add_argument("--check", action="store_true", help="only report files that would change")
    p.set_defaults(func=cmd_fmt)

    p = sub.add_parser("infer", help="print the members an inheritance diagram's children share")
    p.add_argument("path")
    p.add_argument("--diagram", help="only this diagram id")
    p.set_defaults(func=cmd_infer)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except _Failure as exc:
        _report(exc.format())
        return EXIT_FAILURE
    except (OSError, LayoutError, RenderError) as exc:
        _report(f"oopspec: [io] error: {exc}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
