import hashlib
import json
import subprocess
import sys
import textwrap

import pytest

from oopspec import __version__
from oopspec.cli import main, verify_bundle
from oopspec.parser import parse

CLEAN = """\
assignment "a01" {
  algorithmic "sum" {
    function f(int[]) returns int
    example {
      in: [1, 2]
      out: 3
    }
    example {
      in: [4]
      out: 4
    }
  }
}
"""

ONE_EXAMPLE = CLEAN.replace("""    example {
      in: [4]
      out: 4
    }
""", "")


@pytest.fixture
def write(tmp_path):
    def write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture
def corpus_file(tmp_path, corpus_source):
    path = tmp_path / "sample.oops"
    path.write_text(corpus_source, encoding="utf-8")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_check_clean(capsys, write):
    assert run(capsys, "check", write("a.oops", CLEAN)) == (0, "", "")


def test_check_v1(capsys, write):
    path = write("a.oops", ONE_EXAMPLE)
    code, _, err = run(capsys, "check", path)
    assert code == 1
    lines = err.splitlines()
    assert len(lines) == 1 and "[V1]" in lines[0]
    assert lines[0].startswith(f"{path.as_posix()}:3:")
    assert ": [V1] error: " in lines[0]


def test_check_missing_path(capsys, tmp_path):
    code, _, err = run(capsys, "check", tmp_path / "nope.oops")
    assert code == 2 and "[io] error" in err


def test_check_parse_error(capsys, write):
    code, _, err = run(capsys, "check", write("bad.oops", 'assignment "a" {'))
    assert code == 2 and "[parse] error: expected" in err


def test_check_bad_utf8(capsys, tmp_path):
    path = tmp_path / "latin.oops"
    path.write_bytes(b'assignment "caf\xe9" {}')
    code, _, err = run(capsys, "check", path)
    assert code == 2 and "UTF-8" in err


def test_check_hides_warnings_lint_shows_them(capsys, corpus_file):
    assert run(capsys, "check", corpus_file) == (0, "", "")
    code, _, err = run(capsys, "lint", corpus_file)
    assert code == 0
    assert {line.split("[")[1].split("]")[0] for line in err.splitlines()} == {"L1", "L3"}


def test_strict_turns_warnings_into_failures(capsys, corpus_file):
    code, _, err = run(capsys, "check", "--strict", corpus_file)
    assert code == 1 and "[L1] error" in err


def test_config_file_next_to_source(capsys, corpus_file):
    (corpus_file.parent / "oopspec.toml").write_text("L1 = error\n", encoding="utf-8")
    code, _, err = run(capsys, "check", corpus_file)
    assert code == 1 and "[L1] error" in err


def test_bad_config_is_io_failure(capsys, corpus_file):
    (corpus_file.parent / "oopspec.toml").write_text("what = ever\n", encoding="utf-8")
    assert run(capsys, "check", corpus_file)[0] == 2


def test_directory_input(capsys, write, tmp_path):
    write("a.oops", CLEAN)
    write("b.oops", ONE_EXAMPLE.replace("a01", "a02"))
    code, _, err = run(capsys, "check", tmp_path)
    assert code == 1 and err.count("[V1]") == 1


def test_no_color_env(capsys, write, monkeypatch):
    monkeypatch.setenv("NO_COLOR", "1")
    _, _, err = run(capsys, "check", write("a.oops", ONE_EXAMPLE))
    assert "\033[" not in err


def test_render_six_files_deterministic(capsys, corpus_file, tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run(capsys, "render", corpus_file, "--out", out1)[0] == 0
    assert run(capsys, "render", corpus_file, "--out", out2)[0] == 0
    names = sorted(p.name for p in out1.iterdir())
    assert len(names) == 6 and all(n.startswith("reference__") and n.endswith(".svg") for n in names)
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_render_blocked_by_errors_unless_forced(capsys, write, tmp_path):
    src = write("a.oops", ONE_EXAMPLE)
    out = tmp_path / "out"
    assert run(capsys, "render", src, "--out", out)[0] == 1
    assert not out.exists()
    assert run(capsys, "render", src, "--out", out, "--force")[0] == 0
    assert (out / "a01__sum.svg").is_file()


def test_render_unwritable_output(capsys, corpus_file, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(capsys, "render", corpus_file, "--out", blocker / "sub")
    assert code == 2 and "[io] error" in err


def test_render_with_theme(capsys, corpus_file, tmp_path):
    theme = tmp_path / "t.theme"
    theme.write_text("inputArrow = #0000FF\n", encoding="utf-8")
    assert run(capsys, "render", corpus_file, "--out", tmp_path / "o", "--theme", theme)[0] == 0
    assert "#0000FF" in (tmp_path / "o" / "reference__interleave.svg").read_text()
    theme.write_text("inputArrow = blue\n", encoding="utf-8")
    assert run(capsys, "render", corpus_file, "--out", tmp_path / "o", "--theme", theme)[0] == 2


def test_bundle_and_verify(capsys, corpus_file, tmp_path):
    out = tmp_path / "dist"
    assert run(capsys, "bundle", corpus_file, "--out", out)[0] == 0
    bundle = out / "reference"
    raw = (bundle / "manifest.json").read_bytes()
    assert raw.endswith(b"}\n") and b"\r" not in raw
    manifest = json.loads(raw)
    assert list(manifest) == sorted(manifest)
    assert manifest["assignmentId"] == "reference" and manifest["toolVersion"] == __version__
    assert manifest["diagnosticsSummary"] == {"error": 0, "info": 0, "warning": 2}
    entries = manifest["diagrams"]
    assert [e["id"] for e in entries] == sorted(e["id"] for e in entries) and len(entries) == 6
    for e in entries:
        assert hashlib.sha256((bundle / e["svgFile"]).read_bytes()).hexdigest() == e["contentHash"]
        assert e["sourceFile"] == "sample.oops"
    assert "source" not in manifest and not (bundle / "sample.oops").exists()
    assert verify_bundle(bundle) == []
    assert run(capsys, "verify", bundle)[0] == 0

    with open(bundle / entries[0]["svgFile"], "ab") as fh:
        fh.write(b"<!-- edited -->")
    code, _, err = run(capsys, "verify", bundle)
    assert code == 1 and "hash mismatch" in err and entries[0]["svgFile"] in err


def test_bundle_embed_source(capsys, corpus_file, tmp_path):
    out = tmp_path / "dist"
    assert run(capsys, "bundle", corpus_file, "--out", out, "--embed-source")[0] == 0
    manifest = json.loads((out / "reference" / "manifest.json").read_text())
    assert manifest["source"]["file"] == "sample.oops"
    assert (out / "reference" / "sample.oops").read_bytes() == corpus_file.read_bytes()
    assert verify_bundle(out / "reference") == []


def test_bundle_empty_assignment(capsys, write, tmp_path):
    src = write("e.oops", 'assignment "empty" {}\n')
    assert run(capsys, "bundle", src, "--out", tmp_path / "d")[0] == 0
    manifest = json.loads((tmp_path / "d" / "empty" / "manifest.json").read_text())
    assert manifest["diagrams"] == []


def test_bundle_duplicate_assignment_ids(capsys, write, tmp_path):
    a, b = write("a.oops", CLEAN), write("b.oops", CLEAN)
    assert run(capsys, "bundle", a, b, "--out", tmp_path / "d")[0] == 2


def test_verify_without_manifest(capsys, tmp_path):
    assert run(capsys, "verify", tmp_path)[0] == 2


def test_fmt_canonicalises_and_is_idempotent(capsys, write):
    messy = write("m.oops", 'assignment "a01"{algorithmic "sum"{function f(int[]) returns int\n'
                            "example{in:[1,2] out:3}example{in:[4] out:4}}}")
    assert run(capsys, "fmt", "--check", messy)[0] == 1
    assert run(capsys, "fmt", messy)[0] == 0
    once = messy.read_text()
    assert once == CLEAN
    assert run(capsys, "fmt", messy)[0] == 0
    assert messy.read_text() == once
    assert run(capsys, "fmt", "--check", messy)[0] == 0


def test_fmt_leaves_unparseable_file_alone(capsys, write):
    bad = write("bad.oops", 'assignment "a" { oops')
    before = bad.read_bytes()
    assert run(capsys, "fmt", bad)[0] == 2
    assert bad.read_bytes() == before


def test_fmt_preserves_meaning(capsys, corpus_file, corpus):
    assert run(capsys, "fmt", corpus_file)[0] == 0
    assert parse(corpus_file.read_text()) == corpus


def test_infer(capsys, corpus_file):
    code, out, _ = run(capsys, "infer", corpus_file)
    assert code == 0
    assert out == textwrap.dedent("""\
        manager-technician:
          attribute name: String
          attribute salary: int
          method f1()
    """)


def test_infer_without_inheritance_diagram(capsys, write):
    assert run(capsys, "infer", write("a.oops", CLEAN))[0] == 1


def test_module_entry_point(corpus_file):
    proc = subprocess.run([sys.executable, "-m", "oopspec", "check", str(corpus_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stderr == ""


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["render"])
    assert info.value.code == 2
