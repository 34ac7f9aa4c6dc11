from __future__ import annotations

from importlib import resources

import pytest

_ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def record_acceptance():
    """Record one acceptance outcome; the terminal summary prints them all."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE[number] = (passed, title, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for number in sorted(_ACCEPTANCE):
        passed, title, detail = _ACCEPTANCE[number]
        line = f"ACCEPTANCE [{'PASS' if passed else 'FAIL'}] {number} {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)


@pytest.fixture(scope="session")
def corpus_source() -> str:
    return resources.files("oopspec").joinpath("corpus/reference.oops").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def corpus(corpus_source):
    from oopspec.parser import parse

    return parse(corpus_source, "reference.oops")
