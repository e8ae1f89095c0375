from __future__ import annotations

from pathlib import Path

import pytest

from cobabs.parser import parse

CORPUS = Path(__file__).resolve().parent.parent / "src" / "cobabs" / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / f"{name}.cob").read_text(encoding="utf-8")


def load(name: str):
    return parse(corpus_text(name))


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
