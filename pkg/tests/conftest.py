from pathlib import Path

import pytest
from hypothesis import strategies as st

from sheetcert.ingest import parse_fixture

CORPUS = Path(__file__).parent / "corpus"
ACCEPTANCE_LINES: list[str] = []


def wb_from(text: str):
    return parse_fixture(text.strip() + "\n", "<test>")


@pytest.fixture
def corpus_dir():
    return CORPUS


@st.composite
def small_workbook(draw):
    lines = ["!sheet S"]
    for r in range(1, draw(st.integers(1, 8)) + 1):
        for c in "ABCD":
            kind = draw(st.sampled_from(["empty", "empty", "num", "text", "formula"]))
            if kind == "num":
                lines.append(f"{c}{r}: {draw(st.integers(-5, 50))}")
            elif kind == "text":
                lines.append(f'{c}{r}: "{draw(st.sampled_from(["Total", "check", "x"]))}"')
            elif kind == "formula":
                ref = draw(st.sampled_from("ABCD")) + str(draw(st.integers(1, 8)))
                suffix = draw(st.sampled_from(["+1", "*2", "*1.05", "+B1", "*$A$1", ""]))
                lines.append(f"{c}{r}: ={ref}{suffix}")
    return "\n".join(lines)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
