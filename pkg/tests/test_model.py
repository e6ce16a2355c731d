import string

import pytest
from hypothesis import given, strategies as st

from sheetcert.model import (
    MAX_COL, MAX_ROW, CellAddr, MalformedAddress, Workbook, Sheet, addr_from_a1, addr_to_a1,
    canonical_decimal, canonical_serialize,
)
from conftest import wb_from


def oracle_col(letters):
    # bijective base-26 by positional sum: A=1 .. Z=26
    total = 0
    for power, ch in enumerate(reversed(letters)):
        total += (string.ascii_uppercase.index(ch) + 1) * 26 ** power
    return total


def test_oracle_sanity():
    assert oracle_col("AA") == 26 * 1 + 1
    assert oracle_col("AZ") == 26 * 1 + 26
    assert oracle_col("XFD") == MAX_COL


@pytest.mark.parametrize("text,row,col,col_abs,row_abs", [
    ("A1", 1, 1, False, False),
    ("$B$2", 2, 2, True, True),
    ("AA10", 10, 27, False, False),
    ("B$7", 7, 2, False, True),
    ("XFD1048576", MAX_ROW, MAX_COL, False, False),
])
def test_addr_from_a1(text, row, col, col_abs, row_abs):
    ref = addr_from_a1(text)
    assert ref.addr == CellAddr(row, col)
    assert (ref.col_abs, ref.row_abs) == (col_abs, row_abs)
    assert col == oracle_col(text.replace("$", "").rstrip("0123456789"))


@pytest.mark.parametrize("bad", ["", "1A", "A0", "A", "XFE1", "A1048577", "a1", "A 1", "AAAA1", "$$A1"])
def test_addr_from_a1_rejects(bad):
    with pytest.raises(MalformedAddress):
        addr_from_a1(bad)


@pytest.mark.parametrize("row,col,text", [(1, 1, "A1"), (10, 27, "AA10"), (5, 52, "AZ5"), (3, 703, "AAA3")])
def test_addr_to_a1(row, col, text):
    assert addr_to_a1(CellAddr(row, col)) == text


def test_cell_addr_bounds_and_order():
    with pytest.raises(MalformedAddress):
        CellAddr(0, 1)
    with pytest.raises(MalformedAddress):
        CellAddr(1, MAX_COL + 1)
    assert sorted([CellAddr(2, 1), CellAddr(1, 5), CellAddr(1, 2)]) == [CellAddr(1, 2), CellAddr(1, 5), CellAddr(2, 1)]


@given(st.integers(1, MAX_ROW), st.integers(1, MAX_COL))
def test_a1_round_trip(row, col):
    addr = CellAddr(row, col)
    text = addr_to_a1(addr)
    assert addr_from_a1(text).addr == addr
    assert oracle_col(text.rstrip("0123456789")) == col


@pytest.mark.parametrize("raw,text", [("1.50", "1.5"), ("100", "100"), ("1E2", "100"), ("0.000", "0"),
                                      ("-2.0", "-2"), (".5", "0.5")])
def test_canonical_decimal(raw, text):
    assert canonical_decimal(raw) == text


def test_empty_text_cells_are_absent():
    wb = wb_from('!sheet S\nA1: ""\nA2: 1')
    assert list(wb.sheets[0].cells) == [CellAddr(2, 1)]


def test_sheet_names_unique():
    with pytest.raises(ValueError):
        Workbook((Sheet("A"), Sheet("a")))
    with pytest.raises(ValueError):
        Sheet("")


def test_workbook_is_immutable():
    wb = wb_from("!sheet S\nA1: 1")
    with pytest.raises(TypeError):
        wb.sheets[0].cells[CellAddr(2, 2)] = None
    with pytest.raises(AttributeError):
        wb.sheets = ()


def test_serialize_excludes_path():
    a = Workbook((), source_path="one.xlsx")
    b = Workbook((), source_path="elsewhere/two.xlsx")
    assert canonical_serialize(a) == canonical_serialize(b)


def test_serialize_deterministic():
    text = '!sheet S\nB2: =A1 + 1\nA1: 5\nC1: "x"'
    assert canonical_serialize(wb_from(text)) == canonical_serialize(wb_from(text))


def test_serialize_ignores_cell_order_and_formula_spacing():
    a = wb_from("!sheet S\nA1: 5\nB2: =a1+1")
    b = wb_from("!sheet S\nB2: = A1 + 1\nA1: 5.0")
    assert canonical_serialize(a) == canonical_serialize(b)


def test_serialize_sees_one_formula_change():
    a = wb_from("!sheet S\nA1: 5\nB2: =A1+1")
    b = wb_from("!sheet S\nA1: 5\nB2: =A1-1")
    assert canonical_serialize(a) != canonical_serialize(b)


def test_serialize_can_blank_data_cells():
    from sheetcert.model import SheetAddr
    a = wb_from("!sheet S\nA1: 5\nB2: =A1+1")
    b = wb_from("!sheet S\nA1: 7\nB2: =A1+1")
    data = frozenset({SheetAddr("S", CellAddr(1, 1))})
    assert canonical_serialize(a) != canonical_serialize(b)
    assert canonical_serialize(a, data) == canonical_serialize(b, data)
