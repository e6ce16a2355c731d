"""In-memory workbook model and A1 addressing.

A :class:`Workbook` is built once by a loader and never mutated afterwards.
Empty cells are simply absent from ``Sheet.cells``.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from decimal import Decimal
from types import MappingProxyType
from typing import Any, Iterable, Mapping, NamedTuple

MAX_ROW = 1_048_576
MAX_COL = 16_384

_A1_RE = re.compile(r"(\$?)([A-Z]{1,3})(\$?)([0-9]+)")
_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class MalformedAddress(ValueError):
    pass


@dataclass(frozen=True, order=True)
class CellAddr:
    row: int
    col: int

    def __post_init__(self):
        if not (1 <= self.row <= MAX_ROW and 1 <= self.col <= MAX_COL):
            raise MalformedAddress(f"address out of grid: row={self.row} col={self.col}")

    @property
    def a1(self) -> str:
        return addr_to_a1(self)

    def __str__(self):
        return self.a1


class A1Ref(NamedTuple):
    addr: CellAddr
    col_abs: bool
    row_abs: bool


class SheetAddr(NamedTuple):
    """A cell address qualified by its sheet name."""

    sheet: str
    addr: CellAddr

    def __str__(self):
        return f"{self.sheet}!{self.addr.a1}"


def col_to_letters(col: int) -> str:
    if col < 1:
        raise MalformedAddress(f"column index must be positive: {col}")
    out = []
    while col:
        col, rem = divmod(col - 1, 26)
        out.append(_LETTERS[rem])
    return "".join(reversed(out))


def letters_to_col(letters: str) -> int:
    col = 0
    for ch in letters:
        idx = _LETTERS.find(ch)
        if idx < 0:
            raise MalformedAddress(f"bad column letters: {letters!r}")
        col = col * 26 + idx + 1
    return col


def addr_from_a1(text: str) -> A1Ref:
    """Parse ``A1``/``$B$2`` style text into an address plus absolute flags."""
    m = _A1_RE.fullmatch(text)
    if not m:
        raise MalformedAddress(f"not an A1 address: {text!r}")
    col = letters_to_col(m.group(2))
    row = int(m.group(4))
    if not (1 <= row <= MAX_ROW and 1 <= col <= MAX_COL):
        raise MalformedAddress(f"address outside the grid: {text!r}")
    return A1Ref(CellAddr(row, col), bool(m.group(1)), bool(m.group(3)))


def addr_to_a1(addr: CellAddr) -> str:
    return f"{col_to_letters(addr.col)}{addr.row}"


def canonical_decimal(value: Decimal | str | int) -> str:
    """Exact decimal text with trailing zeros trimmed (``1.50`` -> ``1.5``)."""
    d = Decimal(value)
    if not d.is_finite():
        raise ValueError(f"non-finite number: {value!r}")
    if d == 0:
        return "0"
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


# -- cell contents ---------------------------------------------------------

@dataclass(frozen=True)
class NumberLiteral:
    value: Decimal

    @property
    def text(self) -> str:
        return canonical_decimal(self.value)

    def __eq__(self, other):
        return isinstance(other, NumberLiteral) and self.value == other.value

    def __hash__(self):
        return hash(("num", self.text))


@dataclass(frozen=True)
class TextLiteral:
    value: str


@dataclass(frozen=True)
class BoolLiteral:
    value: bool


@dataclass(frozen=True)
class ErrorLiteral:
    code: str


@dataclass(frozen=True)
class Formula:
    source: str
    ast: Any = field(compare=False, repr=False)

    def __eq__(self, other):
        return isinstance(other, Formula) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)


Content = NumberLiteral | TextLiteral | BoolLiteral | ErrorLiteral | Formula
LITERAL_TYPES = (NumberLiteral, TextLiteral, BoolLiteral, ErrorLiteral)


@dataclass(frozen=True)
class Cell:
    addr: CellAddr
    content: Content

    @property
    def is_formula(self) -> bool:
        return isinstance(self.content, Formula)

    @property
    def is_text(self) -> bool:
        return isinstance(self.content, TextLiteral)


class Visibility(enum.Enum):
    VISIBLE = "Visible"
    HIDDEN = "Hidden"
    VERY_HIDDEN = "VeryHidden"


@dataclass(frozen=True)
class WorkbookSettings:
    iteration_enabled: bool = False
    accept_labels_in_formulas: bool | None = None


@dataclass(frozen=True)
class Sheet:
    name: str
    cells: Mapping[CellAddr, Cell] = field(default_factory=dict)
    visibility: Visibility = Visibility.VISIBLE
    hidden_rows: frozenset[int] = frozenset()
    hidden_cols: frozenset[int] = frozenset()

    def __post_init__(self):
        if not self.name:
            raise ValueError("sheet name must be non-empty")
        cells = {}
        for addr in sorted(self.cells):
            cell = self.cells[addr]
            if cell.addr != addr:
                raise ValueError(f"cell keyed at {addr} carries address {cell.addr}")
            if isinstance(cell.content, TextLiteral) and cell.content.value == "":
                continue
            cells[addr] = cell
        object.__setattr__(self, "cells", MappingProxyType(cells))
        object.__setattr__(self, "hidden_rows", frozenset(self.hidden_rows))
        object.__setattr__(self, "hidden_cols", frozenset(self.hidden_cols))

    def get(self, addr: CellAddr) -> Cell | None:
        return self.cells.get(addr)

    def rows(self) -> dict[int, list[Cell]]:
        """Non-empty rows mapped to their cells in column order."""
        out: dict[int, list[Cell]] = {}
        for addr, cell in self.cells.items():
            out.setdefault(addr.row, []).append(cell)
        return out


@dataclass(frozen=True)
class Workbook:
    sheets: tuple[Sheet, ...] = ()
    settings: WorkbookSettings = WorkbookSettings()
    source_path: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sheets", tuple(self.sheets))
        seen = set()
        for sheet in self.sheets:
            key = sheet.name.casefold()
            if key in seen:
                raise ValueError(f"duplicate sheet name: {sheet.name!r}")
            seen.add(key)

    def sheet(self, name: str) -> Sheet | None:
        """Case-insensitive lookup, as spreadsheet applications do."""
        key = name.casefold()
        for sheet in self.sheets:
            if sheet.name.casefold() == key:
                return sheet
        return None

    def sheet_index(self, name: str) -> int | None:
        key = name.casefold()
        for i, sheet in enumerate(self.sheets):
            if sheet.name.casefold() == key:
                return i
        return None

    def iter_cells(self) -> Iterable[tuple[Sheet, Cell]]:
        for sheet in self.sheets:
            for cell in sheet.cells.values():
                yield sheet, cell


# -- canonical serialization ----------------------------------------------

def _content_payload(content: Content) -> str:
    from .formula import render

    if isinstance(content, Formula):
        return "f\t" + json.dumps(render(content.ast), ensure_ascii=False)
    if isinstance(content, NumberLiteral):
        return "n\t" + content.text
    if isinstance(content, TextLiteral):
        return "s\t" + json.dumps(content.value, ensure_ascii=False)
    if isinstance(content, BoolLiteral):
        return "b\t" + ("TRUE" if content.value else "FALSE")
    return "e\t" + content.code


def serialize_cells(cells: Iterable[Cell], data_cells=frozenset(), origin: CellAddr | None = None,
                    sheet: str = "") -> list[str]:
    """Serialize cells one per line.

    Cells whose ``SheetAddr`` is in ``data_cells`` contribute their address only.
    With ``origin`` set, addresses are written relative to it.
    """
    lines = []
    for cell in cells:
        addr = cell.addr
        pos = addr.a1 if origin is None else f"{addr.row - origin.row},{addr.col - origin.col}"
        if SheetAddr(sheet, addr) in data_cells:
            lines.append(f"cell\t{pos}\tdata")
        else:
            lines.append(f"cell\t{pos}\t{_content_payload(cell.content)}")
    return lines


def canonical_serialize(wb: Workbook, data_cells=frozenset()) -> bytes:
    """Deterministic byte form of a workbook's content.

    The source path is excluded. ``data_cells`` (a set of :class:`SheetAddr`)
    lists cells whose literal values are left out; only their position is kept.
    """
    lines = ["workbook v1"]
    for sheet in wb.sheets:
        lines.append("sheet\t" + json.dumps(sheet.name, ensure_ascii=False) + "\t" + sheet.visibility.value)
        lines.append("hidden-rows\t" + ",".join(map(str, sorted(sheet.hidden_rows))))
        lines.append("hidden-cols\t" + ",".join(map(str, sorted(sheet.hidden_cols))))
        lines.extend(serialize_cells(sheet.cells.values(), data_cells, sheet=sheet.name))
    s = wb.settings
    labels = "-" if s.accept_labels_in_formulas is None else str(int(s.accept_labels_in_formulas))
    lines.append(f"settings\titeration={int(s.iteration_enabled)}\tlabels={labels}")
    return ("\n".join(lines) + "\n").encode("utf-8")
