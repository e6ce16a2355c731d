"""Region classification (Input / Calculation / Output / Label / Check) and sections.

Priority when classifying a non-empty cell:

1. declared ranges (manifest ``region.*`` keys or ``--region``);
2. sheet-name conventions (``input*``, ``output*``/``print*``, ``check*``);
3. dependency heuristics: formulas are Calculation, referenced constants are
   Input, unreferenced text is Label, other unreferenced constants are Output.

Formula cells in a section titled ``*check*`` are then promoted to Check.
A formula is never Input: a declaration or convention that would make it
one leaves it as Calculation.
"""
from __future__ import annotations

import enum
import fnmatch
import hashlib
import re
from dataclasses import dataclass, field

from . import formula as fm
from .graph import DepGraph
from .model import (
    BoolLiteral, CellAddr, MalformedAddress, NumberLiteral, SheetAddr, TextLiteral, Workbook,
    addr_from_a1,
)


class RegionClass(enum.Enum):
    INPUT = "Input"
    CALCULATION = "Calculation"
    OUTPUT = "Output"
    LABEL = "Label"
    CHECK = "Check"


class SectionKind(enum.Enum):
    INPUT = "InputSection"
    CALC = "CalcSection"
    OUTPUT = "OutputSection"
    CHECK = "CheckSection"


class OverrideConflict(ValueError):
    pass


class BadRegionSpec(ValueError):
    pass


DEFAULT_SHEET_PATTERNS = (
    ("input*", RegionClass.INPUT),
    ("output*", RegionClass.OUTPUT),
    ("print*", RegionClass.OUTPUT),
    ("check*", RegionClass.CHECK),
)
CHECK_TITLE_PATTERN = "*check*"


@dataclass(frozen=True)
class DeclaredRegion:
    sheet: str
    start: CellAddr
    end: CellAddr
    cls: RegionClass

    def contains(self, sheet: str, addr: CellAddr) -> bool:
        return (sheet.casefold() == self.sheet.casefold()
                and self.start.row <= addr.row <= self.end.row
                and self.start.col <= addr.col <= self.end.col)

    def overlaps(self, other: "DeclaredRegion") -> bool:
        return (self.sheet.casefold() == other.sheet.casefold()
                and self.start.row <= other.end.row and other.start.row <= self.end.row
                and self.start.col <= other.end.col and other.start.col <= self.end.col)

    def __str__(self):
        return f"{self.cls.value.lower()}={region_ref_text(self)}"


def region_ref_text(r: DeclaredRegion) -> str:
    sheet = r.sheet if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", r.sheet) else "'" + r.sheet.replace("'", "''") + "'"
    return f"{sheet}!{r.start.a1}:{r.end.a1}"


_REGION_RE = re.compile(r"(?:'((?:[^']|'')+)'|([^!']+))!(\$?[A-Za-z]+\$?\d+)(?::(\$?[A-Za-z]+\$?\d+))?")


def parse_region(cls: str | RegionClass, spec: str) -> DeclaredRegion:
    """Parse ``Sheet!A1:B9`` (or a single cell) declared as ``cls``."""
    if not isinstance(cls, RegionClass):
        try:
            cls = next(c for c in RegionClass if c.value.lower() == cls.strip().lower())
        except StopIteration:
            raise BadRegionSpec(f"unknown region class {cls!r}") from None
    m = _REGION_RE.fullmatch(spec.strip())
    if not m:
        raise BadRegionSpec(f"expected Sheet!A1:B2, got {spec!r}")
    sheet = m.group(1).replace("''", "'") if m.group(1) else m.group(2).strip()
    try:
        a = addr_from_a1(m.group(3).replace("$", "").upper()).addr
        b = addr_from_a1((m.group(4) or m.group(3)).replace("$", "").upper()).addr
    except MalformedAddress as exc:
        raise BadRegionSpec(str(exc)) from exc
    return DeclaredRegion(sheet, CellAddr(min(a.row, b.row), min(a.col, b.col)),
                          CellAddr(max(a.row, b.row), max(a.col, b.col)), cls)


def parse_region_flag(text: str) -> DeclaredRegion:
    """CLI form: ``<class>=<Sheet>!<A1>:<A1>``."""
    cls, eq, spec = text.partition("=")
    if not eq:
        raise BadRegionSpec(f"expected <class>=<Sheet>!<A1>:<A1>, got {text!r}")
    if cls.strip().lower().startswith("region."):
        cls = cls.strip()[len("region."):]
    return parse_region(cls, spec)


@dataclass(frozen=True)
class Section:
    sheet: str
    row_span: tuple[int, int]
    title: str | None
    kind: SectionKind

    @property
    def label(self) -> str:
        return self.title if self.title else f"rows {self.row_span[0]}-{self.row_span[1]}"

    def contains(self, sheet: str, row: int) -> bool:
        return sheet == self.sheet and self.row_span[0] <= row <= self.row_span[1]


@dataclass
class RegionMap:
    class_of: dict[SheetAddr, RegionClass] = field(default_factory=dict)
    sections: tuple[Section, ...] = ()

    def cells_of(self, cls: RegionClass) -> list[SheetAddr]:
        return [k for k, v in self.class_of.items() if v is cls]

    def section_of(self, cell: SheetAddr) -> Section | None:
        for s in self.sections:
            if s.contains(cell.sheet, cell.addr.row):
                return s
        return None

    def summary(self, wb: Workbook) -> dict[str, dict[str, int]]:
        out = {s.name: {c.value: 0 for c in RegionClass} for s in wb.sheets}
        for cell, cls in self.class_of.items():
            out[cell.sheet][cls.value] += 1
        return out


def _check_conflicts(overrides):
    for i, a in enumerate(overrides):
        for b in overrides[i + 1:]:
            if a.cls is not b.cls and a.overlaps(b):
                raise OverrideConflict(f"{a} and {b} overlap with different classes")


def _sheet_class(name: str, patterns) -> RegionClass | None:
    key = name.casefold()
    for pat, cls in patterns:
        if fnmatch.fnmatchcase(key, pat.casefold()):
            return cls
    return None


def infer(wb: Workbook, g: DepGraph, overrides=(), patterns=DEFAULT_SHEET_PATTERNS) -> RegionMap:
    overrides = list(overrides)
    _check_conflicts(overrides)
    class_of: dict[SheetAddr, RegionClass] = {}
    declared: set[SheetAddr] = set()
    for sheet in wb.sheets:
        convention = _sheet_class(sheet.name, patterns)
        for addr, cell in sheet.cells.items():
            key = SheetAddr(sheet.name, addr)
            has_dependents = bool(g.predecessors(key))
            is_label = cell.is_text and not has_dependents
            decl = next((r.cls for r in overrides if r.contains(sheet.name, addr)), None)
            if decl is not None:
                declared.add(key)
                cls = decl
            elif convention is not None and not is_label:
                cls = convention
            elif cell.is_formula:
                cls = RegionClass.CALCULATION
            elif has_dependents:
                cls = RegionClass.INPUT
            elif cell.is_text:
                cls = RegionClass.LABEL
            else:
                cls = RegionClass.OUTPUT
            if cell.is_formula and cls not in (RegionClass.CALCULATION, RegionClass.CHECK):
                cls = RegionClass.CALCULATION
            class_of[key] = cls
    rm = RegionMap(class_of, ())
    sections = sectionize(wb, rm)
    check_rows = {(s.sheet, r) for s in sections
                  if s.title and fnmatch.fnmatchcase(s.title.casefold(), CHECK_TITLE_PATTERN)
                  for r in range(s.row_span[0], s.row_span[1] + 1)}
    for key, cls in class_of.items():
        if cls is RegionClass.CALCULATION and key not in declared and (key.sheet, key.addr.row) in check_rows:
            class_of[key] = RegionClass.CHECK
    rm.sections = tuple(sectionize(wb, rm))
    return rm


def _kind(classes: set[RegionClass]) -> SectionKind:
    if RegionClass.CHECK in classes:
        return SectionKind.CHECK
    if RegionClass.CALCULATION in classes:
        return SectionKind.CALC
    if RegionClass.INPUT in classes:
        return SectionKind.INPUT
    return SectionKind.OUTPUT


def sectionize(wb: Workbook, rm: RegionMap) -> list[Section]:
    """Split each sheet into blocks of non-empty rows separated by blank rows."""
    out = []
    for sheet in wb.sheets:
        rows = sheet.rows()
        spans = []
        for r in sorted(rows):
            if spans and spans[-1][1] == r - 1:
                spans[-1][1] = r
            else:
                spans.append([r, r])
        for a, b in spans:
            title = None
            for cell in rows[a]:
                if rm.class_of.get(SheetAddr(sheet.name, cell.addr)) is RegionClass.LABEL:
                    title = cell.content.value
                    break
            classes = {rm.class_of[SheetAddr(sheet.name, c.addr)]
                       for r in range(a, b + 1) for c in rows.get(r, ())
                       if SheetAddr(sheet.name, c.addr) in rm.class_of}
            out.append(Section(sheet.name, (a, b), title, _kind(classes)))
    return out


_MIXING = (RegionClass.INPUT, RegionClass.CALCULATION, RegionClass.OUTPUT)


def interleavings(rm: RegionMap) -> list[tuple[str, int, str]]:
    """Rows mixing Input with Calculation, and sections mixing region classes.

    A section is reported only when none of its rows is already reported,
    so one offending row yields one entry.
    """
    by_row: dict[tuple[str, int], set[RegionClass]] = {}
    for cell, cls in rm.class_of.items():
        by_row.setdefault((cell.sheet, cell.addr.row), set()).add(cls)
    out = []
    flagged_rows = set()
    for (sheet, row), classes in by_row.items():
        if RegionClass.INPUT in classes and RegionClass.CALCULATION in classes:
            flagged_rows.add((sheet, row))
    for s in rm.sections:
        a, b = s.row_span
        rows = [(s.sheet, r) for r in range(a, b + 1)]
        hits = [key for key in rows if key in flagged_rows]
        for sheet, row in hits:
            out.append((sheet, row, "row mixes input and calculation cells"))
        if hits:
            continue
        mixed = sorted({c for key in rows for c in by_row.get(key, ()) if c in _MIXING},
                       key=_MIXING.index)
        if len(mixed) >= 2:
            names = ", ".join(c.value.lower() for c in mixed)
            out.append((s.sheet, a, f"section {s.label} mixes {names} cells"))
    return out


def section_fingerprint(wb: Workbook, rm: RegionMap, s: Section) -> str:
    """SHA-256 over the section's structure.

    Formulas enter in host-relative form and Input cells by position only, so
    editing input values or moving the whole block leaves the hash unchanged.
    """
    sheet = wb.sheet(s.sheet)
    a, b = s.row_span
    lines = [f"section\t{b - a + 1}"]
    for addr, cell in sheet.cells.items():
        if not a <= addr.row <= b:
            continue
        key = SheetAddr(sheet.name, addr)
        cls = rm.class_of.get(key)
        pos = f"{addr.row - a},{addr.col}"
        if cls is RegionClass.INPUT:
            lines.append(f"{pos}\tdata")
        elif cell.is_formula:
            lines.append(f"{pos}\t{cls.value}\t{fm.render(fm.normalize(cell.content.ast, addr))}")
        else:
            lines.append(f"{pos}\t{cls.value}\t{type(cell.content).__name__}\t{_literal_text(cell.content)}")
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def _literal_text(content) -> str:
    if isinstance(content, NumberLiteral):
        return content.text
    if isinstance(content, (TextLiteral, BoolLiteral)):
        return repr(content.value)
    return content.code
