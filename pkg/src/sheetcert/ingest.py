"""Loaders: XLSX containers, plain-text fixtures and compliance manifests."""
from __future__ import annotations

import posixpath
import re
import zipfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import date, datetime
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import formula as fm
from .model import (
    BoolLiteral, Cell, CellAddr, ErrorLiteral, Formula, MalformedAddress, NumberLiteral,
    Sheet, TextLiteral, Visibility, Workbook, WorkbookSettings, addr_from_a1, letters_to_col,
)


class IngestError(Exception):
    pass


class NotAZipFile(IngestError):
    pass


class MissingWorkbookPart(IngestError):
    pass


class UnsupportedFeature(IngestError):
    pass


class FormulaParseError(IngestError):
    def __init__(self, sheet: str, addr: str, reason: str):
        super().__init__(f"{sheet}!{addr}: {reason}")
        self.sheet = sheet
        self.addr = addr
        self.reason = reason


class FixtureSyntaxError(IngestError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateCell(IngestError):
    def __init__(self, sheet: str, addr: str):
        super().__init__(f"duplicate cell {sheet}!{addr}")
        self.sheet = sheet
        self.addr = addr


class ManifestSyntaxError(IngestError):
    pass


class InconsistentRecord(IngestError):
    def __init__(self, section_name: str, reason: str):
        super().__init__(f"section {section_name!r}: {reason}")
        self.section_name = section_name
        self.reason = reason


def _formula_cell(sheet: str, addr: CellAddr, source: str) -> Cell:
    try:
        ast = fm.parse(source)
    except fm.ParseError as exc:
        raise FormulaParseError(sheet, addr.a1, str(exc)) from exc
    return Cell(addr, Formula(source, ast))


# -- XLSX ------------------------------------------------------------------

NS = {
    "m": "http://schemas.openxmlformats.org/spreadsheetml/2006/main",
    "r": "http://schemas.openxmlformats.org/officeDocument/2006/relationships",
    "pr": "http://schemas.openxmlformats.org/package/2006/relationships",
}
_TRUE = ("1", "true")


def _read_xml(zf: zipfile.ZipFile, name: str):
    try:
        data = zf.read(name)
    except KeyError:
        return None
    return ET.fromstring(data)


def _shared_strings(zf: zipfile.ZipFile, target: str | None) -> list[str]:
    root = _read_xml(zf, target or "xl/sharedStrings.xml")
    if root is None:
        return []
    out = []
    for si in root.findall("m:si", NS):
        # rich text runs are concatenated; phonetic runs (rPh) are skipped
        parts = [t.text or "" for t in si.findall("m:t", NS)]
        parts += [t.text or "" for t in si.findall("m:r/m:t", NS)]
        out.append("".join(parts))
    return out


def _rels(zf: zipfile.ZipFile, part: str) -> dict[str, tuple[str, str]]:
    folder, name = posixpath.split(part)
    root = _read_xml(zf, posixpath.join(folder, "_rels", name + ".rels"))
    if root is None:
        return {}
    out = {}
    for rel in root.findall("pr:Relationship", NS):
        target = rel.get("Target", "")
        if target.startswith("/"):
            path = target.lstrip("/")
        else:
            path = posixpath.normpath(posixpath.join(folder, target))
        out[rel.get("Id")] = (rel.get("Type", ""), path)
    return out


def _parse_sheet_part(zf: zipfile.ZipFile, part: str, name: str, visibility: Visibility,
                      strings: list[str]) -> Sheet:
    root = _read_xml(zf, part)
    if root is None:
        raise MissingWorkbookPart(f"worksheet part {part} missing")
    cells: dict[CellAddr, Cell] = {}
    shared: dict[str, tuple[CellAddr, fm.FormulaAst]] = {}
    hidden_rows, hidden_cols = set(), set()
    for col in root.findall("m:cols/m:col", NS):
        if col.get("hidden") in _TRUE:
            hidden_cols.update(range(int(col.get("min")), int(col.get("max")) + 1))
    pending_shared = []
    row_no = 0
    for row in root.findall("m:sheetData/m:row", NS):
        row_no = int(row.get("r")) if row.get("r") else row_no + 1
        if row.get("hidden") in _TRUE:
            hidden_rows.add(row_no)
        col_no = 0
        for c in row.findall("m:c", NS):
            ref = c.get("r")
            try:
                if ref:
                    addr = addr_from_a1(ref).addr
                else:
                    addr = CellAddr(row_no, col_no + 1)
            except MalformedAddress as exc:
                raise IngestError(f"{name}: {exc}") from exc
            col_no = addr.col
            f = c.find("m:f", NS)
            if f is not None:
                kind = f.get("t", "normal")
                if kind in ("array", "dataTable"):
                    raise UnsupportedFeature(f"{kind} formula at {name}!{addr.a1}")
                text = f.text or ""
                if kind == "shared" and not text:
                    pending_shared.append((addr, f.get("si")))
                    continue
                cell = _formula_cell(name, addr, "=" + text)
                if kind == "shared":
                    shared[f.get("si")] = (addr, cell.content.ast)
                cells[addr] = cell
                continue
            t = c.get("t", "n")
            v = c.find("m:v", NS)
            if t == "inlineStr":
                parts = [x.text or "" for x in c.iter("{%s}t" % NS["m"])]
                value = "".join(parts)
                if value:
                    cells[addr] = Cell(addr, TextLiteral(value))
                continue
            if v is None or v.text is None:
                continue
            raw = v.text
            if t == "s":
                try:
                    value = strings[int(raw)]
                except (ValueError, IndexError) as exc:
                    raise IngestError(f"{name}!{addr.a1}: bad shared string index {raw}") from exc
                if value:
                    cells[addr] = Cell(addr, TextLiteral(value))
            elif t == "str":
                if raw:
                    cells[addr] = Cell(addr, TextLiteral(raw))
            elif t == "b":
                cells[addr] = Cell(addr, BoolLiteral(raw.strip() in _TRUE))
            elif t == "e":
                cells[addr] = Cell(addr, ErrorLiteral(raw.strip()))
            else:
                try:
                    cells[addr] = Cell(addr, NumberLiteral(Decimal(raw.strip())))
                except InvalidOperation as exc:
                    raise IngestError(f"{name}!{addr.a1}: bad number {raw!r}") from exc
    for addr, si in pending_shared:
        if si not in shared:
            raise IngestError(f"{name}!{addr.a1}: shared formula group {si} has no master")
        master, ast = shared[si]
        try:
            moved = fm.translate(ast, addr.row - master.row, addr.col - master.col)
        except fm.OffsetOutOfGrid as exc:
            raise FormulaParseError(name, addr.a1, str(exc)) from exc
        cells[addr] = Cell(addr, Formula(fm.render(moved), moved))
    return Sheet(name, cells, visibility, frozenset(hidden_rows), frozenset(hidden_cols))


def load_xlsx(path) -> Workbook:
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise NotAZipFile(f"{path}: not a zip container") from exc
    except OSError as exc:
        raise IngestError(f"{path}: {exc}") from exc
    with zf:
        wb_part = "xl/workbook.xml"
        root_rels = _rels(zf, "")
        for typ, target in root_rels.values():
            if typ.endswith("/officeDocument"):
                wb_part = target
        root = _read_xml(zf, wb_part)
        if root is None:
            raise MissingWorkbookPart(f"{path}: {wb_part} missing")
        rels = _rels(zf, wb_part)
        strings_part = next((t for typ, t in rels.values() if typ.endswith("/sharedStrings")), None)
        strings = _shared_strings(zf, strings_part)
        sheets = []
        for el in root.findall("m:sheets/m:sheet", NS):
            name = el.get("name")
            rid = el.get("{%s}id" % NS["r"])
            if rid not in rels:
                raise MissingWorkbookPart(f"{path}: no relationship for sheet {name!r}")
            typ, part = rels[rid]
            if not typ.endswith("/worksheet"):
                raise UnsupportedFeature(f"sheet {name!r} is not a worksheet ({typ.rsplit('/', 1)[-1]})")
            state = el.get("state", "visible")
            visibility = {"hidden": Visibility.HIDDEN, "veryHidden": Visibility.VERY_HIDDEN}.get(
                state, Visibility.VISIBLE)
            sheets.append(_parse_sheet_part(zf, part, name, visibility, strings))
        calc = root.find("m:calcPr", NS)
        iterate = calc is not None and calc.get("iterate", "0") in _TRUE
        return Workbook(tuple(sheets), WorkbookSettings(iteration_enabled=iterate), str(path))


# -- fixture format --------------------------------------------------------

_FIXTURE_CELL = re.compile(r"(\$?[A-Z]{1,3}\$?[0-9]+)\s*:\s*(.*)")
_NUMBER = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")


def _on_off(value: str, line: int) -> bool:
    value = value.strip().lower()
    if value not in ("on", "off"):
        raise FixtureSyntaxError(line, f"expected on|off, got {value!r}")
    return value == "on"


def parse_fixture(text: str, source_path: str = "") -> Workbook:
    sheets: list[dict] = []
    iteration = False
    labels = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("!"):
            directive, _, arg = line[1:].partition(" ")
            arg = arg.strip()
            if directive == "sheet":
                if not arg:
                    raise FixtureSyntaxError(lineno, "sheet needs a name")
                if any(s["name"].casefold() == arg.casefold() for s in sheets):
                    raise FixtureSyntaxError(lineno, f"duplicate sheet {arg!r}")
                sheets.append({"name": arg, "cells": {}, "vis": Visibility.VISIBLE,
                               "rows": set(), "cols": set()})
            elif directive == "iteration":
                iteration = _on_off(arg, lineno)
            elif directive == "labels-in-formulas":
                labels = _on_off(arg, lineno)
            elif directive in ("hidden", "very-hidden", "hidden-rows", "hidden-cols"):
                if not sheets:
                    raise FixtureSyntaxError(lineno, f"!{directive} before any !sheet")
                cur = sheets[-1]
                if directive == "hidden":
                    cur["vis"] = Visibility.HIDDEN
                elif directive == "very-hidden":
                    cur["vis"] = Visibility.VERY_HIDDEN
                else:
                    items = [x.strip() for x in arg.split(",") if x.strip()]
                    try:
                        if directive == "hidden-rows":
                            cur["rows"].update(int(x) for x in items)
                        else:
                            cur["cols"].update(letters_to_col(x.upper()) for x in items)
                    except (ValueError, MalformedAddress) as exc:
                        raise FixtureSyntaxError(lineno, str(exc)) from exc
            else:
                raise FixtureSyntaxError(lineno, f"unknown directive !{directive}")
            continue
        m = _FIXTURE_CELL.fullmatch(line)
        if not m:
            raise FixtureSyntaxError(lineno, f"cannot parse {line!r}")
        if not sheets:
            raise FixtureSyntaxError(lineno, "cell before any !sheet")
        cur = sheets[-1]
        try:
            addr = addr_from_a1(m.group(1).replace("$", "")).addr
        except MalformedAddress as exc:
            raise FixtureSyntaxError(lineno, str(exc)) from exc
        if addr in cur["cells"]:
            raise DuplicateCell(cur["name"], addr.a1)
        content = m.group(2).strip()
        cell = _fixture_cell(cur["name"], addr, content, lineno)
        if cell is not None:
            cur["cells"][addr] = cell
    built = [Sheet(s["name"], s["cells"], s["vis"], frozenset(s["rows"]), frozenset(s["cols"]))
             for s in sheets]
    return Workbook(tuple(built), WorkbookSettings(iteration, labels), source_path)


def _fixture_cell(sheet: str, addr: CellAddr, content: str, lineno: int) -> Cell | None:
    if content.startswith("="):
        return _formula_cell(sheet, addr, content)
    if content.startswith('"'):
        if len(content) < 2 or not content.endswith('"'):
            raise FixtureSyntaxError(lineno, "unterminated text literal")
        body = content[1:-1]
        if re.search(r'(?<!")"(?!")', body.replace('""', "")):
            raise FixtureSyntaxError(lineno, "stray quote in text literal")
        value = body.replace('""', '"')
        return Cell(addr, TextLiteral(value)) if value else None
    if content.lower() in ("true", "false"):
        return Cell(addr, BoolLiteral(content.lower() == "true"))
    if content.upper() in fm.ERROR_CODES:
        return Cell(addr, ErrorLiteral(content.upper()))
    if _NUMBER.fullmatch(content):
        return Cell(addr, NumberLiteral(Decimal(content)))
    raise FixtureSyntaxError(lineno, f"unrecognised cell content {content!r}")


def load_fixture(path) -> Workbook:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"{path}: {exc}") from exc
    return parse_fixture(text, str(path))


def load_workbook(path) -> Workbook:
    """Dispatch on the file: zip containers load as XLSX, anything else as a fixture."""
    p = Path(path)
    if not p.is_file():
        raise IngestError(f"{path}: no such file")
    if zipfile.is_zipfile(p):
        return load_xlsx(p)
    if p.suffix.lower() in (".xlsx", ".xlsm"):
        raise NotAZipFile(f"{path}: not a zip container")
    return load_fixture(p)


# -- manifest --------------------------------------------------------------

REGION_CLASSES = ("input", "calculation", "output", "label", "check")


@dataclass(frozen=True)
class SectionRecord:
    section_name: str
    description: str = ""
    author: str = ""
    drafted_date: date | None = None
    checked_by: str | None = None
    checked_date: date | None = None
    section_fingerprint_at_check: str | None = None


@dataclass(frozen=True)
class Manifest:
    spec_path: str | None = None
    sections: tuple[SectionRecord, ...] = ()
    regions: tuple[tuple[str, str], ...] = ()  # (class name, "Sheet!A1:B2")
    source_path: str = ""

    def record(self, name: str) -> SectionRecord | None:
        for rec in self.sections:
            if rec.section_name == name:
                return rec
        return None

    def resolve_spec(self) -> Path | None:
        if not self.spec_path:
            return None
        p = Path(self.spec_path)
        if not p.is_absolute() and self.source_path:
            p = Path(self.source_path).parent / p
        return p


_SECTION_KEYS = {"description", "author", "drafted", "checked_by", "checked", "fingerprint"}
_HEX = re.compile(r"[0-9a-f]{64}")


def _iso_date(value: str, where: str) -> date:
    if not re.fullmatch(r"\d{4}-\d{2}-\d{2}", value):
        raise ManifestSyntaxError(f"{where}: date must be YYYY-MM-DD, got {value!r}")
    try:
        return datetime.strptime(value, "%Y-%m-%d").date()
    except ValueError as exc:
        raise ManifestSyntaxError(f"{where}: {exc}") from exc


def _build_record(name: str, fields: dict) -> SectionRecord:
    checked_by = fields.get("checked_by") or None
    checked = fields.get("checked")
    drafted = fields.get("drafted")
    if (checked_by is None) != (checked is None):
        raise InconsistentRecord(name, "checked_by and checked must be given together")
    if drafted and checked and checked < drafted:
        raise InconsistentRecord(name, "checked date precedes drafted date")
    fp = fields.get("fingerprint")
    if fp is not None and not _HEX.fullmatch(fp):
        raise ManifestSyntaxError(f"section {name!r}: fingerprint must be 64 lower-case hex digits")
    return SectionRecord(name, fields.get("description", ""), fields.get("author", ""), drafted,
                         checked_by, checked, fp)


def parse_manifest(text: str, source_path: str = "") -> Manifest:
    spec_path = None
    regions = []
    records: list[SectionRecord] = []
    current: tuple[str, dict] | None = None
    names = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"line {lineno}"
        m = re.fullmatch(r"\[section\s+(.+?)\s*\]", line)
        if m:
            if current:
                records.append(_build_record(*current))
            name = m.group(1)
            if name in names:
                raise ManifestSyntaxError(f"{where}: duplicate section {name!r}")
            names.add(name)
            current = (name, {})
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise ManifestSyntaxError(f"{where}: expected key = value")
        if key.startswith("region."):
            cls = key[len("region."):].lower()
            if cls not in REGION_CLASSES:
                raise ManifestSyntaxError(f"{where}: unknown region class {cls!r}")
            regions.append((cls, value))
            continue
        if current is None:
            if key != "spec":
                raise ManifestSyntaxError(f"{where}: unknown top-level key {key!r}")
            spec_path = value or None
            continue
        if key not in _SECTION_KEYS:
            raise ManifestSyntaxError(f"{where}: unknown section key {key!r}")
        if key in current[1]:
            raise ManifestSyntaxError(f"{where}: repeated key {key!r}")
        if key in ("drafted", "checked"):
            current[1][key] = _iso_date(value, where)
        else:
            current[1][key] = value
    if current:
        records.append(_build_record(*current))
    return Manifest(spec_path, tuple(records), tuple(regions), source_path)


def load_manifest(path) -> Manifest:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"{path}: {exc}") from exc
    return parse_manifest(text, str(path))
