"""Rule catalog R01-R21 and the checks that produce violations."""
from __future__ import annotations

import dataclasses
import enum
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable

from . import formula as fm
from . import graph as gr
from .ingest import Manifest
from .model import (
    BoolLiteral, ErrorLiteral, NumberLiteral, SheetAddr, TextLiteral, Workbook, addr_from_a1,
    canonical_decimal, col_to_letters, letters_to_col,
)
from .regions import (
    DeclaredRegion, RegionClass, RegionMap, Section, SectionKind, infer, interleavings,
    parse_region, section_fingerprint,
)

RULESET_VERSION = "cop21-1.0"


class Severity(enum.Enum):
    REQUIRED = "Required"
    ENCOURAGED = "Encouraged"
    DISCOURAGED = "Discouraged"
    FORBIDDEN = "Forbidden"


SEVERITY_RANK = {Severity.FORBIDDEN: 0, Severity.REQUIRED: 1, Severity.DISCOURAGED: 2, Severity.ENCOURAGED: 3}


class Checkable(enum.Enum):
    AUTOMATIC = "Automatic"
    MANIFEST = "ManifestBased"
    HEURISTIC = "Heuristic"
    NOT_CHECKABLE = "NotCheckable"


class Verdict(enum.Enum):
    COMPLIANT = "Compliant"
    WARNINGS = "CompliantWithWarnings"
    NON_COMPLIANT = "NonCompliant"


@dataclass(frozen=True)
class RuleMeta:
    id: str
    severity: Severity
    title: str
    appendix_item: int
    checkable: Checkable


def _severity_for_item(item: int) -> Severity:
    if item <= 7:
        return Severity.REQUIRED
    if item <= 15:
        return Severity.ENCOURAGED
    if item <= 17:
        return Severity.DISCOURAGED
    return Severity.FORBIDDEN


_A, _M, _H, _N = Checkable.AUTOMATIC, Checkable.MANIFEST, Checkable.HEURISTIC, Checkable.NOT_CHECKABLE
_CATALOG_ROWS = (
    (_A, "Formulas in a calculation row are consistent left to right"),
    (_H, "Input, calculation and output regions are separated"),
    (_H, "Sections are modular and titled"),
    (_A, "Formulas read left to right and top to bottom"),
    (_M, "Assumptions and sections are documented"),
    (_M, "Section descriptions drafted with the sections"),
    (_M, "Each section independently checked after every change"),
    (_H, "Workbook is easy to read at a glance"),
    (_M, "Author and drafting date recorded per section"),
    (_N, "Proven logic reused across projects"),
    (_M, "Workbook accompanied by a detailed specification"),
    (_N, "Hard-coded parameters entered last"),
    (_A, "Each input brought into the calculations once and once only"),
    (_H, "Extensive self-checking"),
    (_A, "Circularity avoided or controlled"),
    (_A, "Hard-coded constants in formulas"),
    (_A, "Overly complex formulas"),
    (_A, "Hard-coded constant in place of a formula"),
    (_A, "[Iteration] box unchecked"),
    (_A, "[Accept labels in formulas] box unchecked"),
    (_A, "Hidden cells and hidden sheets"),
)
CATALOG = tuple(
    RuleMeta(f"R{i:02d}", _severity_for_item(i), title, i, chk)
    for i, (chk, title) in enumerate(_CATALOG_ROWS, 1)
)
RULES = {m.id: m for m in CATALOG}
NOT_CHECKABLE = tuple(m.id for m in CATALOG if m.checkable is Checkable.NOT_CHECKABLE)


def catalog() -> tuple[RuleMeta, ...]:
    return CATALOG


# -- violations ------------------------------------------------------------

_LOCATION_KINDS = ("workbook", "sheet", "section", "rows", "row", "col", "cell")


@dataclass(frozen=True)
class Location:
    """Where a violation sits: ``kind`` is one of workbook, sheet, section,
    rows, row, col or cell; ``ref`` is the human-readable coordinate."""

    kind: str
    ref: str = ""

    def sort_key(self):
        if self.kind == "cell":
            a = addr_from_a1(self.ref).addr
            return (a.row, a.col, self.ref)
        if self.kind in ("row", "rows"):
            return (int(self.ref.split("-")[0]), 0, self.ref)
        if self.kind == "col":
            return (0, letters_to_col(self.ref), self.ref)
        return (0, 0, self.ref)

    def __str__(self):
        if self.kind == "workbook":
            return "workbook"
        if self.kind == "sheet":
            return "sheet"
        return f"{self.kind} {self.ref}" if self.kind != "cell" else self.ref


WORKBOOK = Location("workbook")


def cell_loc(addr) -> Location:
    return Location("cell", addr.a1)


def rows_loc(a: int, b: int) -> Location:
    return Location("row", str(a)) if a == b else Location("rows", f"{a}-{b}")


@dataclass(frozen=True)
class Violation:
    rule: str
    sheet: str
    location: Location
    message: str
    details: tuple[tuple[str, str], ...] = ()

    @property
    def severity(self) -> Severity:
        return RULES[self.rule].severity

    @property
    def details_dict(self) -> dict[str, str]:
        return dict(self.details)


def violation(rule: str, sheet: str, location: Location, message: str, **details) -> Violation:
    return Violation(rule, sheet, location, message, tuple((k, str(v)) for k, v in details.items()))


def sort_violations(violations: Iterable[Violation], wb: Workbook) -> list[Violation]:
    order = {s.name: i for i, s in enumerate(wb.sheets)}

    def key(v):
        return (SEVERITY_RANK[v.severity], v.rule, order.get(v.sheet, -1 if not v.sheet else len(order)),
                v.sheet, _LOCATION_KINDS.index(v.location.kind), v.location.sort_key(), v.message, v.details)

    return sorted(violations, key=key)


def verdict(violations: Iterable[Violation]) -> Verdict:
    sev = {v.severity for v in violations}
    if sev & {Severity.REQUIRED, Severity.FORBIDDEN}:
        return Verdict.NON_COMPLIANT
    if sev:
        return Verdict.WARNINGS
    return Verdict.COMPLIANT


# -- configuration ---------------------------------------------------------

class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RuleConfig:
    complexity_node_limit: int = 25
    complexity_depth_limit: int = 7
    constant_allow_list: frozenset = frozenset(Decimal(v) for v in ("0", "1", "-1", "100"))
    exempt_function_args: bool = True
    run_min_length: int = 3
    min_check_cells: int = 1
    disabled_rules: frozenset = frozenset()
    same_row_right_is_breach: bool = True

    def __post_init__(self):
        if self.complexity_node_limit < 1 or self.complexity_depth_limit < 1:
            raise ConfigError("complexity limits must be positive")
        if self.min_check_cells < 1:
            raise ConfigError("min_check_cells must be positive")
        if self.run_min_length < 2:
            raise ConfigError("run_min_length must be at least 2")
        unknown = set(self.disabled_rules) - set(RULES)
        if unknown:
            raise ConfigError(f"unknown rule ids: {', '.join(sorted(unknown))}")
        object.__setattr__(self, "constant_allow_list",
                           frozenset(Decimal(v) for v in self.constant_allow_list))
        object.__setattr__(self, "disabled_rules", frozenset(self.disabled_rules))

    def canonical_text(self) -> str:
        """One ``key = value`` line per field; the form that gets digested."""
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **values) -> "RuleConfig":
        return dataclasses.replace(self, **values)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, frozenset):
        if all(isinstance(v, Decimal) for v in value):
            return ",".join(canonical_decimal(v) for v in sorted(value))
        return ",".join(sorted(map(str, value)))
    return str(value)


def _parse_value(name: str, raw: str, kind):
    raw = raw.strip()
    if name == "constant_allow_list":
        try:
            return frozenset(Decimal(x.strip()) for x in raw.split(",") if x.strip())
        except InvalidOperation:
            raise ConfigError(f"{name}: not a list of numbers: {raw!r}") from None
    if name == "disabled_rules":
        return frozenset(x.strip().upper() for x in raw.split(",") if x.strip())
    if kind is bool:
        low = raw.lower()
        if low in ("true", "on", "yes", "1"):
            return True
        if low in ("false", "off", "no", "0"):
            return False
        raise ConfigError(f"{name}: expected true/false, got {raw!r}")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None


_FIELD_TYPES = {"exempt_function_args": bool, "same_row_right_is_breach": bool}


def parse_config(text: str, base: RuleConfig | None = None) -> RuleConfig:
    names = {f.name for f in dataclasses.fields(RuleConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in names:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, value, _FIELD_TYPES.get(key, int))
    return dataclasses.replace(base or RuleConfig(), **values)


# -- checks ----------------------------------------------------------------

_RUN_CLASSES = (RegionClass.CALCULATION, RegionClass.INPUT, RegionClass.OUTPUT)


def _runs(cells, classes, min_len):
    """Maximal runs of horizontally adjacent cells whose class is in ``_RUN_CLASSES``."""
    runs, cur = [], []
    for cell in cells:
        ok = classes[cell.addr] in _RUN_CLASSES
        if ok and cur and cur[-1].addr.col == cell.addr.col - 1:
            cur.append(cell)
            continue
        if len(cur) >= min_len:
            runs.append(cur)
        cur = [cell] if ok else []
    if len(cur) >= min_len:
        runs.append(cur)
    return runs


def check_consistency(wb: Workbook, rm: RegionMap, cfg: RuleConfig) -> list[Violation]:
    out = []
    for sheet in wb.sheets:
        for row, cells in sorted(sheet.rows().items()):
            classes = {c.addr: rm.class_of[SheetAddr(sheet.name, c.addr)] for c in cells}
            if RegionClass.CALCULATION not in classes.values():
                continue
            for run in _runs(cells, classes, cfg.run_min_length):
                norms = [fm.normalize(c.content.ast, c.addr) if c.is_formula else None for c in run]
                counts = Counter(n for n in norms if n is not None)
                if len(counts) >= 2:
                    top = max(counts.values())
                    modal = next(n for n in norms if n is not None and counts[n] == top)
                    for cell, norm in zip(run, norms):
                        if norm is not None and norm != modal:
                            out.append(violation(
                                "R01", sheet.name, cell_loc(cell.addr),
                                "formula differs from the rest of its row",
                                expected=fm.render(modal), found=fm.render(norm)))
                for i in range(1, len(run) - 1):
                    if norms[i] is None and norms[i - 1] is not None and norms[i - 1] == norms[i + 1]:
                        cell = run[i]
                        out.append(violation(
                            "R18", sheet.name, cell_loc(cell.addr),
                            "hard-coded value where the row has a formula",
                            expected=fm.render(norms[i - 1]), value=_literal(cell.content)))
    return out


def _literal(content) -> str:
    if isinstance(content, NumberLiteral):
        return content.text
    if isinstance(content, TextLiteral):
        return content.value
    if isinstance(content, BoolLiteral):
        return "TRUE" if content.value else "FALSE"
    if isinstance(content, ErrorLiteral):
        return content.code
    return fm.render(content.ast)


def check_regions(wb: Workbook, rm: RegionMap) -> list[Violation]:
    out = [violation("R02", sheet, Location("row", str(row)), desc) for sheet, row, desc in interleavings(rm)]
    untitled = [s for s in rm.sections if s.kind is SectionKind.CALC and not s.title]
    if out or untitled:
        out.append(violation(
            "R08", "", WORKBOOK, "layout does not show at a glance where inputs, calculations and outputs are",
            interleaved_rows=sum(1 for v in out if v.rule == "R02"), untitled_calc_sections=len(untitled)))
    return out


def check_sections(wb: Workbook, rm: RegionMap) -> list[Violation]:
    return [violation("R03", s.sheet, rows_loc(*s.row_span), f"{s.kind.value} has no title")
            for s in rm.sections if s.kind in (SectionKind.CALC, SectionKind.INPUT) and not s.title]


def check_reading_order(wb: Workbook, g: gr.DepGraph, rm: RegionMap, cfg: RuleConfig) -> list[Violation]:
    exempt = rm.cells_of(RegionClass.CHECK)
    out = []
    for src, dst in gr.reading_order_breaches(g, wb, cfg.same_row_right_is_breach, exempt):
        where = dst.addr.a1 if dst.sheet == src.sheet else str(dst)
        out.append(violation("R04", src.sheet, cell_loc(src.addr), f"reads {where}, which comes later",
                             references=str(dst)))
    return out


_RECORD_KINDS = (SectionKind.INPUT, SectionKind.CALC, SectionKind.CHECK)


def _record_for(manifest: Manifest, s: Section):
    return manifest.record(f"{s.sheet}!{s.label}") or manifest.record(s.label)


def check_manifest(wb: Workbook, rm: RegionMap, manifest: Manifest | None,
                   sections: Iterable[Section] | None = None) -> list[Violation]:
    if manifest is None:
        msg = "no compliance manifest supplied"
        return [violation(r, "", WORKBOOK, msg) for r in ("R05", "R07", "R09", "R11")]
    sections = rm.sections if sections is None else sections
    out = []
    spec = manifest.resolve_spec()
    if spec is None:
        out.append(violation("R11", "", WORKBOOK, "manifest names no specification"))
    elif not spec.is_file():
        out.append(violation("R11", "", WORKBOOK, "specification file not found", spec=manifest.spec_path))
    for s in sections:
        if s.kind not in _RECORD_KINDS:
            continue
        loc = Location("section", s.label)
        rec = _record_for(manifest, s)
        if rec is None:
            msg = "section has no manifest record"
            out.extend(violation(r, s.sheet, loc, msg) for r in ("R05", "R06", "R07", "R09"))
            continue
        if not rec.author or rec.drafted_date is None:
            out.append(violation("R09", s.sheet, loc, "author or drafting date missing"))
        if not rec.description:
            out.append(violation("R05", s.sheet, loc, "section description missing"))
            out.append(violation("R06", s.sheet, loc, "section description missing"))
        if rec.checked_by is None:
            out.append(violation("R07", s.sheet, loc, "section never independently checked"))
        else:
            current = section_fingerprint(wb, rm, s)
            if rec.section_fingerprint_at_check != current:
                out.append(violation("R07", s.sheet, loc, "section changed since it was last checked",
                                     checked_by=rec.checked_by, current_fingerprint=current))
    return out


def check_single_import(wb: Workbook, g: gr.DepGraph, rm: RegionMap) -> list[Violation]:
    out = []
    for cell in sorted(rm.cells_of(RegionClass.INPUT), key=g.sort_key):
        deps = gr.direct_dependents(g, cell)
        if not deps:
            out.append(violation("R13", cell.sheet, cell_loc(cell.addr), "unused input", kind="unused"))
        elif len(deps) >= 2:
            readers = ",".join(str(d) for d in sorted(deps, key=g.sort_key))
            out.append(violation("R13", cell.sheet, cell_loc(cell.addr), "multiple import",
                                 kind="multiple", readers=readers))
    return out


def check_self_checks(wb: Workbook, rm: RegionMap, cfg: RuleConfig) -> list[Violation]:
    checks = len(rm.cells_of(RegionClass.CHECK))
    calcs = len(rm.cells_of(RegionClass.CALCULATION))
    if calcs and checks < cfg.min_check_cells:
        return [violation("R14", "", WORKBOOK, f"{checks} check cells for {calcs} calculations",
                          check_cells=checks, required=cfg.min_check_cells)]
    return []


def check_circularity(wb: Workbook, g: gr.DepGraph) -> list[Violation]:
    out = []
    for cyc in gr.find_cycles(g):
        first = cyc.members[0]
        out.append(violation("R15", first.sheet, cell_loc(first.addr),
                             f"circular reference through {len(cyc.members)} cell(s)",
                             members=",".join(str(m) for m in cyc.members),
                             uncontrolled=str(not wb.settings.iteration_enabled).lower()))
    return out


def check_constants(wb: Workbook, rm: RegionMap, cfg: RuleConfig) -> list[Violation]:
    out = []
    for sheet, cell in wb.iter_cells():
        if not cell.is_formula or rm.class_of[SheetAddr(sheet.name, cell.addr)] is not RegionClass.CALCULATION:
            continue
        lits = fm.constant_literals(cell.content.ast, cfg.constant_allow_list, cfg.exempt_function_args)
        if lits:
            out.append(violation("R16", sheet.name, cell_loc(cell.addr), "hard-coded constant in formula",
                                 literals=",".join(canonical_decimal(v) for v, _ in lits)))
    return out


def check_complexity(wb: Workbook, rm: RegionMap, cfg: RuleConfig) -> list[Violation]:
    out = []
    for sheet, cell in wb.iter_cells():
        if not cell.is_formula:
            continue
        m = fm.metrics(cell.content.ast)
        if m.node_count > cfg.complexity_node_limit or m.depth > cfg.complexity_depth_limit:
            out.append(violation("R17", sheet.name, cell_loc(cell.addr), "formula is too complex",
                                 node_count=m.node_count, depth=m.depth))
    return out


def check_settings(wb: Workbook) -> list[Violation]:
    out = []
    if wb.settings.iteration_enabled:
        out.append(violation("R19", "", WORKBOOK, "iterative calculation is enabled"))
    if wb.settings.accept_labels_in_formulas:
        out.append(violation("R20", "", WORKBOOK, "labels are accepted in formulas"))
    return out


def check_hidden(wb: Workbook) -> list[Violation]:
    out = []
    for sheet in wb.sheets:
        if sheet.visibility.value != "Visible":
            out.append(violation("R21", sheet.name, Location("sheet", sheet.name),
                                 f"sheet is {sheet.visibility.value.lower()}"))
        out.extend(violation("R21", sheet.name, Location("row", str(r)), "hidden row")
                   for r in sorted(sheet.hidden_rows))
        out.extend(violation("R21", sheet.name, Location("col", col_to_letters(c)), "hidden column")
                   for c in sorted(sheet.hidden_cols))
    return out


# -- orchestration ---------------------------------------------------------

@dataclass
class CheckResult:
    violations: list[Violation]
    regions: RegionMap
    graph: gr.DepGraph
    not_assessable: list[str] = field(default_factory=list)
    notes: dict[str, str] = field(default_factory=dict)

    @property
    def verdict(self) -> Verdict:
        return verdict(self.violations)


def manifest_regions(manifest: Manifest | None) -> list[DeclaredRegion]:
    if manifest is None:
        return []
    return [parse_region(cls, spec) for cls, spec in manifest.regions]


def run_all(wb: Workbook, manifest: Manifest | None = None, cfg: RuleConfig | None = None,
            overrides: Iterable[DeclaredRegion] = (), cell_budget: int = gr.DEFAULT_CELL_BUDGET) -> CheckResult:
    cfg = cfg or RuleConfig()
    g = gr.build(wb, cell_budget)
    rm = infer(wb, g, [*manifest_regions(manifest), *overrides])
    enabled = lambda *ids: any(r not in cfg.disabled_rules for r in ids)  # noqa: E731
    found: list[Violation] = []
    if enabled("R01", "R18"):
        found += check_consistency(wb, rm, cfg)
    if enabled("R02", "R08"):
        found += check_regions(wb, rm)
    if enabled("R03"):
        found += check_sections(wb, rm)
    if enabled("R04"):
        found += check_reading_order(wb, g, rm, cfg)
    if enabled("R05", "R06", "R07", "R09", "R11"):
        found += check_manifest(wb, rm, manifest)
    if enabled("R13"):
        found += check_single_import(wb, g, rm)
    if enabled("R14"):
        found += check_self_checks(wb, rm, cfg)
    if enabled("R15"):
        found += check_circularity(wb, g)
    if enabled("R16"):
        found += check_constants(wb, rm, cfg)
    if enabled("R17"):
        found += check_complexity(wb, rm, cfg)
    if enabled("R19", "R20"):
        found += check_settings(wb)
    if enabled("R21"):
        found += check_hidden(wb)
    found = [v for v in found if v.rule not in cfg.disabled_rules]
    not_assessable = list(NOT_CHECKABLE)
    notes = {r: "process property, not observable in a finished workbook" for r in NOT_CHECKABLE}
    if wb.settings.accept_labels_in_formulas is None:
        not_assessable.append("R20")
        notes["R20"] = "not expressible in source format"
    return CheckResult(sort_violations(found, wb), rm, g, sorted(not_assessable), notes)
