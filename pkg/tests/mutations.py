"""Single-edit workbook mutations used by certification trials.

``data_mutation`` changes one Input literal. The five structural classes
each make one edit that a certificate must notice.
"""
import dataclasses
from decimal import Decimal

from sheetcert import formula as fm
from sheetcert.model import (
    BoolLiteral, Cell, CellAddr, Formula, NumberLiteral, TextLiteral, Visibility, Workbook,
)


def _replace_cell(wb: Workbook, sheet_name: str, cell: Cell) -> Workbook:
    sheets = []
    for s in wb.sheets:
        if s.name == sheet_name:
            cells = dict(s.cells)
            cells[cell.addr] = cell
            s = dataclasses.replace(s, cells=cells)
        sheets.append(s)
    return dataclasses.replace(wb, sheets=tuple(sheets))


def _new_value(content, delta):
    if isinstance(content, NumberLiteral):
        return NumberLiteral(content.value + Decimal(delta))
    if isinstance(content, TextLiteral):
        return TextLiteral(content.value + f" v{delta}")
    if isinstance(content, BoolLiteral):
        return BoolLiteral(not content.value)
    return None


def data_mutation(wb: Workbook, target, delta=1):
    """Change the literal at ``target`` (a SheetAddr classed Input)."""
    cell = wb.sheet(target.sheet).get(target.addr)
    content = _new_value(cell.content, delta)
    if content is None:
        return None
    return _replace_cell(wb, target.sheet, Cell(cell.addr, content))


def formula_edit(wb: Workbook):
    for sheet, cell in wb.iter_cells():
        if cell.is_formula:
            root = fm.BinaryOp("+", fm.Paren(cell.content.ast.root), fm.Number("0"))
            ast = fm.FormulaAst(root)
            return _replace_cell(wb, sheet.name, Cell(cell.addr, Formula(fm.render(ast), ast)))
    return None


def cell_insert(wb: Workbook):
    if not wb.sheets:
        return None
    sheet = wb.sheets[0]
    row = max((a.row for a in sheet.cells), default=0) + 2
    return _replace_cell(wb, sheet.name, Cell(CellAddr(row, 1), TextLiteral("inserted")))


def sheet_rename(wb: Workbook):
    if not wb.sheets:
        return None
    first = dataclasses.replace(wb.sheets[0], name=wb.sheets[0].name + " renamed")
    return dataclasses.replace(wb, sheets=(first, *wb.sheets[1:]))


def hidden_toggle(wb: Workbook):
    if not wb.sheets:
        return None
    s = wb.sheets[0]
    vis = Visibility.HIDDEN if s.visibility is Visibility.VISIBLE else Visibility.VISIBLE
    return dataclasses.replace(wb, sheets=(dataclasses.replace(s, visibility=vis), *wb.sheets[1:]))


def iteration_toggle(wb: Workbook):
    settings = dataclasses.replace(wb.settings, iteration_enabled=not wb.settings.iteration_enabled)
    return dataclasses.replace(wb, settings=settings)


STRUCTURAL = {
    "formula edit": formula_edit,
    "cell insert": cell_insert,
    "sheet rename": sheet_rename,
    "hidden toggle": hidden_toggle,
    "iteration toggle": iteration_toggle,
}
