"""Cell dependency graph, cycle detection and reading-order analysis."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from . import formula as fm
from .model import SheetAddr, Workbook

DEFAULT_CELL_BUDGET = 1_000_000


class RangeTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Cycle:
    members: tuple[SheetAddr, ...]


@dataclass
class DepGraph:
    """Edges run from each formula cell to every cell it reads.

    ``edges`` keeps one entry per resolved reference cell, so a cell read
    twice by one formula appears twice; ``successors`` is the deduplicated view.
    """

    nodes: set[SheetAddr] = field(default_factory=set)
    edges: dict[SheetAddr, list[SheetAddr]] = field(default_factory=dict)
    sheet_order: dict[str, int] = field(default_factory=dict)
    names: dict[SheetAddr, list[str]] = field(default_factory=dict)
    _succ: dict[SheetAddr, frozenset[SheetAddr]] = field(default_factory=dict, repr=False)
    _pred: dict[SheetAddr, set[SheetAddr]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index()

    def _index(self):
        self._succ = {src: frozenset(dst) for src, dst in self.edges.items()}
        self._pred = {}
        for src, dsts in self._succ.items():
            for dst in dsts:
                self._pred.setdefault(dst, set()).add(src)

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.edges.values())

    def successors(self, node: SheetAddr) -> frozenset[SheetAddr]:
        return self._succ.get(node, frozenset())

    def predecessors(self, node: SheetAddr) -> set[SheetAddr]:
        return self._pred.get(node, set())

    def sort_key(self, node: SheetAddr):
        idx = self.sheet_order.get(node.sheet.casefold(), len(self.sheet_order))
        return (idx, node.sheet, node.addr.row, node.addr.col)

    @classmethod
    def from_edges(cls, edges: dict, sheet_order: dict | None = None) -> "DepGraph":
        nodes = set(edges)
        for dsts in edges.values():
            nodes.update(dsts)
        return cls(nodes, {k: list(v) for k, v in edges.items()}, dict(sheet_order or {}))


def build(wb: Workbook, cell_budget: int = DEFAULT_CELL_BUDGET) -> DepGraph:
    order = {s.name.casefold(): i for i, s in enumerate(wb.sheets)}
    nodes: set[SheetAddr] = set()
    edges: dict[SheetAddr, list[SheetAddr]] = {}
    names: dict[SheetAddr, list[str]] = {}
    for sheet, cell in wb.iter_cells():
        if not cell.is_formula:
            continue
        src = SheetAddr(sheet.name, cell.addr)
        nodes.add(src)
        targets, used_names = fm.references(cell.content.ast, cell.addr)
        out = edges.setdefault(src, [])
        for t in targets:
            if t.size > cell_budget:
                raise RangeTooLarge(f"{src}: range of {t.size} cells exceeds budget {cell_budget}")
            if t.sheet is None:
                target_sheet = sheet.name
            else:
                found = wb.sheet(t.sheet)
                target_sheet = found.name if found is not None else t.sheet
            out.extend(SheetAddr(target_sheet, a) for a in t.cells())
        nodes.update(out)
        if used_names:
            names[src] = used_names
    return DepGraph(nodes, edges, order, names)


def strongly_connected(g: DepGraph) -> list[list[SheetAddr]]:
    """Tarjan's algorithm, iterative so long reference chains do not hit the recursion limit."""
    index: dict[SheetAddr, int] = {}
    low: dict[SheetAddr, int] = {}
    on_stack: set[SheetAddr] = set()
    stack: list[SheetAddr] = []
    out: list[list[SheetAddr]] = []
    counter = 0
    for root in sorted(g.nodes, key=g.sort_key):
        if root in index:
            continue
        work = [(root, iter(sorted(g.successors(root), key=g.sort_key)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(g.successors(w), key=g.sort_key))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def find_cycles(g: DepGraph) -> list[Cycle]:
    cycles = []
    for comp in strongly_connected(g):
        if len(comp) > 1 or comp[0] in g.successors(comp[0]):
            cycles.append(Cycle(tuple(sorted(comp, key=g.sort_key))))
    cycles.sort(key=lambda c: g.sort_key(c.members[0]))
    return cycles


def direct_dependents(g: DepGraph, target: SheetAddr) -> set[SheetAddr]:
    return set(g.predecessors(target))


def reading_order_breaches(g: DepGraph, wb: Workbook, same_row_right_is_breach: bool = True,
                           exempt: Iterable[SheetAddr] = ()) -> list[tuple[SheetAddr, SheetAddr]]:
    """(formula cell, referenced cell) pairs that read against the page.

    On one sheet, a reference breaches when it points to a lower row, or to
    the right on the same row. Across sheets, it breaches when the referenced
    sheet comes later in the workbook. Cells in ``exempt`` are skipped.
    """
    exempt = set(exempt)
    order = {s.name: i for i, s in enumerate(wb.sheets)}
    out = []
    for src in sorted(g.edges, key=g.sort_key):
        if src in exempt:
            continue
        for dst in sorted(g.successors(src), key=g.sort_key):
            if dst.sheet == src.sheet:
                a, b = src.addr, dst.addr
                if b.row > a.row or (same_row_right_is_breach and b.row == a.row and b.col > a.col):
                    out.append((src, dst))
            elif dst.sheet in order and order[dst.sheet] > order[src.sheet]:
                out.append((src, dst))
    return out

