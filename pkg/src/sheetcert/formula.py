"""Formula tokenizer, parser and AST utilities.

Operator precedence, lowest first: comparisons, ``&``, ``+ -``, ``* /``,
``^``, prefix ``- +``, postfix ``%``. All binary operators are
left-associative.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterator, NamedTuple, Union

from .model import (
    MAX_COL, MAX_ROW, CellAddr, canonical_decimal, col_to_letters, letters_to_col,
)

ERROR_CODES = ("#DIV/0!", "#N/A", "#NAME?", "#NULL!", "#NUM!", "#REF!", "#VALUE!")
COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")
BINARY_LEVELS = {
    **{op: 0 for op in COMPARISONS},
    "&": 1,
    "+": 2, "-": 2,
    "*": 3, "/": 3,
    "^": 4,
}
PREFIX_LEVEL = 5
POSTFIX_LEVEL = 6
ATOM_LEVEL = 7


class ParseError(ValueError):
    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class FormulaSyntaxError(ParseError):
    def __init__(self, position: int, expected: str, found: str = ""):
        msg = f"expected {expected}" + (f", found {found!r}" if found else "")
        super().__init__(msg, position)
        self.expected = expected


class UnbalancedParens(ParseError):
    pass


class UnknownToken(ParseError):
    pass


class OffsetOutOfGrid(ValueError):
    pass


# -- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Number:
    text: str  # canonical decimal text

    @property
    def value(self) -> Decimal:
        return Decimal(self.text)


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class ErrorLit:
    code: str


@dataclass(frozen=True)
class CellRef:
    row: int
    col: int
    row_abs: bool = False
    col_abs: bool = False
    sheet: str | None = None

    @property
    def addr(self) -> CellAddr:
        return CellAddr(self.row, self.col)


@dataclass(frozen=True)
class RangeRef:
    start: CellRef
    end: CellRef

    @property
    def sheet(self) -> str | None:
        return self.start.sheet


@dataclass(frozen=True)
class NameRef:
    name: str


@dataclass(frozen=True)
class FunctionCall:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class UnaryOp:
    op: str  # "-", "+" (prefix) or "%" (postfix)
    operand: "Node"


@dataclass(frozen=True)
class Paren:
    inner: "Node"


@dataclass(frozen=True)
class OffsetRef:
    """A reference in host-independent form.

    On a relative axis ``row``/``col`` hold the signed offset from the host;
    on an absolute axis they hold the coordinate itself.
    """

    row: int
    col: int
    row_abs: bool
    col_abs: bool
    sheet: str | None = None


@dataclass(frozen=True)
class OffsetRange:
    start: OffsetRef
    end: OffsetRef


Node = Union[Number, Text, Bool, ErrorLit, CellRef, RangeRef, NameRef, FunctionCall,
             BinaryOp, UnaryOp, Paren, OffsetRef, OffsetRange]


@dataclass(frozen=True)
class FormulaAst:
    root: Node


# -- tokenizer -------------------------------------------------------------

class Token(NamedTuple):
    kind: str  # NUM STR ERR REF NAME FUNC BOOL OP LP RP COMMA COLON END
    value: object
    pos: int


_WS = re.compile(r"\s+")
_NUM = re.compile(r"(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_STR = re.compile(r'"((?:[^"]|"")*)"')
_QUOTED_SHEET = re.compile(r"'((?:[^']|'')+)'!")
_BARE_SHEET = re.compile(r"([A-Za-z_][A-Za-z0-9_.]*)!")
_REF = re.compile(r"(\$?)([A-Za-z]{1,3})(\$?)([0-9]+)(?![A-Za-z0-9_.(\\])")
_IDENT = re.compile(r"[A-Za-z_\\][A-Za-z0-9_.\\]*")
_OPS = ("<=", ">=", "<>", "+", "-", "*", "/", "^", "&", "=", "<", ">", "%")
_BARE_SHEET_OK = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")


def _match_ref(text: str, pos: int, sheet: str | None):
    m = _REF.match(text, pos)
    if not m:
        return None
    col = letters_to_col(m.group(2).upper())
    row = int(m.group(4))
    if not (1 <= row <= MAX_ROW and 1 <= col <= MAX_COL):
        return None
    ref = CellRef(row, col, row_abs=bool(m.group(3)), col_abs=bool(m.group(1)), sheet=sheet)
    return ref, m.end()


def tokenize(source: str) -> list[Token]:
    if not source.startswith("="):
        raise FormulaSyntaxError(0, "'=' at start of formula", source[:1])
    text = source
    pos = 1
    tokens: list[Token] = []
    n = len(text)
    while pos < n:
        m = _WS.match(text, pos)
        if m:
            pos = m.end()
            continue
        ch = text[pos]
        start = pos
        if ch == '"':
            m = _STR.match(text, pos)
            if not m:
                raise FormulaSyntaxError(pos, "closing '\"'")
            tokens.append(Token("STR", m.group(1).replace('""', '"'), start))
            pos = m.end()
            continue
        if ch == "#":
            upper = text[pos:pos + 8].upper()
            for code in ERROR_CODES:
                if upper.startswith(code):
                    tokens.append(Token("ERR", code, start))
                    pos += len(code)
                    break
            else:
                raise UnknownToken(f"unknown error literal {text[pos:pos + 8]!r}", pos)
            continue
        m = _NUM.match(text, pos)
        if m:
            tokens.append(Token("NUM", canonical_decimal(m.group(0)), start))
            pos = m.end()
            continue
        sheet = None
        m = _QUOTED_SHEET.match(text, pos) if ch == "'" else _BARE_SHEET.match(text, pos)
        if m:
            sheet = m.group(1).replace("''", "'") if ch == "'" else m.group(1)
            pos = m.end()
            hit = _match_ref(text, pos, sheet)
            if hit is None:
                raise FormulaSyntaxError(pos, "cell reference after sheet qualifier", text[pos:pos + 1])
            tokens.append(Token("REF", hit[0], start))
            pos = hit[1]
            continue
        if ch == "'":
            raise UnknownToken("unterminated sheet qualifier", pos)
        if ch == "$" or ch.isascii() and ch.isalpha():
            hit = _match_ref(text, pos, None)
            if hit is not None:
                tokens.append(Token("REF", hit[0], start))
                pos = hit[1]
                continue
        m = _IDENT.match(text, pos)
        if m:
            word = m.group(0)
            pos = m.end()
            look = _WS.match(text, pos)
            after = look.end() if look else pos
            if after < n and text[after] == "(":
                tokens.append(Token("FUNC", word.upper(), start))
            elif word.upper() in ("TRUE", "FALSE"):
                tokens.append(Token("BOOL", word.upper() == "TRUE", start))
            else:
                tokens.append(Token("NAME", word, start))
            continue
        if ch == "(":
            tokens.append(Token("LP", "(", start))
            pos += 1
            continue
        if ch == ")":
            tokens.append(Token("RP", ")", start))
            pos += 1
            continue
        if ch == ",":
            tokens.append(Token("COMMA", ",", start))
            pos += 1
            continue
        if ch == ":":
            tokens.append(Token("COLON", ":", start))
            pos += 1
            continue
        for op in _OPS:
            if text.startswith(op, pos):
                tokens.append(Token("OP", op, start))
                pos += len(op)
                break
        else:
            raise UnknownToken(f"unexpected character {ch!r}", pos)
    tokens.append(Token("END", None, n))
    return tokens


# -- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def parse(self) -> Node:
        if self.tok.kind == "END":
            raise FormulaSyntaxError(self.tok.pos, "expression")
        node = self.binary(0)
        t = self.tok
        if t.kind == "RP":
            raise UnbalancedParens("unmatched ')'", t.pos)
        if t.kind != "END":
            raise FormulaSyntaxError(t.pos, "operator or end of formula", str(t.value))
        return node

    def binary(self, level: int) -> Node:
        if level > 4:
            return self.prefix()
        left = self.binary(level + 1)
        while self.tok.kind == "OP" and BINARY_LEVELS.get(self.tok.value) == level:
            op = self.advance().value
            right = self.binary(level + 1)
            left = BinaryOp(op, left, right)
        return left

    def prefix(self) -> Node:
        if self.tok.kind == "OP" and self.tok.value in ("-", "+"):
            op = self.advance().value
            return UnaryOp(op, self.prefix())
        return self.postfix()

    def postfix(self) -> Node:
        node = self.primary()
        while self.tok.kind == "OP" and self.tok.value == "%":
            self.advance()
            node = UnaryOp("%", node)
        return node

    def primary(self) -> Node:
        t = self.advance()
        kind = t.kind
        if kind == "NUM":
            return Number(t.value)
        if kind == "STR":
            return Text(t.value)
        if kind == "BOOL":
            return Bool(t.value)
        if kind == "ERR":
            return ErrorLit(t.value)
        if kind == "NAME":
            return NameRef(t.value)
        if kind == "REF":
            start = t.value
            if self.tok.kind != "COLON":
                return start
            self.advance()
            end_tok = self.advance()
            if end_tok.kind != "REF":
                raise FormulaSyntaxError(end_tok.pos, "cell reference after ':'", str(end_tok.value or ""))
            end = end_tok.value
            if end.sheet is not None and (start.sheet or "").casefold() != end.sheet.casefold():
                raise FormulaSyntaxError(end_tok.pos, "range endpoints on one sheet")
            return RangeRef(start, CellRef(end.row, end.col, end.row_abs, end.col_abs, start.sheet))
        if kind == "FUNC":
            self.advance()  # "("
            args = []
            if self.tok.kind == "RP":
                self.advance()
                return FunctionCall(t.value, ())
            while True:
                args.append(self.binary(0))
                nxt = self.advance()
                if nxt.kind == "COMMA":
                    continue
                if nxt.kind == "RP":
                    return FunctionCall(t.value, tuple(args))
                if nxt.kind == "END":
                    raise UnbalancedParens(f"missing ')' for {t.value}(", t.pos)
                raise FormulaSyntaxError(nxt.pos, "',' or ')'", str(nxt.value))
        if kind == "LP":
            inner = self.binary(0)
            nxt = self.advance()
            if nxt.kind == "RP":
                return Paren(inner)
            if nxt.kind == "END":
                raise UnbalancedParens("missing ')'", t.pos)
            raise FormulaSyntaxError(nxt.pos, "')'", str(nxt.value))
        if kind == "RP":
            raise UnbalancedParens("unmatched ')'", t.pos)
        if kind == "END":
            raise FormulaSyntaxError(t.pos, "operand", "end of formula")
        raise FormulaSyntaxError(t.pos, "operand", str(t.value))


def parse(source: str) -> FormulaAst:
    """Parse formula text (including the leading ``=``)."""
    return FormulaAst(_Parser(tokenize(source)).parse())


# -- rendering -------------------------------------------------------------

def _quote_sheet(name: str) -> str:
    if _BARE_SHEET_OK.fullmatch(name) and not _REF.fullmatch(name) and name.upper() not in ("TRUE", "FALSE"):
        return name
    return "'" + name.replace("'", "''") + "'"


def _ref_text(ref: CellRef, with_sheet: bool = True) -> str:
    prefix = _quote_sheet(ref.sheet) + "!" if (with_sheet and ref.sheet is not None) else ""
    return (f"{prefix}{'$' if ref.col_abs else ''}{col_to_letters(ref.col)}"
            f"{'$' if ref.row_abs else ''}{ref.row}")


def _offset_text(ref: OffsetRef) -> str:
    prefix = _quote_sheet(ref.sheet) + "!" if ref.sheet is not None else ""
    r = f"R{ref.row}" if ref.row_abs else f"R[{ref.row}]"
    c = f"C{ref.col}" if ref.col_abs else f"C[{ref.col}]"
    return prefix + r + c


def _level(node: Node) -> int:
    if isinstance(node, BinaryOp):
        return BINARY_LEVELS[node.op]
    if isinstance(node, UnaryOp):
        return POSTFIX_LEVEL if node.op == "%" else PREFIX_LEVEL
    return ATOM_LEVEL


def _wrap(node: Node, need: int) -> str:
    text = _render(node)
    return f"({text})" if _level(node) < need else text


def _render(node: Node) -> str:
    if isinstance(node, Number):
        return node.text
    if isinstance(node, Text):
        return '"' + node.value.replace('"', '""') + '"'
    if isinstance(node, Bool):
        return "TRUE" if node.value else "FALSE"
    if isinstance(node, ErrorLit):
        return node.code
    if isinstance(node, CellRef):
        return _ref_text(node)
    if isinstance(node, RangeRef):
        return _ref_text(node.start) + ":" + _ref_text(node.end, with_sheet=False)
    if isinstance(node, OffsetRef):
        return _offset_text(node)
    if isinstance(node, OffsetRange):
        return _offset_text(node.start) + ":" + _offset_text(node.end)
    if isinstance(node, NameRef):
        return node.name
    if isinstance(node, FunctionCall):
        return node.name + "(" + ",".join(_render(a) for a in node.args) + ")"
    if isinstance(node, BinaryOp):
        level = BINARY_LEVELS[node.op]
        return _wrap(node.left, level) + node.op + _wrap(node.right, level + 1)
    if isinstance(node, UnaryOp):
        if node.op == "%":
            return _wrap(node.operand, POSTFIX_LEVEL) + "%"
        return node.op + _wrap(node.operand, PREFIX_LEVEL)
    if isinstance(node, Paren):
        return "(" + _render(node.inner) + ")"
    raise TypeError(f"not a formula node: {node!r}")


def render(ast: FormulaAst | Node) -> str:
    """Canonical formula text: upper-case names, no whitespace.

    Normalized trees render their references in R1C1 style, which is
    not parseable back; render them only for hashing and display.
    """
    root = ast.root if isinstance(ast, FormulaAst) else ast
    return "=" + _render(root)


# -- tree transforms -------------------------------------------------------

def _map(node: Node, fn) -> Node:
    """Rebuild ``node`` bottom-up, letting ``fn`` replace any subtree."""
    if isinstance(node, FunctionCall):
        node = FunctionCall(node.name, tuple(_map(a, fn) for a in node.args))
    elif isinstance(node, BinaryOp):
        node = BinaryOp(node.op, _map(node.left, fn), _map(node.right, fn))
    elif isinstance(node, UnaryOp):
        node = UnaryOp(node.op, _map(node.operand, fn))
    elif isinstance(node, Paren):
        node = Paren(_map(node.inner, fn))
    return fn(node)


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal, left to right."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, FunctionCall):
            stack.extend(reversed(cur.args))
        elif isinstance(cur, BinaryOp):
            stack.extend((cur.right, cur.left))
        elif isinstance(cur, (UnaryOp,)):
            stack.append(cur.operand)
        elif isinstance(cur, Paren):
            stack.append(cur.inner)


def _offset(ref: CellRef, host: CellAddr) -> OffsetRef:
    row = ref.row if ref.row_abs else ref.row - host.row
    col = ref.col if ref.col_abs else ref.col - host.col
    if not ref.row_abs and not 1 <= host.row + row <= MAX_ROW:
        raise OffsetOutOfGrid(f"row offset {row} from {host} leaves the grid")
    if not ref.col_abs and not 1 <= host.col + col <= MAX_COL:
        raise OffsetOutOfGrid(f"column offset {col} from {host} leaves the grid")
    sheet = ref.sheet.casefold() if ref.sheet is not None else None
    return OffsetRef(row, col, ref.row_abs, ref.col_abs, sheet)


def normalize(ast: FormulaAst, host: CellAddr) -> FormulaAst:
    """Rewrite references relative to ``host`` so copied formulas compare equal.

    Redundant parentheses are dropped and sheet qualifiers case-folded: both
    are presentation, not structure.
    """
    def fn(node):
        if isinstance(node, CellRef):
            return _offset(node, host)
        if isinstance(node, RangeRef):
            return OffsetRange(_offset(node.start, host), _offset(node.end, host))
        if isinstance(node, Paren):
            return node.inner
        return node

    return FormulaAst(_map(ast.root, fn))


def _shift(ref: CellRef, drow: int, dcol: int) -> CellRef:
    row = ref.row if ref.row_abs else ref.row + drow
    col = ref.col if ref.col_abs else ref.col + dcol
    if not (1 <= row <= MAX_ROW and 1 <= col <= MAX_COL):
        raise OffsetOutOfGrid(f"{_ref_text(ref)} shifted by ({drow},{dcol}) leaves the grid")
    return CellRef(row, col, ref.row_abs, ref.col_abs, ref.sheet)


def translate(ast: FormulaAst, drow: int, dcol: int) -> FormulaAst:
    """The formula as it reads after being copied ``drow`` rows and ``dcol`` columns."""
    def fn(node):
        if isinstance(node, CellRef):
            return _shift(node, drow, dcol)
        if isinstance(node, RangeRef):
            return RangeRef(_shift(node.start, drow, dcol), _shift(node.end, drow, dcol))
        return node

    return FormulaAst(_map(ast.root, fn))


# -- queries ---------------------------------------------------------------

class Target(NamedTuple):
    """A resolved reference: one cell when ``start == end``."""

    sheet: str | None
    start: CellAddr
    end: CellAddr

    @property
    def size(self) -> int:
        return (self.end.row - self.start.row + 1) * (self.end.col - self.start.col + 1)

    def cells(self) -> Iterator[CellAddr]:
        for r in range(self.start.row, self.end.row + 1):
            for c in range(self.start.col, self.end.col + 1):
                yield CellAddr(r, c)


def references(ast: FormulaAst, host: CellAddr | None = None) -> tuple[list[Target], list[str]]:
    """All cell/range targets in source order, plus the defined names used.

    Parsed references already carry absolute target coordinates, so ``host``
    only matters for normalized trees.
    """
    targets: list[Target] = []
    names: list[str] = []
    for node in walk(ast.root):
        if isinstance(node, CellRef):
            targets.append(Target(node.sheet, node.addr, node.addr))
        elif isinstance(node, RangeRef):
            a, b = node.start, node.end
            targets.append(Target(node.sheet, CellAddr(min(a.row, b.row), min(a.col, b.col)),
                                  CellAddr(max(a.row, b.row), max(a.col, b.col))))
        elif isinstance(node, (OffsetRef, OffsetRange)):
            if host is None:
                raise ValueError("normalized references need a host cell")
            ends = (node, node) if isinstance(node, OffsetRef) else (node.start, node.end)
            pts = [CellAddr(e.row if e.row_abs else host.row + e.row,
                            e.col if e.col_abs else host.col + e.col) for e in ends]
            targets.append(Target(ends[0].sheet, CellAddr(min(p.row for p in pts), min(p.col for p in pts)),
                                  CellAddr(max(p.row for p in pts), max(p.col for p in pts))))
        elif isinstance(node, NameRef):
            names.append(node.name)
    return targets, names


@dataclass(frozen=True)
class ComplexityMetrics:
    node_count: int
    depth: int
    function_count: int
    distinct_functions: int


def _children(node: Node) -> tuple:
    if isinstance(node, FunctionCall):
        return node.args
    if isinstance(node, BinaryOp):
        return (node.left, node.right)
    if isinstance(node, UnaryOp):
        return (node.operand,)
    if isinstance(node, Paren):
        return (node.inner,)
    return ()


def metrics(ast: FormulaAst) -> ComplexityMetrics:
    """Size measures of a formula; parentheses are not counted as nodes."""
    count = 0
    funcs: list[str] = []
    max_depth = 0
    stack = [(ast.root, 0)]
    while stack:
        node, d = stack.pop()
        if isinstance(node, Paren):
            stack.append((node.inner, d))
            continue
        d += 1
        count += 1
        max_depth = max(max_depth, d)
        if isinstance(node, FunctionCall):
            funcs.append(node.name)
        stack.extend((c, d) for c in _children(node))
    return ComplexityMetrics(count, max_depth, len(funcs), len(set(funcs)))


DEFAULT_ALLOW_LIST = frozenset(Decimal(v) for v in ("0", "1", "-1", "100"))
ARG_EXEMPT_FUNCTIONS = frozenset({"ROUND", "ROUNDUP", "ROUNDDOWN", "MOD", "POWER"})


def constant_literals(ast: FormulaAst, allow_list=DEFAULT_ALLOW_LIST,
                      exempt_function_args: bool = True) -> list[tuple[Decimal, tuple[int, ...]]]:
    """Numeric literals embedded in a formula, with their tree paths.

    A unary minus directly over a number counts as one negative literal.
    With ``exempt_function_args``, literals passed as non-first arguments of
    ROUND/ROUNDUP/ROUNDDOWN/MOD/POWER are skipped.
    """
    allow = {Decimal(v) for v in allow_list}
    found = []

    def visit(node, path, exempt):
        if isinstance(node, Number):
            value = node.value
        elif isinstance(node, UnaryOp) and node.op == "-" and isinstance(node.operand, Number):
            value = -node.operand.value
        else:
            for i, child in enumerate(_children(node)):
                arg_exempt = (exempt_function_args and isinstance(node, FunctionCall)
                              and node.name in ARG_EXEMPT_FUNCTIONS and i > 0)
                visit(child, path + (i,), arg_exempt)
            return
        if not exempt and value not in allow:
            found.append((value, path))

    visit(ast.root, (), False)
    return found
