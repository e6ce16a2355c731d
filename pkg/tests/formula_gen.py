"""Hypothesis strategies producing grammar-valid formula text.

Each generated fragment carries the number of cell/range reference tokens
it contains, counted at generation time.
"""
from hypothesis import strategies as st

from sheetcert.model import col_to_letters

NAMES = ["tax_rate", "Growth.Pct", "_total", "Discount"]
FUNCS = ["SUM", "IF", "round", "Max", "AVERAGE", "NOW", "_xlfn.XLOOKUP"]
SHEETS = [None, "Sheet2", "My Sheet", "O'Brien"]
BINOPS = ["+", "-", "*", "/", "^", "&", "=", "<>", "<", "<=", ">", ">="]


def _sheet_prefix(sheet):
    if sheet is None:
        return ""
    if sheet.replace("_", "").isalnum() and not sheet[0].isdigit():
        return sheet + "!"
    return "'" + sheet.replace("'", "''") + "'!"


@st.composite
def cell_ref(draw, max_row=60, max_col=30):
    row = draw(st.integers(1, max_row))
    col = draw(st.integers(1, max_col))
    return (("$" if draw(st.booleans()) else "") + col_to_letters(col)
            + ("$" if draw(st.booleans()) else "") + str(row))


@st.composite
def leaf(draw):
    kind = draw(st.sampled_from(["num", "num", "str", "bool", "err", "ref", "ref", "range", "name"]))
    if kind == "num":
        text = draw(st.sampled_from(["0", "1", "2.5", "100", "0.05", "1E3", ".5", "42"]))
        return text, 0
    if kind == "str":
        return '"' + draw(st.sampled_from(["", "abc", 'say ""hi""', "x y"])) + '"', 0
    if kind == "bool":
        return draw(st.sampled_from(["TRUE", "false"])), 0
    if kind == "err":
        return draw(st.sampled_from(["#REF!", "#DIV/0!", "#N/A", "#NAME?", "#VALUE!", "#NUM!", "#NULL!"])), 0
    if kind == "name":
        return draw(st.sampled_from(NAMES)), 0
    prefix = _sheet_prefix(draw(st.sampled_from(SHEETS)))
    if kind == "ref":
        return prefix + draw(cell_ref()), 1
    return prefix + draw(cell_ref()) + ":" + draw(cell_ref()), 1


def _combine(children):
    def ws(draw):
        return draw(st.sampled_from(["", "", " "]))

    @st.composite
    def binary(draw):
        (a, na), (b, nb) = draw(children), draw(children)
        return a + ws(draw) + draw(st.sampled_from(BINOPS)) + ws(draw) + b, na + nb

    @st.composite
    def unary(draw):
        a, n = draw(children)
        if draw(st.booleans()):
            return draw(st.sampled_from(["-", "+"])) + a, n
        return a + "%", n

    @st.composite
    def paren(draw):
        a, n = draw(children)
        return "(" + a + ")", n

    @st.composite
    def call(draw):
        args = draw(st.lists(children, min_size=0, max_size=3))
        name = draw(st.sampled_from(FUNCS))
        return name + "(" + ",".join(a for a, _ in args) + ")", sum(n for _, n in args)

    return st.one_of(binary(), unary(), paren(), call())


def expression():
    return st.recursive(leaf(), _combine, max_leaves=12)


@st.composite
def formula_text(draw):
    body, refs = draw(expression())
    return "=" + body, refs
