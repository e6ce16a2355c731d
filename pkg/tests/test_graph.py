import random

import pytest

from sheetcert import graph as gr
from sheetcert.graph import DepGraph, build, direct_dependents, find_cycles, reading_order_breaches
from sheetcert.model import SheetAddr
from conftest import wb_from
from graph_oracle import brute_cycles, random_graph, node


def sa(sheet, a1):
    from sheetcert.model import addr_from_a1
    return SheetAddr(sheet, addr_from_a1(a1).addr)


def test_build_edges_and_multi_edges():
    wb = wb_from("!sheet S\nA1: 1\nB1: =A1+A1\nC1: =SUM(A1:B1)\n")
    g = build(wb)
    assert g.edges[sa("S", "B1")] == [sa("S", "A1"), sa("S", "A1")]
    assert g.successors(sa("S", "B1")) == {sa("S", "A1")}
    assert g.successors(sa("S", "C1")) == {sa("S", "A1"), sa("S", "B1")}
    assert g.edge_count == 4


def test_direct_dependents_dedup():
    wb = wb_from("!sheet S\nA1: 1\nB1: =A1+A1\nC1: =A1*2\n")
    assert direct_dependents(build(wb), sa("S", "A1")) == {sa("S", "B1"), sa("S", "C1")}


def test_cross_sheet_resolution_case_insensitive():
    wb = wb_from("!sheet Data\nA1: 1\n!sheet Calc\nA1: =data!A1\n")
    assert build(wb).successors(sa("Calc", "A1")) == {sa("Data", "A1")}


def test_names_recorded_not_resolved():
    wb = wb_from("!sheet S\nA1: =rate*2\n")
    g = build(wb)
    assert g.names[sa("S", "A1")] == ["rate"]
    assert g.successors(sa("S", "A1")) == frozenset()


def test_range_budget():
    wb = wb_from("!sheet S\nA1: =SUM(B1:C100)\n")
    with pytest.raises(gr.RangeTooLarge):
        build(wb, cell_budget=100)


def test_cycle_examples():
    wb = wb_from("!sheet S\nA1: =B1\nB1: =A1\nC1: =C1\nD1: =A1\n")
    cycles = find_cycles(build(wb))
    assert [c.members for c in cycles] == [(sa("S", "A1"), sa("S", "B1")), (sa("S", "C1"),)]


def test_acyclic():
    wb = wb_from("!sheet S\nA1: 1\nA2: =A1\nA3: =A2+A1\n")
    assert find_cycles(build(wb)) == []


def test_long_chain_does_not_recurse():
    n = 5000
    edges = {node(i): [node(i + 1)] for i in range(n)}
    edges[node(n)] = [node(0)]
    cycles = find_cycles(DepGraph.from_edges(edges, {"s": 0}))
    assert len(cycles) == 1 and len(cycles[0].members) == n + 1


def test_cycles_match_brute_force():
    rng = random.Random(20240601)
    for _ in range(1000):
        g = random_graph(rng)
        assert {frozenset(c.members) for c in find_cycles(g)} == brute_cycles(g)


def test_every_edge_inside_a_cycle_matters():
    """Removing an internal edge never grows a reported cycle."""
    rng = random.Random(7)
    for _ in range(200):
        g = random_graph(rng, max_nodes=8)
        for c in find_cycles(g):
            members = set(c.members)
            for src in c.members:
                for dst in g.successors(src):
                    if dst not in members:
                        continue
                    edges = {k: [v for v in vs if not (k == src and v == dst)] for k, vs in g.edges.items()}
                    reduced = {frozenset(x.members) for x in find_cycles(DepGraph.from_edges(edges))}
                    assert all(not (m > members) for m in reduced)


def test_reading_order():
    wb = wb_from("!sheet S\nA1: =A2\nB2: =A2\nA2: 1\nC2: =D2\nD2: 2\n")
    breaches = reading_order_breaches(build(wb), wb)
    assert breaches == [(sa("S", "A1"), sa("S", "A2")), (sa("S", "C2"), sa("S", "D2"))]
    relaxed = reading_order_breaches(build(wb), wb, same_row_right_is_breach=False)
    assert relaxed == [(sa("S", "A1"), sa("S", "A2"))]


def test_reading_order_cross_sheet_and_exempt():
    wb = wb_from("!sheet A\nA1: =B!A1\nA2: =B!A2\n!sheet B\nA1: 1\nA2: =A!A1\n")
    g = build(wb)
    assert reading_order_breaches(g, wb) == [(sa("A", "A1"), sa("B", "A1")), (sa("A", "A2"), sa("B", "A2"))]
    assert reading_order_breaches(g, wb, exempt={sa("A", "A1")}) == [(sa("A", "A2"), sa("B", "A2"))]


def test_unknown_sheet_ignored():
    wb = wb_from("!sheet A\nA1: =Missing!A1\n")
    assert reading_order_breaches(build(wb), wb) == []
