import json

import pytest

from guardflow import guard as G
from guardflow.vfg import DEF, DIRECT, USE, GraphError, Node, ValueFlowGraph

p = G.lit(1)
A, B, C = Node("f", "a", 1), Node("f", "b", 2), Node("g", "c", 3)


@pytest.fixture
def graph():
    g = ValueFlowGraph()
    for n in (A, B, C):
        g.add_node(n, DEF)
    return g


class TestEdges:
    def test_parallel_edges_are_merged(self, graph):
        graph.upsert_edge(A, B, DIRECT, p)
        graph.upsert_edge(A, B, DIRECT, G.neg(p))
        assert graph.count() == 1
        assert graph.out_edges(A)[0].guard is G.TRUE

    def test_unsat_edges_are_pruned(self, graph):
        assert graph.upsert_edge(A, B, DIRECT, G.conj(p, G.neg(p))) is None
        assert graph.pruned == 1 and graph.count() == 0

    def test_site_distinguishes_edges(self, graph):
        graph.upsert_edge(A, C, "call", G.TRUE, 5)
        graph.upsert_edge(A, C, "call", G.TRUE, 6)
        assert graph.count("call") == 2

    def test_unknown_kind(self, graph):
        with pytest.raises(GraphError):
            graph.upsert_edge(A, B, "sideways", G.TRUE)

    def test_frozen_graph_rejects_edges(self, graph):
        graph.freeze()
        with pytest.raises(GraphError):
            graph.upsert_edge(A, B, DIRECT, G.TRUE)

    def test_node_kind_conflict(self, graph):
        with pytest.raises(GraphError):
            graph.add_node(A, USE)


class TestExport:
    def test_json_shape(self, graph):
        graph.upsert_edge(A, B, DIRECT, p)
        data = json.loads(graph.export("json"))
        assert data["edges"] == [{"src": "f:a@1", "dst": "f:b@2", "kind": "direct", "guard": "p1"}]
        assert [n["value"] for n in data["nodes"]] == ["a", "b", "c"]

    def test_dot_lists_edges(self, graph):
        graph.upsert_edge(B, C, "return", p, 9)
        dot = graph.export("dot")
        assert dot.startswith("digraph vfg {")
        assert '"f:b@2" -> "g:c@3" [kind=return site=9 label="p1"];' in dot

    def test_insertion_order_does_not_matter(self):
        one, two = ValueFlowGraph(), ValueFlowGraph()
        for n in (A, B, C):
            one.add_node(n, DEF)
        for n in (C, B, A):
            two.add_node(n, DEF)
        one.upsert_edge(A, B, DIRECT, p)
        one.upsert_edge(B, C, DIRECT, G.TRUE)
        two.upsert_edge(B, C, DIRECT, G.TRUE)
        two.upsert_edge(A, B, DIRECT, p)
        assert one.export("dot") == two.export("dot")
        assert one.export("json") == two.export("json")

    def test_bad_format(self, graph):
        with pytest.raises(ValueError):
            graph.export("svg")


def test_merge_combines_graphs(graph):
    other = ValueFlowGraph()
    other.add_node(A, DEF)
    other.add_node(B, DEF)
    other.upsert_edge(A, B, DIRECT, p)
    graph.upsert_edge(A, B, DIRECT, G.neg(p))
    graph.merge(other)
    assert graph.out_edges(A)[0].guard is G.TRUE
