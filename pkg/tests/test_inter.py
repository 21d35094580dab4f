"""Call graph, summaries and their instantiation at call sites."""
import json

import pytest

from guardflow import guard as G
from guardflow.inter import build_call_graph, instance_name
from guardflow.ir import SemanticError, parse
from guardflow.pipeline import analyze_text
from guardflow.vfg import AUX, CALL, INST, RETURN, SUMMARY, Node

from conftest import analyze_corpus, corpus_text

p1 = G.lit(1)


@pytest.fixture(scope="module")
def fig2():
    return analyze_corpus("fig2")


class TestCallGraph:
    def test_levels_and_roots(self, fig2):
        cg = fig2.callgraph
        assert cg.level == {"foo": 0, "bar": 1, "qux": 1}
        assert sorted(cg.roots) == ["bar", "qux"]
        assert cg.topo_order[0] == "foo"
        assert cg.depth() == 2

    def test_nested_depth(self):
        assert analyze_corpus("wrap").callgraph.depth() == 3

    def test_cycle_is_rejected_without_unrolling(self):
        with pytest.raises(SemanticError, match="recursive"):
            build_call_graph(parse(corpus_text("rec")))

    def test_reach_condition_of_guarded_call(self):
        text = (
            "func g() {\nentry:\n  ret\n}\n"
            "func f() {\nentry:\n  br (c) t e\nt:\n  call g()\n  jmp j\ne:\n  jmp j\nj:\n  ret\n}"
        )
        a = analyze_text(text)
        assert a.reach["f"] is G.TRUE
        assert a.reach["g"] is G.lit(1)


class TestFooSummary:
    def test_single_aux_variable(self, fig2):
        s = fig2.summaries["foo"]
        assert len(s.aux) == 1
        (r,) = s.aux
        assert r.name == "$R1" and r.source == "y"

    def test_aux_bindings(self, fig2):
        (r,) = fig2.summaries["foo"].aux
        got = {(label, v): g for g, label, v in r.content}
        assert set(got) == {(2, "c"), (3, "a")}
        assert G.equivalent(got[(2, "c")], p1)
        assert G.equivalent(got[(3, "a")], G.neg(p1))

    def test_post_summary_shape(self, fig2):
        shape = fig2.summaries["foo"].shape()
        assert shape["y"]["env"] == [["true", "o_y"]]
        assert shape["y"]["store"]["o_y"] == [["true", 4, "$R1"]]

    def test_summary_edge_from_formal_in(self, fig2):
        edges = fig2.summaries["foo"].summary_edges
        assert [(str(e.src), str(e.dst), str(e.guard)) for e in edges] == [("foo:a@0", "foo:$R1@4", "!p1")]

    def test_json_round_trip(self, fig2):
        data = json.loads(fig2.summaries["foo"].to_json())
        assert data["function"] == "foo"
        assert data["aux"][0]["content"] == [["p1", 2, "c"], ["!p1", 3, "a"]]

    def test_no_return_value(self, fig2):
        s = fig2.summaries["foo"]
        assert s.ret_node is None and s.ret_env == {}


class TestInstantiation:
    def test_one_instance_per_call_site(self, fig2):
        insts = sorted(str(n) for n, k in fig2.graph.nodes.items() if k == INST)
        assert insts == ["bar:foo.R1@7@7", "qux:foo.R1@14@14"]
        assert instance_name("foo", "$R1", 7) == "foo.R1@7"

    def test_bind_edges_carry_the_call_label(self, fig2):
        binds = {(str(e.src), str(e.dst), e.site) for e in fig2.graph.edges.values() if e.kind in (CALL, RETURN)}
        assert ("bar:x@5", "foo:y@0", 7) in binds
        assert ("foo:$R1@4", "qux:foo.R1@14@14", 14) in binds

    def test_load_after_call_reads_the_instance(self, fig2):
        preds = [str(e.src) for e in fig2.graph.in_edges(Node("qux", "m", 15))]
        assert preds == ["qux:foo.R1@14@14"]

    def test_aux_node_kind(self, fig2):
        assert fig2.graph.nodes[Node("foo", "$R1", 4)] == AUX
        assert fig2.graph.count(SUMMARY) == 1

    def test_returned_pointer_flows_to_receiver(self):
        text = (
            "func mk() {\nentry:\n  o = alloc\n  ret o\n}\n"
            "func main() {\nentry:\n  x = call mk()\n  free x\n  ret\n}"
        )
        a = analyze_text(text)
        srcs = {str(e.src) for e in a.graph.in_edges(Node("main", "x", 3))}
        assert srcs == {"mk:$ret@2"}
