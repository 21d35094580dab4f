"""Per-function analysis: store propagation, load walks and the graph."""
import pytest

from guardflow import guard as G
from guardflow.config import AnalysisConfig
from guardflow.pipeline import analyze_text
from guardflow.vfg import DEF, IN, PARAM, USE, Node

from conftest import analyze_corpus

c1 = G.lit(1)


def incoming(a, func, value, label):
    node = Node(func, value, label)
    return {(str(e.src), str(e.guard)) for e in a.graph.in_edges(node)}


@pytest.fixture(scope="module")
def sparse():
    return analyze_corpus("sparse")


class TestSparseDiamond:
    def test_branch_stores(self, sparse):
        st = sparse.functions["sparse"].store.to_json()
        assert st["b2"] == {"alloc_m": [["p1", 4, "d", True]]}
        assert st["b3"] == {"alloc_n": [["!p1", 5, "d", True]]}

    def test_join_block_gets_frontier_copies(self, sparse):
        st = sparse.functions["sparse"].store.to_json()
        assert st["b4"] == {"alloc_m": [["p1", 4, "d", False]], "alloc_n": [["!p1", 5, "d", False]]}

    def test_load_walks_two_blocks(self, sparse):
        assert sparse.functions["sparse"].load_visits == {6: 2}

    def test_older_entry_is_masked(self, sparse):
        assert incoming(sparse, "sparse", "f", 6) == {("sparse:d@4", "p1"), ("sparse:c@3", "!p1")}

    def test_use_nodes_for_stores(self, sparse):
        kinds = sparse.graph.nodes
        assert kinds[Node("sparse", "d", 4)] == USE
        assert kinds[Node("sparse", "d", 0)] == PARAM


class TestUpdates:
    def test_strong_update_kills_older_value(self):
        a = analyze_text("func f(a, b) {\nentry:\n  x = alloc\n  store x, a\n  store x, b\n  y = load x\n  ret y\n}")
        assert incoming(a, "f", "y", 4) == {("f:b@3", "true")}

    def test_loop_allocation_keeps_both_entries_but_masks_at_load(self):
        text = (
            "func f(a, b) {\nentry:\n  while (k) {\n    x = alloc\n    store x, a\n    store x, b\n"
            "    y = load x\n  }\n  ret\n}"
        )
        a = analyze_text(text, AnalysisConfig(unroll=1))
        fa = a.functions["f"]
        body = next(per for b, per in sorted(fa.store.to_json().items()) if "alloc_l1" in per)
        assert [e[1:] for e in body["alloc_l1"]] == [[3, "b", False], [2, "a", False]]
        # the newer unconditional entry masks the older one
        assert {s for s, _ in incoming(a, "f", "y", 4)} == {"f:b@3"}

    def test_guarded_write_to_one_object_is_weak_in_the_join(self):
        text = (
            "func f(a, b) {\nentry:\n  x = alloc\n  store x, a\n  br (c) t e\nt:\n  store x, b\n  jmp j\n"
            "e:\n  jmp j\nj:\n  y = load x\n  ret y\n}"
        )
        a = analyze_text(text)
        assert incoming(a, "f", "y", 4) == {("f:b@3", "p1"), ("f:a@2", "!p1")}

    def test_input_content_is_read_lazily(self):
        a = analyze_text("func f(p) {\nentry:\n  y = load p\n  ret y\n}")
        assert a.graph.nodes[Node("f", "*p", 0)] == IN
        assert incoming(a, "f", "y", 1) == {("f:*p@0", "true")}


class TestEconomy:
    def test_fig1_merges_edges(self):
        fa = analyze_corpus("fig1").functions["main"]
        assert (fa.merged_load_edges, fa.unmerged_load_edges) == (4, 8)

    @pytest.mark.parametrize("name", ["fig1", "fig2", "sparse", "loop", "rec", "wrap", "twice", "complement"])
    def test_merged_never_exceeds_unmerged(self, name):
        for fa in analyze_corpus(name).functions.values():
            assert fa.merged_load_edges <= fa.unmerged_load_edges


class TestPathInsensitive:
    def test_every_guard_is_true(self):
        a = analyze_corpus("fig1", path_insensitive=True)
        assert {e.guard for e in a.graph.edges.values()} == {G.TRUE}

    def test_fig1_edges_lose_their_conditions(self):
        a = analyze_corpus("fig1")
        guards = {str(e.guard) for e in a.graph.edges.values()}
        assert "p2" in guards or "!p2" in guards


def test_definitions_are_def_nodes():
    a = analyze_corpus("fig1")
    defs = {n.value for n, k in a.graph.nodes.items() if k == DEF}
    assert {"o1", "o2", "a", "b", "c", "x", "y", "d", "e"} <= defs
