"""Demand queries: slices, alias pairs, dependences and double frees."""
import pytest

from guardflow import guard as G
from guardflow.pipeline import analyze_text
from guardflow.query import (
    FULL, SEMI, QueryEngine, QueryError, answer_alias_pairs, check_double_free, find_node, thin_slice,
)
from guardflow.vfg import Node

from conftest import analyze_corpus

p2 = G.lit(2)


@pytest.fixture(scope="module")
def fig1():
    return analyze_corpus("fig1")


class TestFig1:
    def test_alias_pairs_of_e(self, fig1):
        pairs = dict(answer_alias_pairs(fig1, find_node(fig1, "e@12")))
        assert set(pairs) == {Node("main", "a", 3), Node("main", "c", 5)}
        assert G.equivalent(pairs[Node("main", "a", 3)], G.neg(p2))
        assert G.equivalent(pairs[Node("main", "c", 5)], p2)

    def test_no_double_free(self, fig1):
        assert check_double_free(fig1) == []

    def test_path_insensitive_reports_one(self):
        reports = check_double_free(analyze_corpus("fig1", path_insensitive=True))
        assert [(r.first_free, r.second_free) for r in reports] == [(13, 14)]
        assert reports[0].condition is G.TRUE

    def test_thin_slice_of_e(self, fig1):
        res = thin_slice(fig1, find_node(fig1, "e@12"))
        assert res.producers == {3, 5, 9, 10, 12}
        assert res.visited_paths == 2
        assert res.format() == "SLICE main:e@12 -> 3,5,9,10,12"

    def test_forward_reach_from_a(self, fig1):
        q = QueryEngine(fig1)
        reached = q.reached(Node("main", "a", 3))
        assert Node("main", "e", 12) in reached
        assert G.equivalent(reached[Node("main", "e", 12)], G.neg(p2))


class TestReports:
    def test_unconditional_double_free(self):
        (r,) = check_double_free(analyze_corpus("twice"))
        assert (r.first_free, r.second_free, str(r.condition)) == (3, 4, "true")
        assert r.format("x.ir") == "DF x.ir:3 x.ir:4 cond=true trace=1,2"

    def test_complementary_comparisons(self):
        assert check_double_free(analyze_corpus("complement")) == []
        assert len(check_double_free(analyze_corpus("complement", path_insensitive=True))) == 1

    def test_guarded_report_through_recursion(self):
        (r,) = check_double_free(analyze_corpus("rec"))
        assert (r.first_free, r.second_free) == (11, 12)
        assert r.condition is G.neg(G.lit(1))

    def test_exclusive_frees_across_calls(self):
        assert check_double_free(analyze_corpus("fig2")) == []
        assert check_double_free(analyze_corpus("wrap")) == []

    def test_free_in_callee_and_caller(self):
        text = (
            "func rel(p) {\nentry:\n  free p\n  ret\n}\n"
            "func main() {\nentry:\n  x = alloc\n  call rel(x)\n  free x\n  ret\n}"
        )
        (r,) = check_double_free(analyze_text(text))
        assert (r.first_free, r.second_free) == (1, 5)

    def test_same_callee_twice(self):
        text = (
            "func rel(p) {\nentry:\n  free p\n  ret\n}\n"
            "func main() {\nentry:\n  x = alloc\n  call rel(x)\n  call rel(x)\n  ret\n}"
        )
        # one free statement reached under two different call stacks
        (r,) = check_double_free(analyze_text(text))
        assert (r.first_free, r.second_free) == (1, 1)

    @pytest.mark.parametrize("mode", [SEMI, FULL])
    def test_semi_reports_superset(self, mode):
        a = analyze_corpus("fig1")
        full = {(r.first_free, r.second_free) for r in check_double_free(a, FULL)}
        got = {(r.first_free, r.second_free) for r in check_double_free(a, mode)}
        assert full <= got


class TestDependence:
    def test_pairs_cross_calls(self):
        a = analyze_corpus("fig2")
        pairs = {(str(s), str(d)) for s, d in QueryEngine(a).dependence_pairs()}
        assert ("qux:a2@13", "qux:m@15") in pairs
        assert ("bar:a@6", "bar:n@8") in pairs

    def test_slice_through_summary(self):
        a = analyze_corpus("fig2")
        assert thin_slice(a, find_node(a, "qux:m@15")).producers == {1, 2, 3, 13, 15}


class TestFindNode:
    def test_qualified(self, fig1):
        assert find_node(fig1, "main:x@6") == Node("main", "x", 6)

    @pytest.mark.parametrize("seed", ["x", "x@seven", "nope@3", "other:x@6"])
    def test_errors(self, fig1, seed):
        with pytest.raises(QueryError):
            find_node(fig1, seed)

    def test_stored_value_prefers_definition(self, fig1):
        assert find_node(fig1, "b@4") == Node("main", "b", 4)


def test_unknown_mode(fig1):
    with pytest.raises(QueryError):
        QueryEngine(fig1, "exact")
