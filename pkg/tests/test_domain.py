import json

import pytest

from guardflow import guard as G
from guardflow.domain import (
    AbstractStore, MemObject, PointsToEnv, StoreEntry, dump_state, join_env, pi_env, pi_store,
)

p, q = G.lit(1), G.lit(2)


@pytest.fixture
def objs():
    return MemObject("alloc_l1", "alloc", True, 1), MemObject("alloc_l2", "alloc", False, 2)


class TestEnvironment:
    def test_one_entry_per_object(self, objs):
        o1, _ = objs
        env = PointsToEnv()
        env.add("x", o1, p)
        env.add("x", o1, G.neg(p))
        assert env.get("x") == {o1: G.TRUE}

    def test_false_guards_are_not_recorded(self, objs):
        o1, _ = objs
        env = PointsToEnv()
        env.add("x", o1, G.conj(p, G.neg(p)))
        assert env.get("x") == {}

    def test_restriction_drops_dead_entries(self, objs):
        o1, o2 = objs
        out = pi_env({o1: p, o2: G.neg(p)}, p)
        assert out == {o1: p}

    def test_restriction_by_true_is_identity(self, objs):
        o1, o2 = objs
        entries = {o1: p, o2: q}
        assert pi_env(entries, G.TRUE) == entries

    def test_join_disjoins_shared_objects(self, objs):
        o1, o2 = objs
        out = join_env({o1: p}, {o1: G.neg(p), o2: q})
        assert out == {o1: G.TRUE, o2: q}


class TestStore:
    def test_newest_first(self, objs):
        o1, _ = objs
        st = AbstractStore()
        st.insert("b", o1, StoreEntry(p, 3, "a"))
        st.insert("b", o1, StoreEntry(q, 4, "c"))
        assert [e.label for e in st.entries("b", o1)] == [4, 3]

    def test_strong_entry_replaces_list(self, objs):
        o1, _ = objs
        st = AbstractStore()
        st.insert("b", o1, StoreEntry(p, 3, "a"))
        st.insert("b", o1, StoreEntry(G.TRUE, 5, "c", strong=True))
        assert st.entries("b", o1) == [StoreEntry(G.TRUE, 5, "c", True)]

    def test_repeated_write_merges_guards(self, objs):
        o1, _ = objs
        st = AbstractStore()
        st.insert("b", o1, StoreEntry(p, 3, "a"))
        st.insert("b", o1, StoreEntry(G.neg(p), 3, "a"))
        assert st.entries("b", o1) == [StoreEntry(G.TRUE, 3, "a")]

    def test_pi_store(self):
        out = pi_store([StoreEntry(p, 1, "a"), StoreEntry(G.neg(p), 2, "b")], p)
        assert [e.label for e in out] == [1]

    def test_objects_sorted_and_unique(self, objs):
        o1, o2 = objs
        st = AbstractStore()
        st.insert("b2", o2, StoreEntry(p, 1, "a"))
        st.insert("b1", o1, StoreEntry(p, 1, "a"))
        st.insert("b1", o2, StoreEntry(p, 1, "a"))
        assert st.objects() == [o1, o2]

    def test_dump_shape(self, objs):
        o1, _ = objs
        env, st = PointsToEnv(), AbstractStore()
        env.add("x", o1, p)
        st.insert("b", o1, StoreEntry(G.neg(p), 7, "v"))
        data = json.loads(dump_state(env, st))
        assert data == {"env": {"x": [["p1", "alloc_l1"]]}, "store": {"b": {"alloc_l1": [["!p1", 7, "v", False]]}}}


def test_objects_compare_by_name():
    a = MemObject("in(p)", "input", False)
    b = MemObject("in(p)", "inst", True, 4)
    assert a == b and hash(a) == hash(b)
    assert a.instantiate(9).name == "in(p)@l9"
