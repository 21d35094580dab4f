import pytest

from guardflow.inline import equivalence_mismatches, inline_program
from guardflow.ir import Call, parse, pretty
from guardflow.vfg import Node

from conftest import CORPUS, corpus_text


class TestInliner:
    def test_only_roots_remain(self):
        flat, _ = inline_program(parse(corpus_text("fig2")))
        assert sorted(flat.functions) == ["bar", "qux"]
        for f in flat.functions.values():
            assert not any(isinstance(s, Call) for _, s in f.statements())

    def test_copies_map_back(self):
        flat, node_map = inline_program(parse(corpus_text("fig2")))
        targets = {n for n in node_map.values() if n.func == "foo"}
        assert Node("foo", "c", 1) in targets
        assert all(k.func in ("bar", "qux") for k in node_map)

    def test_nested_calls_are_flattened(self):
        flat, _ = inline_program(parse(corpus_text("wrap")))
        assert list(flat.functions) == ["main"]
        text = pretty(flat)
        assert text.count("free") == 2

    def test_result_reparses(self):
        flat, _ = inline_program(parse(corpus_text("wrap")))
        assert pretty(parse(pretty(flat))) == pretty(flat)


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.ir")), ids=lambda p: p.stem)
def test_corpus_equivalence(path):
    assert equivalence_mismatches(parse(path.read_text())) == []


def test_random_equivalence(random_corpus):
    checked = 0
    for seed, prog in random_corpus[:60]:
        assert equivalence_mismatches(prog) == [], f"seed {seed}"
        checked += 1
    assert checked == 60
