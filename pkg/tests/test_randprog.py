import pytest

from guardflow.inter import build_call_graph
from guardflow.ir import parse
from guardflow.randprog import GenConfig, corpus, generate, soundy_violations


class TestGenerator:
    def test_same_seed_same_text(self):
        assert generate(7) == generate(7)
        assert generate(7) != generate(8)

    @pytest.mark.parametrize("seed", range(40))
    def test_bounds(self, seed):
        cfg = GenConfig()
        prog = parse(generate(seed, cfg))
        assert len(prog.atoms.atoms) <= cfg.max_atoms
        assert len(prog.functions) <= cfg.max_functions
        assert sum(len(list(f.statements())) for f in prog.functions.values()) <= cfg.max_statements
        for f in prog.functions.values():
            assert not f.has_loops()

    @pytest.mark.parametrize("seed", range(40))
    def test_calls_go_downwards(self, seed):
        cg = build_call_graph(parse(generate(seed)))
        for f, calls in cg.callees.items():
            for _, g in calls:
                assert int(g[1:]) > int(f[1:])

    def test_smaller_config(self):
        cfg = GenConfig(max_atoms=2, max_functions=1, max_statements=8)
        for seed in range(20):
            prog = parse(generate(seed, cfg))
            assert len(prog.functions) == 1
            assert len(prog.atoms.atoms) <= 2


class TestCorpus:
    def test_deterministic(self):
        a = [(s, p.max_label) for s, p in corpus(10, seed=3)]
        b = [(s, p.max_label) for s, p in corpus(10, seed=3)]
        assert a == b

    def test_members_satisfy_assumptions(self):
        for _, prog in corpus(15):
            assert soundy_violations(prog) == []

    def test_fixture_size(self, random_corpus):
        assert len(random_corpus) == 200
        assert len({s for s, _ in random_corpus}) == 200
