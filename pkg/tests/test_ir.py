import pytest

from guardflow import guard as G
from guardflow.cfg import analyze_cfg, gate_phis
from guardflow.ir import (
    Alloc, Branch, Call, ParseError, Phi, SemanticError, Store, parse, pretty,
)
from guardflow.unroll import unroll

from conftest import CORPUS, corpus_text

DIAMOND = """
func f(p) {
entry:
  x = alloc
  br (c) t e
t:
  y = alloc
  jmp j
e:
  jmp j
j:
  z = phi [t: y] [e: x]
  store p, z
  ret z
}
"""


class TestParser:
    def test_labels_follow_file_order(self):
        prog = parse(DIAMOND)
        labels = [s.label for _, s in prog.functions["f"].statements()]
        assert labels == [1, 2, 3, 4]
        assert prog.functions["f"].ret.label == 5

    def test_statement_kinds(self):
        f = parse(DIAMOND).functions["f"]
        kinds = [type(s) for _, s in f.statements()]
        assert kinds == [Alloc, Alloc, Phi, Store]
        assert isinstance(f.blocks["entry"].term, Branch)

    def test_one_line_function(self):
        prog = parse("func f(a){entry: ret a}")
        assert prog.functions["f"].return_value == "a"

    def test_implicit_entry_block(self):
        prog = parse("func f() {\n  x = alloc\n  ret x\n}")
        assert prog.functions["f"].entry == "entry"

    def test_comments_ignored(self):
        prog = parse("# top\nfunc f() {  # header\nentry:\n  ret # done\n}")
        assert prog.functions["f"].ret.value is None

    def test_call_without_receiver(self):
        prog = parse("func g(a) {\nentry:\n  ret\n}\nfunc f() {\nentry:\n  x = alloc\n  call g(x)\n  ret\n}")
        (_, s), = [(b, s) for b, s in prog.functions["f"].statements() if isinstance(s, Call)]
        assert s.dst is None and s.args == ("x",)

    def test_comparison_atoms_are_paired(self):
        prog = parse(corpus_text("complement"))
        conds = [b.term for b in prog.functions["main"].blocks.values() if isinstance(b.term, Branch)]
        assert conds[0].atom == conds[1].atom
        assert conds[0].positive != conds[1].positive

    def test_parse_error_position(self):
        with pytest.raises(ParseError) as info:
            parse("func f( {")
        assert (info.value.line, info.value.col) == (1, 9)

    @pytest.mark.parametrize("path", sorted(CORPUS.glob("*.ir")), ids=lambda p: p.stem)
    def test_pretty_round_trip(self, path):
        prog = parse(path.read_text())
        again = parse(pretty(prog))
        assert pretty(again) == pretty(prog)


class TestValidation:
    @pytest.mark.parametrize(
        "body,message",
        [
            ("entry:\n  y = x\n  ret", "undefined"),
            ("entry:\n  x = alloc\n  x = alloc\n  ret", "duplicate"),
            ("entry:\n  br (c) r nowhere\nr:\n  ret", "unknown block"),
            ("entry:\n  br (c) b entry\nb:\n  ret", "predecessor"),
            ("entry:\n  ret\nlost:\n  ret", "return"),
            ("entry:\n  x = call nope()\n  ret", "unknown call target"),
            ("entry:\n  br (c) a b\na:\n  y = alloc\n  jmp j\nb:\n  jmp j\nj:\n  ret y", "dominate"),
            ("entry:\n  x = alloc\n  store x, x\n  z = phi [entry: x]\n  ret", "phi"),
            ("entry:\n  while (c) {\n    y = alloc\n  }\n  ret y", "loop"),
        ],
    )
    def test_rejects(self, body, message):
        with pytest.raises(SemanticError, match=message):
            parse("func f() {\n" + body + "\n}")

    def test_arity_mismatch(self):
        with pytest.raises(SemanticError, match="arity"):
            parse("func g(a) {\nentry:\n  ret\n}\nfunc f() {\nentry:\n  x = call g()\n  ret\n}")

    def test_keyword_is_not_a_value(self):
        with pytest.raises(ParseError):
            parse("func f() {\nentry:\n  alloc = alloc\n  ret\n}")


class TestCfg:
    def test_dominators_and_frontiers(self):
        f = parse(DIAMOND).functions["f"]
        dom = analyze_cfg(f)
        assert dom.idom == {"entry": None, "t": "entry", "e": "entry", "j": "entry"}
        assert dom.frontier["t"] == {"j"} and dom.frontier["e"] == {"j"}
        assert dom.iterated_frontier["entry"] == frozenset()
        assert dom.dom_path("j") == ["j", "entry"]
        assert dom.depth["entry"] == 1

    def test_block_guards(self):
        prog = parse(DIAMOND)
        dom = analyze_cfg(prog.functions["f"])
        c = G.lit(1)
        assert dom.block_guard["t"] is c
        assert dom.block_guard["e"] is G.neg(c)
        assert dom.block_guard["j"] is G.TRUE

    def test_phi_gates(self):
        f = parse(DIAMOND).functions["f"]
        gated = gate_phis(f, analyze_cfg(f))
        phi = next(s for _, s in gated.statements() if isinstance(s, Phi))
        assert phi.gates == (G.lit(1), G.neg(G.lit(1)))

    def test_sparse_figure_guards(self):
        f = parse(corpus_text("sparse")).functions["sparse"]
        dom = analyze_cfg(f)
        assert dom.iterated_frontier["b2"] == {"b4"}
        assert dom.iterated_frontier["b3"] == {"b4"}
        assert dom.idom["b4"] == "b1"


class TestUnroll:
    LOOP = "func f(p) {\nentry:\n  x = alloc\n  while (k > 0) {\n    y = load p\n    store p, x\n  }\n  ret x\n}"

    def test_loop_replicas_keep_origin(self):
        prog = unroll(parse(self.LOOP), k=3)
        stmts = [s for _, s in prog.functions["f"].statements()]
        loads = [s for s in stmts if s.__class__.__name__ == "Load"]
        assert len(loads) == 3
        assert {s.site for s in loads} == {2}
        assert loads[0].label == 2  # the first replica keeps its label
        assert len({s.dst for s in loads}) == 3

    def test_unrolled_program_is_acyclic_and_valid(self):
        from guardflow.cfg import has_cycle

        prog = unroll(parse(corpus_text("loop")), k=2)
        assert not prog.functions["main"].has_loops()
        assert not has_cycle(prog.functions["main"])

    def test_recursion_becomes_havoc(self):
        prog = unroll(parse(corpus_text("rec")), d=2)
        assert set(prog.functions) == {"walk", "walk__r2", "main"}
        assert prog.has_havoc()
        assert len(prog.warnings) == 1 and "exceeds recursion depth 2" in prog.warnings[0]

    def test_input_is_not_modified(self):
        prog = parse(self.LOOP)
        before = pretty(prog)
        unroll(prog, k=4)
        assert pretty(prog) == before

    def test_bounds_must_be_positive(self):
        with pytest.raises(ValueError):
            unroll(parse(self.LOOP), k=0)
