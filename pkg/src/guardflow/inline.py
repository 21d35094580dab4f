"""Full inlining of loop- and recursion-free programs.

Used to check that summary-based results agree with the results on a
program without calls.  Every value of an inlined copy is mapped back to
the node it copies, so query results on both programs can be compared in
terms of the original program.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Dict, List, Tuple

from .inter import build_call_graph
from .ir import AddressOf, Block, Call, Copy, Function, Havoc, Jump, Phi, Program, Return, Stmt, validate
from .unroll import _rename
from .vfg import Node

NodeMap = Dict[Node, Node]


class _Inliner:
    def __init__(self, prog: Program):
        self.prog = prog
        self.next_label = prog.max_label
        self.done: Dict[str, Tuple[Function, NodeMap]] = {}

    def fresh(self) -> int:
        self.next_label += 1
        return self.next_label

    def inline(self, name: str) -> Tuple[Function, NodeMap]:
        if name in self.done:
            return self.done[name]
        f = self.prog.functions[name]
        node_map: NodeMap = {}
        blocks: Dict[str, Block] = {}
        # rename phi arms in successors when a block gets split
        last_of: Dict[str, str] = {}
        for b in f.blocks.values():
            cur = b.name
            stmts: List[Stmt] = []
            for s in b.stmts:
                if not isinstance(s, Call):
                    stmts.append(s)
                    continue
                callee, cmap = self.inline(s.callee)
                tag = f".i{s.label}"
                names = {v: v + tag for v in _defined(callee)}
                entry = f"{callee.entry}{tag}"
                for p, a in zip(callee.params, s.args):
                    lab = self.fresh()
                    stmts.append(Copy(label=lab, dst=names[p], src=a))
                    node_map[Node(name, names[p], lab)] = Node(s.callee, p, 0)
                blocks[cur] = Block(cur, tuple(stmts), Jump(entry))
                post = f"{b.name}.after{s.label}"
                for cb in callee.blocks.values():
                    copied = []
                    for cs in cb.stmts:
                        ch = _rename(cs, names)
                        if isinstance(cs, Phi):
                            ch["arms"] = tuple((bb + tag, names.get(v, v)) for bb, v in cs.arms)
                        if isinstance(cs, AddressOf):
                            ch["var"] = cs.var + tag
                        lab = self.fresh()
                        ns = replace(cs, label=lab, origin=cs.site, **ch)
                        copied.append(ns)
                        for n in _nodes_of(cs, s.callee):
                            orig = cmap.get(n, n)
                            node_map[Node(name, names.get(n.value, n.value), lab)] = orig
                    term = cb.term
                    if isinstance(term, Return):
                        term = Jump(post)
                        ret_value = cb.term.value
                    elif isinstance(term, Jump):
                        term = Jump(term.target + tag)
                    else:
                        term = replace(term, then=term.then + tag, els=term.els + tag)
                    blocks[cb.name + tag] = Block(cb.name + tag, tuple(copied), term)
                cur = post
                stmts = []
                if s.dst:
                    lab = self.fresh()
                    if ret_value is not None:
                        stmts.append(Copy(label=lab, origin=s.site, dst=s.dst, src=names.get(ret_value, ret_value)))
                    else:
                        stmts.append(Havoc(label=lab, origin=s.site, dst=s.dst, callee=s.callee))
                    node_map[Node(name, s.dst, lab)] = Node(name, s.dst, s.label)
            blocks[cur] = Block(cur, tuple(stmts), b.term)
            last_of[b.name] = cur
        # phis name the block their control comes from, which is now the
        # last piece of a split predecessor
        for bname, blk in list(blocks.items()):
            if any(isinstance(s, Phi) for s in blk.stmts):
                new = tuple(
                    replace(s, arms=tuple((last_of.get(bb, bb), v) for bb, v in s.arms)) if isinstance(s, Phi) and
                    s.label <= self.prog.max_label else s
                    for s in blk.stmts
                )
                blocks[bname] = Block(bname, new, blk.term)
        out = (Function(name, f.params, blocks, f.entry), node_map)
        self.done[name] = out
        return out


def _defined(f: Function) -> List[str]:
    out = list(f.params)
    for _, s in f.statements():
        out.extend(s.defs())
    return out


def _nodes_of(s: Stmt, func: str) -> List[Node]:
    """Nodes a statement introduces: its definition and, for stores, the use."""
    out = [Node(func, d, s.label) for d in s.defs()]
    val = getattr(s, "val", None)
    if val is not None:
        out.append(Node(func, val, s.label))
    return out


def inline_program(prog: Program) -> Tuple[Program, NodeMap]:
    """Inline every call of a loop- and recursion-free program.

    Only the functions nobody calls remain.  The map sends each node of a
    copied statement to the node of the statement it copies; nodes that
    are not in the map stand for themselves.
    """
    cg = build_call_graph(prog)
    inl = _Inliner(prog)
    funcs: Dict[str, Function] = {}
    node_map: NodeMap = {}
    for name in prog.functions:
        if cg.callers[name]:
            continue
        f, m = inl.inline(name)
        funcs[name] = f
        node_map.update(m)
    out = Program(funcs, prog.atoms, list(prog.warnings), inl.next_label)
    validate(out)
    return out, node_map


def equivalence_mismatches(prog: Program, config=None) -> List[str]:
    """Differences between summary-based results and results on the
    inlined program, stated in terms of the original program's nodes.

    Compared are dependence pairs, double-free site pairs and the program
    values in every definition's thin slice (full solver mode).
    """
    from .config import AnalysisConfig
    from .pipeline import analyze_program, prepare
    from .query import QueryEngine
    from .vfg import DEF, PROGRAM_KINDS

    config = config or AnalysisConfig()
    a = analyze_program(prog, config)
    flat, node_map = inline_program(prepare(prog, config))
    b = analyze_program(flat, config, unrolled=True)
    back = lambda n: node_map.get(n, n)
    qa, qb = QueryEngine(a), QueryEngine(b)
    out = []

    pa = qa.dependence_pairs()
    pb = {(back(s), back(d)) for s, d in qb.dependence_pairs()}
    pb = {(s, d) for s, d in pb if s != d}
    for s, d in sorted(pa - pb):
        out.append(f"only with summaries: {s} -> {d}")
    for s, d in sorted(pb - pa):
        out.append(f"only when inlined: {s} -> {d}")

    fa = {(r.first_free, r.second_free) for r in qa.check_double_free()}
    fb = {(r.first_free, r.second_free) for r in qb.check_double_free()}
    if fa != fb:
        out.append(f"double frees differ: {sorted(fa)} vs {sorted(fb)}")

    def program_nodes(q, graph, seed):
        return {back(n) for n in q.thin_slice(seed).nodes if graph.nodes[n] in PROGRAM_KINDS}

    sb: Dict[Node, set] = {}
    for n, kind in sorted(b.graph.nodes.items()):
        if kind == DEF:
            sb.setdefault(back(n), set()).update(program_nodes(qb, b.graph, n))
    for n, kind in sorted(a.graph.nodes.items()):
        if kind == DEF and n in sb:
            sa = program_nodes(qa, a.graph, n)
            if sa != sb[n]:
                out.append(f"slice of {n} differs")
    return out
