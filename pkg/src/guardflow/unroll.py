"""Bounded unrolling of ``while`` loops and recursive calls.

Loop replicas are chained: the block holding the loop ends with
``br (c) rep1 post``, each replica ends with ``br (c) rep{i+1} post`` and the
last one jumps to ``post``.  Values defined in a body are renamed per
replica (``x`` becomes ``x.2`` in the second copy) because a loop body is a
scope of its own.  The first replica keeps the original statement labels;
later replicas get fresh labels whose ``origin`` points back.

Recursion is cut by versioning the functions of each recursive strongly
connected component: version 1 keeps the original name, version ``i``
calls version ``i + 1`` of its SCC peers, and the calls of version ``d``
become :class:`~guardflow.ir.Havoc`.
"""
from __future__ import annotations

import copy
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from .ir import (
    Block, Branch, Call, Function, Havoc, Jump, Phi, Program, Return, Stmt, While, relabel, validate,
)


class _Labels:
    def __init__(self, start: int):
        self.n = start

    def fresh(self) -> int:
        self.n += 1
        return self.n


def _rename(s: Stmt, names: Dict[str, str]) -> Dict[str, object]:
    """Field updates applying ``names`` to every operand of ``s``."""
    out = {}
    for fld in ("dst", "src", "ptr", "val", "var"):
        v = getattr(s, fld, None)
        if isinstance(v, str) and v in names and fld != "var":
            out[fld] = names[v]
    if isinstance(s, (Call, Havoc)):
        out["args"] = tuple(names.get(a, a) for a in s.args)
    if isinstance(s, Phi):
        out["arms"] = tuple((b, names.get(v, v)) for b, v in s.arms)
    return out


def _body_defs(items) -> List[str]:
    out = []
    for it in items:
        if isinstance(it, While):
            out.extend(_body_defs(it.body))
        else:
            out.extend(it.defs())
    return out


def _unroll_function(f: Function, k: int, labels: _Labels) -> Function:
    if not f.has_loops():
        return f
    blocks: Dict[str, Block] = {}
    taken = set(f.blocks)

    def new_block(base: str) -> Block:
        i = 1
        while f"{base}.{i}" in taken:
            i += 1
        name = f"{base}.{i}"
        taken.add(name)
        b = Block(name, [], Jump("?"))
        blocks[name] = b
        return b

    copies: Dict[str, int] = {}

    def fresh_name(v: str) -> str:
        copies[v] = copies.get(v, 1) + 1
        return f"{v}.{copies[v]}"

    def expand(items, cur: Block, names: Dict[str, str], first: bool, in_loop: bool) -> Block:
        for it in items:
            if isinstance(it, While):
                post = new_block(cur.name.split(".")[0] + "_post")
                prev = cur
                for i in range(1, k + 1):
                    rep = new_block(cur.name.split(".")[0] + "_loop")
                    prev.term = Branch(it.cond, it.atom, it.positive, rep.name, post.name)
                    sub = dict(names)
                    if i > 1:
                        for d in _body_defs(it.body):
                            sub[d] = fresh_name(d)
                    prev = expand(it.body, rep, sub, first and i == 1, True)
                prev.term = Jump(post.name)
                cur = post
                continue
            upd = _rename(it, names)
            if first:
                s = replace(it, in_loop=in_loop or it.in_loop, **upd) if (upd or in_loop) else it
            else:
                s = relabel(it, labels.fresh(), in_loop=True, **upd)
            cur.stmts.append(s)
        return cur

    rename_preds: Dict[str, str] = {}
    for name, b in f.blocks.items():
        head = Block(name, [], b.term)
        blocks[name] = head
        last = expand(b.stmts, head, {}, True, False)
        if last is not head:
            last.term = b.term
            rename_preds[name] = last.name
    # ``blocks`` is in creation order: every source block is followed by
    # the replica and post blocks carved out of it
    if rename_preds:
        for b in blocks.values():
            b.stmts = [
                replace(s, arms=tuple((rename_preds.get(p, p), v) for p, v in s.arms)) if isinstance(s, Phi) else s
                for s in b.stmts
            ]
    return replace(f, blocks=blocks)


def _sccs(prog: Program) -> List[List[str]]:
    """Tarjan's algorithm over the call graph, in function order."""
    callees = {
        f.name: [s.callee for _, s in f.statements() if isinstance(s, Call)] for f in prog.functions.values()
    }
    index: Dict[str, int] = {}
    low: Dict[str, int] = {}
    on_stack = set()
    stack: List[str] = []
    out: List[List[str]] = []
    counter = [0]

    def strong(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in callees[v]:
            if w not in index:
                strong(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(comp)

    for name in prog.functions:
        if name not in index:
            strong(name)
    return [c for c in out if len(c) > 1 or c[0] in callees[c[0]]]


def _version_name(name: str, i: int) -> str:
    return name if i == 1 else f"{name}__r{i}"


def _unroll_recursion(prog: Program, d: int, labels: _Labels, warnings: List[str]) -> Dict[str, Function]:
    funcs = dict(prog.functions)
    for comp in _sccs(prog):
        members = set(comp)
        for name in [n for n in prog.functions if n in members]:
            base = funcs[name]
            for i in range(1, d + 1):
                blocks = {}
                for bname, b in base.blocks.items():
                    stmts = []
                    for s in b.stmts:
                        if i > 1:
                            s = relabel(s, labels.fresh())
                        if isinstance(s, Call) and s.callee in members:
                            if i < d:
                                s = replace(s, callee=_version_name(s.callee, i + 1))
                            else:
                                s = Havoc(
                                    label=s.label, origin=s.origin, in_loop=s.in_loop,
                                    dst=s.dst, callee=s.callee, args=s.args,
                                )
                                warnings.append(
                                    f"havoc: call to {s.callee} at label {s.site} in {_version_name(name, i)} "
                                    f"exceeds recursion depth {d}"
                                )
                        stmts.append(s)
                    term = b.term
                    if i > 1 and isinstance(term, Return):
                        term = Return(term.value, labels.fresh(), term.origin or term.label)
                    blocks[bname] = Block(bname, stmts, term)
                funcs[_version_name(name, i)] = replace(base, name=_version_name(name, i), blocks=blocks)
    return funcs


def unroll(prog: Program, k: int = 2, d: int = 2) -> Program:
    """Loop- and recursion-free copy of ``prog``; ``prog`` is not modified."""
    if k < 1 or d < 1:
        raise ValueError("unroll bounds must be at least 1")
    labels = _Labels(prog.max_label)
    funcs = {name: _unroll_function(copy.deepcopy(f), k, labels) for name, f in prog.functions.items()}
    staged = Program(funcs, prog.atoms, list(prog.warnings), labels.n)
    warnings = list(prog.warnings)
    funcs = _unroll_recursion(staged, d, labels, warnings)
    # keep callers' order stable: versions follow their base function
    ordered: Dict[str, Function] = {}
    for name in prog.functions:
        ordered[name] = funcs[name]
        for i in range(2, d + 1):
            v = _version_name(name, i)
            if v in funcs:
                ordered[v] = funcs[v]
    out = Program(ordered, prog.atoms, warnings, labels.n)
    validate(out)  # catches renamed values colliding with user names
    return out
