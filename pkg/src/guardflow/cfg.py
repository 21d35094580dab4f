"""Control-flow facts: dominators, frontiers, block guards and phi gates."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, List, Optional, Tuple

from . import guard as G
from .guard import Guard
from .ir import Branch, Function, Phi, SemanticError


def successors(f: Function) -> Dict[str, Tuple[str, ...]]:
    return {b.name: b.term.targets() for b in f.blocks.values()}


def predecessors(f: Function) -> Dict[str, List[str]]:
    preds: Dict[str, List[str]] = {b: [] for b in f.blocks}
    for b in f.blocks.values():
        for t in b.term.targets():
            if t in preds and b.name not in preds[t]:
                preds[t].append(b.name)
    return preds


def reachable(f: Function) -> set:
    seen = set()
    stack = [f.entry]
    while stack:
        b = stack.pop()
        if b in seen or b not in f.blocks:
            continue
        seen.add(b)
        stack.extend(f.blocks[b].term.targets())
    return seen


def has_cycle(f: Function) -> bool:
    color: Dict[str, int] = {}
    stack = [(f.entry, iter(f.blocks[f.entry].term.targets()))]
    color[f.entry] = 1
    while stack:
        b, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            color[b] = 2
            stack.pop()
            continue
        c = color.get(nxt, 0)
        if c == 1:
            return True
        if c == 0:
            color[nxt] = 1
            stack.append((nxt, iter(f.blocks[nxt].term.targets())))
    return False


def reverse_postorder(f: Function) -> List[str]:
    order: List[str] = []
    seen = {f.entry}
    stack = [(f.entry, iter(f.blocks[f.entry].term.targets()))]
    while stack:
        b, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            order.append(b)
            stack.pop()
        elif nxt not in seen:
            seen.add(nxt)
            stack.append((nxt, iter(f.blocks[nxt].term.targets())))
    order.reverse()
    return order


def dominators(f: Function) -> Dict[str, Optional[str]]:
    """Immediate dominators by the iterative Cooper-Harvey-Kennedy scheme."""
    rpo = reverse_postorder(f)
    index = {b: i for i, b in enumerate(rpo)}
    preds = predecessors(f)
    idom: Dict[str, Optional[str]] = {f.entry: f.entry}

    def intersect(a, b):
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for b in rpo[1:]:
            new = None
            for p in preds[b]:
                if p in idom:
                    new = p if new is None else intersect(p, new)
            if idom.get(b) != new:
                idom[b] = new
                changed = True
    idom[f.entry] = None
    return idom


@dataclass(frozen=True)
class DominanceInfo:
    rpo: Tuple[str, ...]
    preds: Dict[str, Tuple[str, ...]]
    succs: Dict[str, Tuple[str, ...]]
    idom: Dict[str, Optional[str]]
    depth: Dict[str, int]
    frontier: Dict[str, FrozenSet[str]]
    iterated_frontier: Dict[str, FrozenSet[str]]
    block_guard: Dict[str, Guard]
    edge_guard: Dict[Tuple[str, str], Guard]

    def dominates(self, a: str, b: Optional[str]) -> bool:
        while b is not None:
            if a == b:
                return True
            b = self.idom[b]
        return False

    def dom_path(self, b: str) -> List[str]:
        """``b`` and its dominators, innermost first."""
        out = []
        cur: Optional[str] = b
        while cur is not None:
            out.append(cur)
            cur = self.idom[cur]
        return out


def edge_condition(f: Function, src: str, dst: str) -> Guard:
    t = f.blocks[src].term
    if isinstance(t, Branch):
        if t.then == t.els:
            return G.TRUE
        if dst == t.then:
            return G.lit(t.atom, t.positive)
        return G.lit(t.atom, not t.positive)
    return G.TRUE


def analyze_cfg(f: Function) -> DominanceInfo:
    reach = reachable(f)
    for b in f.blocks:
        if b not in reach:
            raise SemanticError(f"function {f.name}: unreachable block {b!r}")
    if has_cycle(f):
        raise SemanticError(f"function {f.name}: cyclic control flow")
    rpo = reverse_postorder(f)
    preds = {b: tuple(ps) for b, ps in predecessors(f).items()}
    succs = successors(f)
    idom = dominators(f)
    depth: Dict[str, int] = {}
    for b in rpo:
        depth[b] = 1 if idom[b] is None else depth[idom[b]] + 1

    frontier: Dict[str, set] = {b: set() for b in rpo}
    for b in rpo:
        if len(preds[b]) >= 2:
            for p in preds[b]:
                runner = p
                while runner is not None and runner != idom[b]:
                    frontier[runner].add(b)
                    runner = idom[runner]
    iterated: Dict[str, FrozenSet[str]] = {}
    for b in rpo:
        acc = set(frontier[b])
        work = list(acc)
        while work:
            x = work.pop()
            for y in frontier[x]:
                if y not in acc:
                    acc.add(y)
                    work.append(y)
        iterated[b] = frozenset(acc)

    edge_guard: Dict[Tuple[str, str], Guard] = {}
    block_guard: Dict[str, Guard] = {}
    for b in rpo:
        if b == f.entry:
            block_guard[b] = G.TRUE
            continue
        parts = []
        for p in preds[b]:
            e = edge_condition(f, p, b)
            edge_guard[(p, b)] = e
            parts.append(G.conj(block_guard[p], e))
        block_guard[b] = G.simplify(G.disj_all(parts))
    return DominanceInfo(
        tuple(rpo), preds, succs, idom, depth,
        {b: frozenset(s) for b, s in frontier.items()}, iterated, block_guard, edge_guard,
    )


def gate_phis(f: Function, dom: DominanceInfo) -> Function:
    """Copy of ``f`` whose phi arms carry their gating guards."""
    blocks = {}
    for name, b in f.blocks.items():
        stmts = []
        for s in b.stmts:
            if isinstance(s, Phi):
                gates = tuple(
                    G.conj(dom.block_guard[p], dom.edge_guard.get((p, name), G.TRUE)) for p, _ in s.arms
                )
                s = replace(s, gates=gates)
            stmts.append(s)
        blocks[name] = replace(b, stmts=stmts)
    return replace(f, blocks=blocks)
