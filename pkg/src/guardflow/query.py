"""Demand queries over a frozen value-flow graph.

A query walks the graph while conjoining edge guards.  Calls are matched
the usual way: entering a callee through a call edge pushes the call
label, and the only way back out of a callee one entered is the callee's
summary edge.  A walk that starts inside a callee may leave it through
any call site ("unmatched exit"); the labels of such exits are recorded
so that two walks from the same source can be checked for compatibility.

Every step is pruned with unit propagation.  In ``full`` mode a node is
only admitted once the complete solver has found the accumulated guard,
conjoined with the condition for reaching the walk's outermost function,
satisfiable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterator, List, NamedTuple, Optional, Set, Tuple

from . import guard as G
from .guard import Guard, SatVerdict, SolverOverflow
from .pipeline import Analysis
from .vfg import CALL, DEF, DIRECT, IN, PARAM, PROGRAM_KINDS, RETURN, SUMMARY, USE, Node

SEMI, FULL = "semi", "full"
MODES = (SEMI, FULL)


class QueryError(Exception):
    pass


class State(NamedTuple):
    node: Node
    stack: Tuple[int, ...]  # calls entered and not yet left
    exits: Tuple[int, ...]  # calls left without having been entered
    top: str  # outermost function of the walk so far
    guard: Guard


@dataclass
class SliceResult:
    seed: Node
    producers: Set[int]
    visited_paths: int
    nodes: Dict[Node, Guard] = field(default_factory=dict)

    def format(self) -> str:
        return f"SLICE {self.seed} -> " + ",".join(str(x) for x in sorted(self.producers))


@dataclass
class BugReport:
    kind: str
    first_free: int
    second_free: int
    shared_source: Node
    condition: Guard
    trace: List[int]

    def format(self, path: str = "") -> str:
        prefix = f"{path}:" if path else ""
        return (
            f"DF {prefix}{self.first_free} {prefix}{self.second_free} "
            f"cond={self.condition} trace={','.join(str(x) for x in self.trace)}"
        )


class QueryEngine:
    """Read-only query front end; each public call owns its own memo."""

    def __init__(self, analysis: Analysis, mode: str = FULL):
        if mode not in MODES:
            raise QueryError(f"unknown solver mode {mode!r}")
        self.analysis = analysis
        self.graph = analysis.graph
        self.reach = analysis.reach
        self.mode = mode
        self.overflows = 0
        self.summary_from: Dict[Node, list] = {}
        self.summary_to: Dict[Node, list] = {}
        self.return_from: Dict[Tuple[Node, int], list] = {}
        self.call_into: Dict[Tuple[Node, int], list] = {}
        for e in sorted(self.graph.edges.values(), key=lambda e: (str(e.src), str(e.dst), e.kind, e.site)):
            if e.kind == SUMMARY:
                self.summary_from.setdefault(e.src, []).append(e)
                self.summary_to.setdefault(e.dst, []).append(e)
            elif e.kind == RETURN:
                self.return_from.setdefault((e.src, e.site), []).append(e)
            elif e.kind == CALL:
                self.call_into.setdefault((e.dst, e.site), []).append(e)
        self._verdicts: Dict[Guard, bool] = {}

    # solver front ---------------------------------------------------------
    def _pruned(self, g: Guard, top: str) -> bool:
        h = G.conj(g, self.reach[top])
        return h is G.FALSE or G.semi_decide(h) is SatVerdict.UNSAT

    def satisfiable(self, g: Guard) -> bool:
        if g is G.FALSE:
            return False
        if self.mode == SEMI:
            return G.semi_decide(g) is not SatVerdict.UNSAT
        hit = self._verdicts.get(g)
        if hit is None:
            try:
                hit = G.full_sat(g) is SatVerdict.SAT
            except SolverOverflow:
                self.overflows += 1
                hit = True
            self._verdicts[g] = hit
        return hit

    def admitted(self, st: State) -> bool:
        return self.satisfiable(G.conj(st.guard, self.reach[st.top]))

    # traversal ------------------------------------------------------------
    def _forward(self, st: State) -> Iterator[State]:
        node, stack, exits, top, g = st
        for e in self.graph.out_edges(node):
            if e.kind == DIRECT:
                yield State(e.dst, stack, exits, top, G.conj(g, e.guard))
            elif e.kind == CALL:
                # shortcut over the callee, then descend into it
                for se in self.summary_from.get(e.dst, ()):
                    for rb in self.return_from.get((se.dst, e.site), ()):
                        yield State(rb.dst, stack, exits, top, G.conj(g, e.guard, se.guard, rb.guard))
                yield State(e.dst, stack + (e.site,), exits, top, G.conj(g, e.guard))
            elif e.kind == RETURN and not stack:
                yield State(e.dst, (), exits + (e.site,), e.dst.func, G.conj(g, e.guard))

    def _backward(self, st: State) -> Iterator[State]:
        node, stack, exits, top, g = st
        for e in self.graph.in_edges(node):
            if e.kind == DIRECT:
                yield State(e.src, stack, exits, top, G.conj(g, e.guard))
            elif e.kind == RETURN:
                for se in self.summary_to.get(e.src, ()):
                    for cb in self.call_into.get((se.src, e.site), ()):
                        yield State(cb.src, stack, exits, top, G.conj(g, e.guard, se.guard, cb.guard))
                yield State(e.src, stack + (e.site,), exits, top, G.conj(g, e.guard))
            elif e.kind == CALL and not stack:
                yield State(e.src, (), exits + (e.site,), e.src.func, G.conj(g, e.guard))

    def walk(self, starts: List[Node], backward: bool = False):
        """All admitted states reachable from ``starts`` with a parent map
        (for traces) and the number of admitted states without admitted
        successors."""
        step = self._backward if backward else self._forward
        parent: Dict[State, Optional[State]] = {}
        order: List[State] = []
        todo = []
        for n in starts:
            if n not in self.graph.nodes:
                raise QueryError(f"unknown node {n}")
            st = State(n, (), (), n.func, G.TRUE)
            if st not in parent:
                parent[st] = None
                todo.append(st)
        leaves = 0
        while todo:
            st = todo.pop()
            if not self.admitted(st):
                continue
            order.append(st)
            grew = False
            for nxt in step(st):
                simple = nxt._replace(guard=G.simplify(nxt.guard))
                if self._pruned(simple.guard, simple.top):
                    continue
                if simple not in parent:
                    parent[simple] = st
                    todo.append(simple)
                grew = True
            if not grew:
                leaves += 1
        return order, parent, leaves

    def reached(self, start: Node, backward: bool = False) -> Dict[Node, Guard]:
        """Nodes reachable from ``start`` with the disjunction of the
        admitted conditions (walk guard and reach condition)."""
        order, _, _ = self.walk([start], backward)
        out: Dict[Node, List[Guard]] = {}
        for st in order:
            out.setdefault(st.node, []).append(G.conj(st.guard, self.reach[st.top]))
        return {n: G.simplify(G.disj_all(gs)) for n, gs in out.items()}

    # clients ----------------------------------------------------------------
    def thin_slice(self, seed: Node) -> SliceResult:
        order, _, leaves = self.walk([seed], backward=True)
        nodes: Dict[Node, Guard] = {}
        producers = set()
        for st in order:
            nodes[st.node] = G.disj(nodes.get(st.node, G.FALSE), st.guard)
            if self.graph.nodes[st.node] in (DEF, USE) and st.node.label > 0:
                producers.add(self.analysis.site_of(st.node.label))
        # the seed belongs to its own slice even on an infeasible path
        nodes.setdefault(seed, G.FALSE)
        if seed.label > 0:
            producers.add(self.analysis.site_of(seed.label))
        return SliceResult(seed, producers, leaves, nodes)

    def answer_alias_pairs(self, src: Node, backward: bool = True) -> Set[Tuple[Node, Guard]]:
        """Program values (definitions and parameters) the node depends on,
        or with ``backward=False`` the values depending on it."""
        out = set()
        for n, g in self.reached(src, backward).items():
            if n != src and self.graph.nodes[n] in (DEF, PARAM):
                out.add((n, g))
        return out

    def dependence_pairs(self) -> Set[Tuple[Node, Node]]:
        """Every (source, target) pair of program values such that the
        target may carry a value that flowed out of the source."""
        pairs = set()
        for n, kind in sorted(self.graph.nodes.items()):
            if kind not in (DEF, PARAM):
                continue
            for m in self.reached(n):
                if m != n and self.graph.nodes[m] in (DEF, PARAM):
                    pairs.add((n, m))
        return pairs

    def free_sources(self) -> List[List[Node]]:
        """Groups of nodes that each stand for one family of memory objects.

        Allocations and address-of definitions in every function; the
        parameters and input values of functions no one calls."""
        a = self.analysis
        groups: List[List[Node]] = []
        stack_objs: Dict[Tuple[str, str], List[Node]] = {}
        for f in a.program.functions.values():
            for _, s in f.statements():
                kind = type(s).__name__
                if kind == "Alloc":
                    groups.append([Node(f.name, s.dst, s.label)])
                elif kind == "AddressOf":
                    stack_objs.setdefault((f.name, s.var), []).append(Node(f.name, s.dst, s.label))
        groups.extend(stack_objs[k] for k in sorted(stack_objs))
        roots = set(a.callgraph.roots)
        for n, kind in sorted(a.graph.nodes.items()):
            if n.func in roots and kind in (PARAM, IN):
                groups.append([n])
        return groups

    def check_double_free(self) -> List[BugReport]:
        a = self.analysis
        by_operand: Dict[Node, list] = {}
        for fa in a.functions.values():
            for fs in fa.free_sites:
                by_operand.setdefault(fs.operand, []).append(fs)
        reports: Dict[Tuple[int, int], BugReport] = {}
        for group in self.free_sources():
            order, parent, _ = self.walk(group)
            hits: Dict[Tuple[int, Tuple[int, ...], Tuple[int, ...]], list] = {}
            for st in order:
                for fs in by_operand.get(st.node, ()):
                    key = (fs.label, st.stack, st.exits)
                    hits.setdefault(key, []).append((st, fs))
            keys = sorted(hits)
            for k1, k2 in combinations(keys, 2):
                (l1, _, x1), (l2, _, x2) = k1, k2
                if not _prefix(x1, x2) and not _prefix(x2, x1):
                    continue
                s1, s2 = sorted((a.site_of(l1), a.site_of(l2)))
                if (s1, s2) in reports:
                    continue
                report = self._pair(hits[k1], hits[k2], parent, s1, s2)
                if report is not None:
                    reports[(s1, s2)] = report
        return [reports[k] for k in sorted(reports)]

    def _pair(self, h1, h2, parent, s1, s2) -> Optional[BugReport]:
        for st1, fs1 in h1:
            for st2, fs2 in h2:
                top = st1.top if len(st1.exits) >= len(st2.exits) else st2.top
                cond = G.simplify(G.conj(st1.guard, st2.guard, fs1.pc, fs2.pc, self.reach[top]))
                if self.satisfiable(cond):
                    trace = _trace(parent, st1) + _trace(parent, st2)
                    labels = []
                    for n in trace:
                        lab = self.analysis.site_of(n.label) if n.label else 0
                        if lab and lab not in labels:
                            labels.append(lab)
                    return BugReport("double-free", s1, s2, _trace(parent, st1)[0], cond, labels)
        return None


def _prefix(a: tuple, b: tuple) -> bool:
    return b[: len(a)] == a


def _trace(parent, st: State) -> List[Node]:
    out = []
    while st is not None:
        out.append(st.node)
        st = parent[st]
    out.reverse()
    return out


# convenience wrappers -------------------------------------------------------


def find_node(analysis: Analysis, seed: str) -> Node:
    """Resolve ``v@L`` or ``f:v@L`` to a program-value node."""
    func = None
    text = seed
    if ":" in text:
        func, text = text.split(":", 1)
    if "@" not in text:
        raise QueryError(f"seed {seed!r} is not of the form v@label")
    value, _, label = text.rpartition("@")
    try:
        lab = int(label)
    except ValueError:
        raise QueryError(f"seed {seed!r} has a non-numeric label") from None
    found = [
        n for n, k in analysis.graph.nodes.items()
        if n.value == value and n.label == lab and k in PROGRAM_KINDS and (func is None or n.func == func)
    ]
    if not found:
        raise QueryError(f"no value {seed!r} in the graph")
    if len(found) > 1:
        # a stored value: prefer its definition, then the store use
        found.sort(key=lambda n: (analysis.graph.nodes[n] != DEF, n))
    return found[0]


def thin_slice(analysis: Analysis, seed: Node, mode: str = FULL) -> SliceResult:
    return QueryEngine(analysis, mode).thin_slice(seed)


def answer_alias_pairs(analysis: Analysis, src: Node, mode: str = FULL) -> Set[Tuple[Node, Guard]]:
    return QueryEngine(analysis, mode).answer_alias_pairs(src)


def check_double_free(analysis: Analysis, mode: str = FULL) -> List[BugReport]:
    return QueryEngine(analysis, mode).check_double_free()
