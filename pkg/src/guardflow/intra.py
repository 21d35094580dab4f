"""Sparse, guard-tracking analysis of one function.

Blocks are visited in reverse postorder and statements in textual order,
which on a loop-free CFG sees every definition before its dominated uses.
A store writes its entry into the block's store and into every block of
the block's iterated dominance frontier; a load walks the dominator tree
upwards, masking older entries with the negated guards of newer ones.

Memory passed in by the caller is modelled by *input objects*: ``in(p)``
is what parameter ``p`` points to, and its unknown initial content is the
synthetic value ``*p`` (node ``*p@0``), which in turn points to
``in(*p)``, and so on.  These are created on first use.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from . import guard as G
from .cfg import DominanceInfo
from .config import AnalysisConfig
from .domain import AbstractStore, MemObject, PointsToEnv, StoreEntry
from .guard import Guard, SatVerdict
from .ir import (
    AddressOf, Alloc, Call, Copy, Free, Function, Havoc, Load, Phi, Return, Stmt, Store,
)
from .vfg import DEF, DIRECT, IN, OUT, PARAM, USE, Node, ValueFlowGraph


class AnalysisError(Exception):
    pass


@dataclass
class InputInfo:
    obj: MemObject
    path: str  # access path from a parameter: "p", "*p", "**p", ...
    parent: Optional[MemObject]
    in_value: Optional[str] = None  # name of the synthetic content value
    child: Optional[MemObject] = None  # the object ``in_value`` points to


@dataclass
class FreeSite:
    label: int
    site: int
    operand: Node
    pc: Guard
    block: str


@dataclass
class CallSite:
    label: int
    callee: str
    pc: Guard
    block: str


@dataclass
class FunctionAnalysis:
    func: Function
    dom: DominanceInfo
    config: AnalysisConfig = field(default_factory=AnalysisConfig)
    summaries: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.name = self.func.name
        self.insensitive = self.config.path_insensitive
        self.env = PointsToEnv()
        self.store = AbstractStore()
        self.graph = ValueFlowGraph()
        self.def_node: Dict[str, Node] = {}
        self.inputs: Dict[MemObject, InputInfo] = {}
        self.free_sites: List[FreeSite] = []
        self.call_sites: List[CallSite] = []
        self.load_visits: Dict[int, int] = {}
        self.merged_load_edges = 0
        self.unmerged_load_edges = 0
        self.constraints = 0
        self.warnings: List[str] = []
        self.summary = None

    # helpers -------------------------------------------------------------
    def live(self, g: Guard) -> bool:
        self.constraints += 1
        return g is not G.FALSE and G.semi_decide(g) is not SatVerdict.UNSAT

    def pc(self, block: str) -> Guard:
        return G.TRUE if self.insensitive else self.dom.block_guard[block]

    def node(self, value: str, label: int, kind: str) -> Node:
        return self.graph.add_node(Node(self.name, value, label), kind)

    def define(self, value: str, label: int) -> Node:
        n = self.node(value, label, DEF)
        self.def_node[value] = n
        self.env.define(value)
        return n

    def operand(self, v: str) -> Node:
        try:
            return self.def_node[v]
        except KeyError:
            raise AnalysisError(f"{self.name}: value {v!r} used before definition") from None

    def value_node(self, v: str, label: int) -> Node:
        n = Node(self.name, v, label)
        if n not in self.graph.nodes:
            raise AnalysisError(f"{self.name}: no node for stored value {n}")
        return n

    def edge(self, src: Node, dst: Node, kind: str, g: Guard, site: int = 0):
        return self.graph.upsert_edge(src, dst, kind, G.TRUE if self.insensitive else g, site)

    def restrict(self, entries: Mapping[MemObject, Guard], pre: Guard) -> Dict[MemObject, Guard]:
        out = {}
        for o, g in entries.items():
            h = G.conj(g, pre)
            if self.live(h):
                out[o] = h
        return out

    # input objects ---------------------------------------------------------
    def input_object(self, path: str, parent: Optional[MemObject]) -> MemObject:
        o = MemObject(f"in({path})", "input", False)
        if o not in self.inputs:
            self.inputs[o] = InputInfo(o, path, parent)
        return o

    def in_value(self, o: MemObject) -> str:
        info = self.inputs[o]
        if info.in_value is None:
            name = "*" + info.path
            info.child = self.input_object("*" + info.path, o)
            info.in_value = name
            self.node(name, 0, IN)
            self.env.add(name, info.child, G.TRUE)
        return info.in_value

    def is_modified(self, o: MemObject) -> bool:
        return any(self.store.blocks[b].get(o) for b in self.store.blocks)

    # the two store primitives ---------------------------------------------
    def write(self, block: str, targets: Mapping[MemObject, Guard], label: int, value: str, pc: Guard) -> None:
        targets = {o: g for o, g in targets.items() if self.live(g)}
        single = len(targets) == 1
        for o in sorted(targets):
            tg = targets[o]
            strong = single and o.singleton and (self.insensitive or not self.live(G.conj(pc, G.neg(tg))))
            self.store.insert(block, o, StoreEntry(tg, label, value, strong))
            for b2 in sorted(self.dom.iterated_frontier[block]):
                self.store.insert(b2, o, StoreEntry(tg, label, value, False))

    def read_object(self, o: MemObject, ptr_g: Guard, block: str, create_in: bool = True):
        """Values of ``o`` visible at the end of what has been processed of
        ``block``: a list of ``(guard, label, value)`` and the number of
        blocks visited."""
        out: List[Tuple[Guard, int, str]] = []
        mask = G.TRUE
        visits = 0
        for b in self.dom.dom_path(block):
            visits += 1
            for e in self.store.entries(b, o):
                cond = G.TRUE if self.insensitive else G.conj(e.guard, mask, ptr_g)
                if self.live(cond):
                    out.append((cond, e.label, e.value))
                if e.strong:
                    return out, visits
                if not self.insensitive:
                    mask = G.conj(G.neg(e.guard), mask)
            if mask is G.FALSE:
                return out, visits
        info = self.inputs.get(o)
        if info is not None and (create_in or info.in_value is not None):
            cond = G.TRUE if self.insensitive else G.conj(mask, ptr_g)
            if self.live(cond):
                out.append((cond, 0, self.in_value(o)))
        return out, visits

    # driver ------------------------------------------------------------------
    def run(self) -> "FunctionAnalysis":
        for p in self.func.params:
            n = self.node(p, 0, PARAM)
            self.def_node[p] = n
            self.env.add(p, self.input_object(p, None), G.TRUE)
        for b in self.dom.rpo:
            pc = self.pc(b)
            block = self.func.blocks[b]
            for s in block.stmts:
                self.statement(s, b, pc)
            t = block.term
            if isinstance(t, Return) and t.value is not None:
                out = self.node("$ret", t.label, OUT)
                self.edge(self.operand(t.value), out, DIRECT, pc)
        return self

    def statement(self, s: Stmt, b: str, pc: Guard) -> None:
        if isinstance(s, Alloc):
            dst = self.define(s.dst, s.label)
            obj = MemObject(f"alloc_l{s.label}", "alloc", not s.in_loop, s.label)
            self.env.add(s.dst, obj, pc)
        elif isinstance(s, AddressOf):
            self.define(s.dst, s.label)
            obj = MemObject(f"alloc_{s.var}", "stack", True)
            self.env.add(s.dst, obj, pc)
        elif isinstance(s, Copy):
            src = self.operand(s.src)
            dst = self.define(s.dst, s.label)
            self.edge(src, dst, DIRECT, pc)
            self.env.add_all(s.dst, self.restrict(self.env.get(s.src), pc))
        elif isinstance(s, Phi):
            dst = self.define(s.dst, s.label)
            gates = s.gates or tuple(pc for _ in s.arms)
            for (_, v), gate in zip(s.arms, gates):
                gate = G.TRUE if self.insensitive else gate
                self.edge(self.operand(v), dst, DIRECT, gate)
                self.env.add_all(s.dst, self.restrict(self.env.get(v), gate))
        elif isinstance(s, Store):
            val = self.operand(s.val)
            use = self.node(s.val, s.label, USE)
            self.edge(val, use, DIRECT, pc)
            targets = self.restrict(self.env.get(s.ptr), pc)
            self.write(b, targets, s.label, s.val, pc)
        elif isinstance(s, Load):
            self.load(s, b, pc)
        elif isinstance(s, Free):
            self.free_sites.append(FreeSite(s.label, s.site, self.operand(s.ptr), pc, b))
        elif isinstance(s, Call):
            from .inter import instantiate_summary

            summary = self.summaries.get(s.callee)
            if summary is None:
                raise AnalysisError(f"{self.name}: callee {s.callee} analysed out of order")
            self.call_sites.append(CallSite(s.label, s.callee, pc, b))
            instantiate_summary(self, s, b, pc, summary)
        elif isinstance(s, Havoc):
            for a in s.args:
                self.operand(a)
            if s.dst:
                self.define(s.dst, s.label)
        else:
            raise AnalysisError(f"unexpected statement {s!r}")

    def load(self, s: Load, b: str, pc: Guard) -> None:
        self.operand(s.ptr)
        dst = self.define(s.dst, s.label)
        emitted: Dict[Tuple[int, str], List[Guard]] = {}
        per_object = set()
        visits = 0
        for o, ptr_g in sorted(self.restrict(self.env.get(s.ptr), pc).items()):
            entries, n = self.read_object(o, ptr_g, b)
            visits = max(visits, n)
            for cond, label, v in entries:
                emitted.setdefault((label, v), []).append(cond)
                per_object.add((label, v, o))
        self.load_visits[s.label] = visits
        for (label, v), gs in sorted(emitted.items()):
            self.edge(self.value_node(v, label), dst, DIRECT, G.disj_all(gs))
            for cond in gs:
                self.env.add_all(s.dst, self.restrict(self.env.get(v), cond))
        self.merged_load_edges += len(emitted)
        self.unmerged_load_edges += len(per_object)
