"""The guarded value-flow graph: nodes ``value@label`` and guarded edges."""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

from . import guard as G
from .guard import Guard, SatVerdict


class Node(NamedTuple):
    func: str
    value: str
    label: int

    def __str__(self):
        return f"{self.func}:{self.value}@{self.label}"


# node kinds; only DEF, PARAM and USE nodes stand for program values
DEF, PARAM, USE, IN, OUT, AUX, INST = "def", "param", "use", "in", "out", "aux", "inst"
PROGRAM_KINDS = frozenset((DEF, PARAM, USE))
FORMAL_IN = frozenset((PARAM, IN))
FORMAL_OUT = frozenset((OUT, AUX))

DIRECT, SUMMARY, CALL, RETURN = "direct", "summary", "call", "return"
EDGE_KINDS = (DIRECT, SUMMARY, CALL, RETURN)


@dataclass
class Edge:
    src: Node
    dst: Node
    kind: str
    guard: Guard
    site: int = 0  # call label for call/return bind edges

    @property
    def key(self):
        return (self.src, self.dst, self.kind, self.site)


class GraphError(Exception):
    pass


class ValueFlowGraph:
    def __init__(self):
        self.nodes: Dict[Node, str] = {}
        self.edges: Dict[tuple, Edge] = {}
        self.succ: Dict[Node, List[Edge]] = {}
        self.pred: Dict[Node, List[Edge]] = {}
        self.pruned = 0
        self.frozen = False
        self._lock = threading.Lock()

    def add_node(self, n: Node, kind: str) -> Node:
        old = self.nodes.get(n)
        if old is None:
            self.nodes[n] = kind
        elif old != kind:
            raise GraphError(f"node {n} registered as {old} and {kind}")
        return n

    def kind(self, n: Node) -> str:
        return self.nodes[n]

    def upsert_edge(self, src: Node, dst: Node, kind: str, guard: Guard, site: int = 0) -> Optional[Edge]:
        """Insert an edge or disjoin its guard into the existing one.

        Guards that unit propagation refutes are dropped and counted.
        """
        if self.frozen:
            raise GraphError("graph is frozen")
        if kind not in EDGE_KINDS:
            raise GraphError(f"unknown edge kind {kind!r}")
        guard = G.simplify(guard)
        if guard is G.FALSE or G.semi_decide(guard) is SatVerdict.UNSAT:
            self.pruned += 1
            return None
        key = (src, dst, kind, site)
        e = self.edges.get(key)
        if e is not None:
            e.guard = G.disj(e.guard, guard)
            return e
        e = Edge(src, dst, kind, guard, site)
        self.edges[key] = e
        self.succ.setdefault(src, []).append(e)
        self.pred.setdefault(dst, []).append(e)
        return e

    def merge(self, other: "ValueFlowGraph") -> None:
        with self._lock:
            for n, k in sorted(other.nodes.items()):
                self.add_node(n, k)
            for key in sorted(other.edges, key=_edge_sort_key):
                e = other.edges[key]
                self.upsert_edge(e.src, e.dst, e.kind, e.guard, e.site)
            self.pruned += other.pruned

    def freeze(self) -> "ValueFlowGraph":
        self.frozen = True
        for lst in self.succ.values():
            lst.sort(key=lambda e: _edge_sort_key(e.key))
        for lst in self.pred.values():
            lst.sort(key=lambda e: _edge_sort_key(e.key))
        return self

    def out_edges(self, n: Node) -> List[Edge]:
        return self.succ.get(n, [])

    def in_edges(self, n: Node) -> List[Edge]:
        return self.pred.get(n, [])

    def count(self, kind: Optional[str] = None) -> int:
        if kind is None:
            return len(self.edges)
        return sum(1 for e in self.edges.values() if e.kind == kind)

    # export -----------------------------------------------------------
    def export(self, fmt: str) -> str:
        if fmt == "dot":
            return self.to_dot()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown export format {fmt!r}")

    def to_dot(self) -> str:
        lines = ["digraph vfg {"]
        for n in sorted(self.nodes, key=_node_sort_key):
            lines.append(f'  "{n}" [kind={self.nodes[n]}];')
        for key in sorted(self.edges, key=_edge_sort_key):
            e = self.edges[key]
            site = f" site={e.site}" if e.site else ""
            lines.append(f'  "{e.src}" -> "{e.dst}" [kind={e.kind}{site} label="{e.guard}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        nodes = [
            {"func": n.func, "value": n.value, "label": n.label, "kind": self.nodes[n]}
            for n in sorted(self.nodes, key=_node_sort_key)
        ]
        edges = []
        for key in sorted(self.edges, key=_edge_sort_key):
            e = self.edges[key]
            d = {"src": str(e.src), "dst": str(e.dst), "kind": e.kind, "guard": str(e.guard)}
            if e.site:
                d["site"] = e.site
            edges.append(d)
        return json.dumps({"nodes": nodes, "edges": edges}, indent=1) + "\n"


def _node_sort_key(n: Node):
    return (n.func, n.label, n.value)


def _edge_sort_key(key):
    src, dst, kind, site = key
    return (_node_sort_key(src), _node_sort_key(dst), kind, site)
