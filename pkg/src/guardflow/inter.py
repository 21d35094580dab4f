"""Interprocedural part: call graph, summaries and their instantiation.

A summary exposes, besides the callee's return value, one auxiliary value
``$R<n>`` per group of caller-visible objects the callee modified.  At a
call site each auxiliary value becomes a single caller value
``callee.R<n>@<call>`` that is stored into the caller's images of those
objects, so the callee's internal stores are never copied into callers.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from . import guard as G
from .domain import MemObject, join_env
from .guard import Guard, SatVerdict
from .intra import FunctionAnalysis, InputInfo
from .ir import Call, Program, SemanticError
from .vfg import AUX, CALL, DIRECT, FORMAL_IN, FORMAL_OUT, INST, RETURN, SUMMARY, Edge, Node


# ---------------------------------------------------------------------------
# call graph


@dataclass
class CallGraph:
    callees: Dict[str, List[Tuple[int, str]]]  # function -> [(call label, callee)]
    callers: Dict[str, List[Tuple[str, int]]]  # function -> [(caller, call label)]
    topo_order: List[str]  # callees before callers
    level: Dict[str, int]  # 0 for leaves, 1 + max(level of callees) otherwise

    @property
    def roots(self) -> List[str]:
        return [f for f in self.topo_order if not self.callers[f]]

    def depth(self) -> int:
        """Longest call chain, counted in functions."""
        return 1 + max(self.level.values(), default=0)


def build_call_graph(prog: Program) -> CallGraph:
    callees: Dict[str, List[Tuple[int, str]]] = {f: [] for f in prog.functions}
    callers: Dict[str, List[Tuple[str, int]]] = {f: [] for f in prog.functions}
    for f in prog.functions.values():
        for _, s in f.statements():
            if isinstance(s, Call):
                if s.callee not in prog.functions:
                    raise SemanticError(f"function {f.name}: unknown call target {s.callee!r}")
                callees[f.name].append((s.label, s.callee))
                callers[s.callee].append((f.name, s.label))
    order: List[str] = []
    state: Dict[str, int] = {}

    def visit(f):
        st = state.get(f, 0)
        if st == 2:
            return
        if st == 1:
            raise SemanticError(f"recursive call cycle through {f} (unroll first)")
        state[f] = 1
        for _, g in callees[f]:
            visit(g)
        state[f] = 2
        order.append(f)

    for f in prog.functions:
        visit(f)
    level: Dict[str, int] = {}
    for f in order:
        level[f] = 1 + max((level[g] for _, g in callees[f]), default=-1)
    return CallGraph(callees, callers, order, level)


def reach_conditions(cg: CallGraph, call_pc: Mapping[int, Guard]) -> Dict[str, Guard]:
    """Condition under which a function is invoked at all from some root."""
    reach: Dict[str, Guard] = {}
    for f in reversed(cg.topo_order):
        if not cg.callers[f]:
            reach[f] = G.TRUE
        else:
            reach[f] = G.disj_all(G.conj(call_pc[c], reach[g]) for g, c in cg.callers[f])
    return reach


# ---------------------------------------------------------------------------
# summaries


@dataclass
class AuxVar:
    name: str
    depth: int
    source: str  # the interface variable or auxiliary value it summarizes
    targets: Dict[MemObject, Guard]
    content: List[Tuple[Guard, int, str]]
    env: Dict[MemObject, Guard]
    node: Node


@dataclass
class FunctionSummary:
    name: str
    params: Tuple[str, ...]
    ret_label: int
    ret_node: Optional[Node]
    ret_env: Dict[MemObject, Guard]
    inputs: List[InputInfo]
    param_objects: Dict[str, MemObject]
    aux: List[AuxVar] = field(default_factory=list)
    summary_edges: List[Edge] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def shape(self) -> dict:
        """Post-summarization view: each summarized interface variable
        points to one object holding one auxiliary value."""
        out = {}
        for r in self.aux:
            o = f"o_{r.source}"
            out[r.source] = {
                "env": [["true", o]],
                "store": {o: [["true", self.ret_label, r.name]]},
            }
        return out

    def to_json(self) -> str:
        def env(d):
            return [[str(g), o.name] for o, g in sorted(d.items())]

        data = {
            "function": self.name,
            "params": list(self.params),
            "ret": str(self.ret_node) if self.ret_node else None,
            "ret_env": env(self.ret_env),
            "shape": self.shape(),
            "aux": [
                {
                    "name": r.name,
                    "depth": r.depth,
                    "source": r.source,
                    "targets": env(r.targets),
                    "content": [[str(g), label, v] for g, label, v in r.content],
                    "env": env(r.env),
                }
                for r in self.aux
            ],
            "summary_edges": [
                {"src": str(e.src), "dst": str(e.dst), "guard": str(e.guard)} for e in self.summary_edges
            ],
            "warnings": self.warnings,
        }
        return json.dumps(data, indent=1, sort_keys=True) + "\n"


def summarize(an: FunctionAnalysis) -> FunctionSummary:
    f = an.func
    ret = f.ret
    exit_block = f.exit_block
    summ = FunctionSummary(
        f.name,
        f.params,
        ret.label,
        Node(f.name, "$ret", ret.label) if ret.value is not None else None,
        dict(an.env.get(ret.value)) if ret.value is not None else {},
        [],
        {p: next(iter(an.env.get(p))) for p in f.params},
    )
    handled = set()
    work = deque()
    for p in f.params:
        work.append((p, dict(an.env.get(p)), 1))
    if ret.value is not None:
        work.append((ret.value, dict(an.env.get(ret.value)), 1))

    def drain():
        while work:
            x, targets, depth = work.popleft()
            content: List[Tuple[Guard, int, str]] = []
            touched: Dict[MemObject, Guard] = {}
            for o in sorted(targets):
                if o in handled:
                    continue
                handled.add(o)
                tg = targets[o]
                info = an.inputs.get(o)
                if not an.is_modified(o):
                    # unmodified: nothing to export at this level, but the
                    # callee may have modified deeper objects reached
                    # through the caller's own content
                    if info is not None and info.in_value is not None:
                        work.append((info.in_value, dict(an.env.get(info.in_value)), depth + 1))
                    continue
                entries, _ = an.read_object(o, tg, exit_block, create_in=True)
                touched[o] = tg
                content.extend(entries)
            if touched:
                make_aux(x, touched, content, depth)

    def make_aux(x, touched, content, depth):
        if depth > an.config.aux_depth:
            msg = f"{f.name}: auxiliary chain for {x} truncated at depth {an.config.aux_depth}"
            summ.warnings.append(msg)
            return
        name = f"$R{len(summ.aux) + 1}"
        node = an.node(name, ret.label, AUX)
        env: Dict[MemObject, Guard] = {}
        grouped: Dict[Tuple[int, str], List[Guard]] = {}
        for cond, label, v in content:
            grouped.setdefault((label, v), []).append(cond)
            env = join_env(env, an.restrict(an.env.get(v), cond))
        for (label, v), gs in sorted(grouped.items()):
            an.edge(an.value_node(v, label), node, DIRECT, G.disj_all(gs))
        r = AuxVar(name, depth, x, touched, content, env, node)
        summ.aux.append(r)
        if env:
            work.append((name, env, depth + 1))

    drain()
    # caller memory modified through paths no longer visible at exit
    while True:
        extra = [o for o in an.store.objects() if o in an.inputs and o not in handled]
        if not extra:
            break
        o = extra[0]
        handled.add(o)
        entries, _ = an.read_object(o, G.TRUE, exit_block, create_in=True)
        make_aux(an.inputs[o].path, {o: G.TRUE}, entries, an.inputs[o].path.count("*") + 1)
        drain()
    summ.inputs = sorted(an.inputs.values(), key=lambda i: (i.path.count("*"), i.path))
    summ.warnings.extend(an.warnings)
    an.summary = summ
    return summ


# ---------------------------------------------------------------------------
# instantiation at a call site


def instance_name(callee: str, aux: str, call_label: int) -> str:
    return f"{callee}.{aux.lstrip('$')}@{call_label}"


def instantiate_summary(an: FunctionAnalysis, s: Call, block: str, pc: Guard, summ: FunctionSummary) -> None:
    c = s.label
    callee = summ.name
    # images of the callee's input objects in the caller's memory
    image: Dict[MemObject, Dict[MemObject, Guard]] = {}
    for p, a in zip(summ.params, s.args):
        an.edge(an.operand(a), Node(callee, p, 0), CALL, pc, site=c)
        image[summ.param_objects[p]] = an.restrict(an.env.get(a), pc)
    for info in summ.inputs:
        if info.in_value is None:
            continue
        child = image.setdefault(info.child, {})
        in_node = Node(callee, info.in_value, 0)
        for x in sorted(image.get(info.obj, {})):
            g = image[info.obj][x]
            entries, _ = an.read_object(x, g, block)
            for cond, label, v in entries:
                an.edge(an.value_node(v, label), in_node, CALL, cond, site=c)
                image[info.child] = child = join_env(child, an.restrict(an.env.get(v), cond))

    def inst(o: MemObject) -> Dict[MemObject, Guard]:
        if o in image:
            return image[o]
        return {o.instantiate(c): G.TRUE}

    def translate(entries: Mapping[MemObject, Guard]) -> Dict[MemObject, Guard]:
        out: Dict[MemObject, Guard] = {}
        for o in sorted(entries):
            h = entries[o]
            for x, g in inst(o).items():
                out = join_env(out, {x: G.conj(h, g, pc)})
        return an.restrict(out, G.TRUE)

    for r in summ.aux:
        name = instance_name(callee, r.name, c)
        node = an.node(name, c, INST)
        an.env.define(name)
        an.edge(r.node, node, RETURN, pc, site=c)
        an.env.add_all(name, translate(r.env))
        an.write(block, translate(r.targets), c, name, pc)
    if s.dst:
        dst = an.define(s.dst, c)
        if summ.ret_node is not None:
            an.edge(summ.ret_node, dst, RETURN, pc, site=c)
            an.env.add_all(s.dst, translate(summ.ret_env))


# ---------------------------------------------------------------------------
# summary edges


def connect_formal_summary_edges(an: FunctionAnalysis, summaries: Mapping[str, FunctionSummary]) -> List[Edge]:
    """Formal-in to formal-out edges guarded by the disjunction over paths.

    Paths may cross calls inside the function through the callees' own
    summary edges (matched call and return at the same site).
    """
    g = an.graph
    fname = an.name
    callee_summary_edges: Dict[Node, List[Edge]] = {}
    for summ in summaries.values():
        for e in summ.summary_edges:
            callee_summary_edges.setdefault(e.src, []).append(e)
    returns: Dict[Tuple[Node, int], List[Edge]] = {}
    for e in g.edges.values():
        if e.kind == RETURN and e.dst.func == fname:
            returns.setdefault((e.src, e.site), []).append(e)

    def succ(u: Node):
        for e in g.out_edges(u):
            if e.kind == DIRECT and e.dst.func == fname:
                yield e.dst, e.guard
            elif e.kind == CALL and e.src.func == fname:
                for se in callee_summary_edges.get(e.dst, ()):
                    for rb in returns.get((se.dst, e.site), ()):
                        yield rb.dst, G.conj(e.guard, se.guard, rb.guard)

    formal_ins = sorted(n for n, k in g.nodes.items() if n.func == fname and k in FORMAL_IN)
    out: List[Edge] = []
    for fi in formal_ins:
        # topological accumulation over the part of the DAG reachable from fi
        adj: Dict[Node, List[Tuple[Node, Guard]]] = {}
        stack = [fi]
        while stack:
            u = stack.pop()
            if u in adj:
                continue
            adj[u] = list(succ(u))
            stack.extend(v for v, _ in adj[u] if v not in adj)
        indeg = {u: 0 for u in adj}
        for u in adj:
            for v, _ in adj[u]:
                indeg[v] += 1
        acc: Dict[Node, Guard] = {fi: G.TRUE}
        ready = [fi]
        done = 0
        while ready:
            u = ready.pop()
            done += 1
            gu = acc.get(u, G.FALSE)
            for v, ge in adj[u]:
                if gu is not G.FALSE:
                    acc[v] = G.disj(acc.get(v, G.FALSE), G.conj(gu, ge))
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
        if done != len(adj):
            raise RuntimeError(f"{fname}: cycle in local value-flow graph")
        for v in sorted(acc):
            if v != fi and g.nodes.get(v) in FORMAL_OUT:
                e = g.upsert_edge(fi, v, SUMMARY, acc[v])
                if e is not None:
                    out.append(e)
    return out
