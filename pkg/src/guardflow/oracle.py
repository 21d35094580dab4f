"""Reference interpreter that enumerates every branch-atom assignment.

Each run executes every function nobody calls, starting from fresh
memory.  Their parameters point to lazily created *input cells*: reading
an input cell that was never written produces a pointer to another fresh
input cell.  Every runtime value carries the chain of graph nodes it
flowed through, so dependences, slices and double frees can be read off
a run directly and compared with the static analysis.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .ir import (
    AddressOf, Alloc, Branch, Call, Copy, Free, Function, Havoc, Jump, Load, Phi, Program, Return, Store,
)
from .unroll import unroll
from .vfg import Node

ATOM_LIMIT = 20


class OracleRefusal(Exception):
    """The program has more atoms than the enumeration limit allows."""

    def __init__(self, atoms: int, limit: int):
        super().__init__(f"{atoms} atoms exceed the enumeration limit of {limit}")
        self.atoms = atoms
        self.limit = limit


Chain = Tuple[Node, ...]


@dataclass(frozen=True)
class Cell:
    """A runtime memory object."""

    uid: int
    what: str  # "alloc_l7", "m", "in(p)", ...


@dataclass
class Value:
    target: Optional[Cell]  # None for an unknown or null pointer
    chain: Chain


@dataclass
class ConcreteState:
    """Heap of one run; frames live on the Python stack."""

    heap: Dict[Cell, Value] = field(default_factory=dict)
    freed: Dict[Cell, List[int]] = field(default_factory=dict)
    lazy: Dict[Cell, str] = field(default_factory=dict)  # input cells -> access path


@dataclass
class OracleResult:
    atoms: int
    dependence: Dict[Tuple[Node, Node], Set[int]] = field(default_factory=dict)
    double_frees: Set[Tuple[int, int]] = field(default_factory=set)
    producers: Dict[Node, Set[int]] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)

    def pairs(self) -> Set[Tuple[Node, Node]]:
        return set(self.dependence)

    def to_json(self) -> str:
        data = {
            "atoms": self.atoms,
            "assignments": 1 << self.atoms,
            "dependence": [
                [str(s), str(d), sorted(rows)] for (s, d), rows in sorted(self.dependence.items())
            ],
            "double_frees": [list(p) for p in sorted(self.double_frees)],
            "producers": {str(n): sorted(ls) for n, ls in sorted(self.producers.items())},
            "violations": sorted(set(self.violations)),
        }
        return json.dumps(data, indent=1) + "\n"


class _Run:
    def __init__(self, prog: Program, row: int, result: OracleResult, max_depth: int):
        self.prog = prog
        self.row = row
        self.result = result
        self.max_depth = max_depth
        self.state = ConcreteState()
        self.next_uid = 1

    def truth(self, atom: int, positive: bool) -> bool:
        bit = bool(self.row >> (atom - 1) & 1)
        return bit if positive else not bit

    def new_cell(self, what: str) -> Cell:
        self.next_uid += 1
        return Cell(self.next_uid - 1, what)

    def site(self, label: int) -> int:
        return self.origins.get(label, label)

    # bookkeeping ----------------------------------------------------------
    def record(self, node: Node, chain: Chain, program_value: bool = True) -> None:
        labels = {self.site(n.label) for n in chain if n.label > 0}
        if node.label > 0:
            labels.add(self.site(node.label))
        self.result.producers.setdefault(node, set()).update(labels)
        if program_value:
            for n in chain:
                if n != node and n in self.values:
                    self.result.dependence.setdefault((n, node), set()).add(self.row)

    # execution ------------------------------------------------------------
    def root(self, f: Function) -> None:
        env: Dict[str, Value] = {}
        for p in f.params:
            cell = self.new_cell(f"in({p})")
            self.state.lazy[cell] = p
            node = Node(f.name, p, 0)
            env[p] = Value(cell, (node,))
            self.record(node, ())
        self.execute(f, env, 1, 0)

    def read(self, cell: Optional[Cell]) -> Value:
        if cell is None:
            return Value(None, ())
        v = self.state.heap.get(cell)
        if v is None:
            path = self.state.lazy.get(cell)
            if path is None:
                return Value(None, ())  # uninitialised memory
            child = self.new_cell(f"in(*{path})")
            self.state.lazy[child] = "*" + path
            v = self.state.heap[cell] = Value(child, ())
        return v

    def reachable(self, v: Value, depth: int) -> List[Tuple[Cell, int]]:
        """Cells along the pointer chain from ``v``, with their depth.  A
        cell can repeat when the chain is cyclic."""
        out = []
        cell = v.target
        d = 0
        while cell is not None and d <= depth:
            out.append((cell, d))
            nxt = self.state.heap.get(cell)
            cell = nxt.target if nxt is not None else None
            d += 1
        return out

    def check_aliasing(self, f: Function, label: int, args: List[Value]) -> None:
        """Distinct access paths into caller memory must reach distinct cells."""
        owner: Dict[Cell, Tuple[int, int]] = {}
        for i, v in enumerate(args):
            for cell, d in self.reachable(v, self.max_depth):
                prev = owner.setdefault(cell, (i, d))
                if prev != (i, d):
                    self.result.violations.append(
                        f"call to {f.name} at label {self.site(label)}: arguments share memory"
                    )
                    return

    def check_interface(self, f: Function, s, ptr: Value, mark: int) -> None:
        """A callee must only see caller memory that exists: it must not
        dereference a null parameter or read a caller cell never written."""
        if not mark:
            return
        cell = ptr.target
        if cell is None:
            if any(n.func == f.name and n.label == 0 for n in ptr.chain):
                self.result.violations.append(f"{f.name} at label {self.site(s.label)}: null from caller dereferenced")
        elif isinstance(s, Load) and cell.uid < mark and cell not in self.state.heap and cell not in self.state.lazy:
            self.result.violations.append(f"{f.name} at label {self.site(s.label)}: reads uninitialised caller memory")

    def execute(self, f: Function, env: Dict[str, Value], depth: int, mark: int) -> Value:
        """Run ``f``; cells numbered below ``mark`` belong to its callers."""
        block = f.blocks[f.entry]
        prev = None
        while True:
            for s in block.stmts:
                self.statement(f, s, env, prev, depth, mark)
            t = block.term
            if isinstance(t, Return):
                if t.value is None:
                    return Value(None, ())
                return env[t.value]
            if isinstance(t, Jump):
                nxt = t.target
            elif isinstance(t, Branch):
                nxt = t.then if self.truth(t.atom, t.positive) else t.els
            else:  # pragma: no cover - the parser rejects anything else
                raise TypeError(t)
            prev = block.name
            block = f.blocks[nxt]

    def define(self, f: Function, env, name: str, label: int, target: Optional[Cell], chain: Chain) -> None:
        node = Node(f.name, name, label)
        self.record(node, chain)
        env[name] = Value(target, chain + (node,))

    def statement(self, f: Function, s, env: Dict[str, Value], prev: Optional[str], depth: int, mark: int) -> None:
        if isinstance(s, Alloc):
            self.define(f, env, s.dst, s.label, self.new_cell(f"alloc_l{s.label}"), ())
        elif isinstance(s, AddressOf):
            key = "&" + s.var
            if key not in env:
                env[key] = Value(self.new_cell(s.var), ())
            self.define(f, env, s.dst, s.label, env[key].target, ())
        elif isinstance(s, Copy):
            v = env[s.src]
            self.define(f, env, s.dst, s.label, v.target, v.chain)
        elif isinstance(s, Phi):
            arm = dict(s.arms)[prev]
            v = env[arm]
            self.define(f, env, s.dst, s.label, v.target, v.chain)
        elif isinstance(s, Load):
            self.check_interface(f, s, env[s.ptr], mark)
            v = self.read(env[s.ptr].target)
            self.define(f, env, s.dst, s.label, v.target, v.chain)
        elif isinstance(s, Store):
            self.check_interface(f, s, env[s.ptr], mark)
            ptr = env[s.ptr].target
            v = env[s.val]
            use = Node(f.name, s.val, s.label)
            self.record(use, v.chain, program_value=False)
            if ptr is not None:
                self.state.heap[ptr] = Value(v.target, v.chain + (use,))
        elif isinstance(s, Free):
            cell = env[s.ptr].target
            if cell is not None:
                here = self.site(s.label)
                earlier = self.state.freed.setdefault(cell, [])
                for other in earlier:
                    self.result.double_frees.add(tuple(sorted((other, here))))
                earlier.append(here)
        elif isinstance(s, Call):
            callee = self.prog.functions[s.callee]
            args = [env[a] for a in s.args]
            self.check_aliasing(callee, s.label, args)
            inner: Dict[str, Value] = {}
            for p, v in zip(callee.params, args):
                node = Node(callee.name, p, 0)
                self.record(node, v.chain)
                inner[p] = Value(v.target, v.chain + (node,))
            ret = self.execute(callee, inner, depth + 1, self.next_uid)
            if s.dst:
                self.define(f, env, s.dst, s.label, ret.target, ret.chain)
        elif isinstance(s, Havoc):
            if s.dst:
                self.define(f, env, s.dst, s.label, self.new_cell(f"havoc_l{s.label}"), ())
        else:  # pragma: no cover
            raise TypeError(s)


def enumerate_runs(
    prog: Program,
    atom_limit: int = ATOM_LIMIT,
    unroll_k: int = 2,
    recursion_depth: int = 2,
    unrolled: bool = False,
    max_depth: int = 3,
) -> OracleResult:
    """Run every root function under all ``2**atoms`` assignments.

    ``max_depth`` bounds how far pointer chains are followed when
    checking that call arguments do not share memory."""
    p = prog if unrolled else unroll(prog, unroll_k, recursion_depth)
    k = len(p.atoms.atoms)
    if k > atom_limit:
        raise OracleRefusal(k, atom_limit)
    result = OracleResult(k)
    called = {s.callee for f in p.functions.values() for _, s in f.statements() if isinstance(s, Call)}
    roots = [f for name, f in p.functions.items() if name not in called]
    origins = {}
    values = set()
    for f in p.functions.values():
        values.update(Node(f.name, q, 0) for q in f.params)
        for _, s in f.statements():
            origins[s.label] = s.site
            for d in s.defs():
                values.add(Node(f.name, d, s.label))
    for row in range(1 << k):
        for f in roots:
            run = _Run(p, row, result, max_depth)
            run.origins = origins
            run.values = values
            run.root(f)
    return result
