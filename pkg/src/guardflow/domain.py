"""Abstract domain: memory objects, the points-to environment and the store.

The environment maps a value name to ``{object: guard}``; keeping one guard
per object is what makes the "one entry per (value, object)" invariant
hold by construction.  The store keeps, per block and object, a list of
entries ordered newest first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from . import guard as G
from .guard import Guard, SatVerdict


@dataclass(frozen=True, order=True)
class MemObject:
    """An abstract memory object.

    ``kind`` is ``alloc`` (an ``alloc`` site), ``stack`` (the target of
    ``&name``), ``input`` (caller memory seen through a parameter) or an
    instantiated copy of one of these in a caller, marked by ``@l<call>``
    suffixes in ``name``.
    """

    name: str
    kind: str = field(compare=False)
    singleton: bool = field(compare=False)
    site: int = field(default=0, compare=False)

    def instantiate(self, call_label: int) -> "MemObject":
        return MemObject(f"{self.name}@l{call_label}", "inst", self.singleton, self.site)

    def __str__(self):
        return self.name


EnvEntries = Dict[MemObject, Guard]


def _live(g: Guard) -> bool:
    return g is not G.FALSE and G.semi_decide(g) is not SatVerdict.UNSAT


def pi_env(entries: Mapping[MemObject, Guard], pre: Guard) -> EnvEntries:
    """Restrict every entry by ``pre``; entries that become UNSAT are dropped."""
    if pre is G.TRUE:
        return dict(entries)
    out = {}
    for o, g in entries.items():
        h = G.conj(g, pre)
        if _live(h):
            out[o] = h
    return out


def join_env(a: Mapping[MemObject, Guard], b: Mapping[MemObject, Guard]) -> EnvEntries:
    out = dict(a)
    for o, g in b.items():
        out[o] = G.disj(out[o], g) if o in out else g
    return out


@dataclass(frozen=True)
class StoreEntry:
    guard: Guard
    label: int
    value: str
    strong: bool = False


def pi_store(entries: Iterable[StoreEntry], pre: Guard) -> List[StoreEntry]:
    out = []
    for e in entries:
        h = G.conj(e.guard, pre)
        if _live(h):
            out.append(StoreEntry(h, e.label, e.value, e.strong))
    return out


class PointsToEnv:
    def __init__(self):
        self.map: Dict[str, EnvEntries] = {}

    def get(self, v: str) -> EnvEntries:
        return self.map.get(v, {})

    def add(self, v: str, o: MemObject, g: Guard) -> None:
        if not _live(g):
            return
        cur = self.map.setdefault(v, {})
        cur[o] = G.disj(cur[o], g) if o in cur else g

    def add_all(self, v: str, entries: Mapping[MemObject, Guard]) -> None:
        cur = self.map.setdefault(v, {})
        for o, g in entries.items():
            if _live(g):
                cur[o] = G.disj(cur[o], g) if o in cur else g

    def define(self, v: str) -> None:
        self.map.setdefault(v, {})

    def to_json(self) -> dict:
        return {
            v: [[str(g), o.name] for o, g in sorted(es.items(), key=lambda kv: kv[0].name)]
            for v, es in sorted(self.map.items())
        }


class AbstractStore:
    def __init__(self):
        self.blocks: Dict[str, Dict[MemObject, List[StoreEntry]]] = {}

    def entries(self, block: str, o: MemObject) -> List[StoreEntry]:
        return self.blocks.get(block, {}).get(o, [])

    def insert(self, block: str, o: MemObject, e: StoreEntry) -> None:
        """Newest-first insertion; a strong entry replaces the block's list.

        An entry with the same (label, value) as an existing one is merged
        into it by disjoining guards, keeping its position.
        """
        lst = self.blocks.setdefault(block, {}).setdefault(o, [])
        if e.strong:
            lst[:] = [e]
            return
        for i, old in enumerate(lst):
            if old.label == e.label and old.value == e.value:
                lst[i] = StoreEntry(G.disj(old.guard, e.guard), old.label, old.value, old.strong)
                return
        lst.insert(0, e)

    def objects(self):
        seen = set()
        for per in self.blocks.values():
            seen.update(o for o, lst in per.items() if lst)
        return sorted(seen)

    def to_json(self) -> dict:
        out = {}
        for b in sorted(self.blocks):
            per = {
                o.name: [[str(e.guard), e.label, e.value, e.strong] for e in lst]
                for o, lst in sorted(self.blocks[b].items())
                if lst
            }
            if per:
                out[b] = per
        return out


def dump_state(env: PointsToEnv, store: AbstractStore) -> str:
    return json.dumps({"env": env.to_json(), "store": store.to_json()}, indent=2, sort_keys=True)
