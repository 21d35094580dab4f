"""Hash-consed propositional guards over interned branch atoms.

Guards are kept in negation normal form.  ``Not`` is never stored: negating
a compound guard pushes the negation to the literals (De Morgan), so a
guard is one of ``TRUE``, ``FALSE``, a literal, an ``AND`` or an ``OR``.
Every guard is interned in a global table, so structural equality is
object identity and ``g1 is g2`` is the equivalence test for syntax.

Atoms are interned per :class:`AtomTable` (one per parsed program), while
the guard table is global.  Guards only mention atom ids, so two programs
that happen to number their atoms the same share guard objects; this is
harmless because a guard never needs to know its atom texts.
"""
from __future__ import annotations

import enum
import hashlib
import re
import threading
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _kernel


class SatVerdict(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


class SolverOverflow(RuntimeError):
    """Raised when a formula exceeds the configured atom or decision budget."""


# ---------------------------------------------------------------------------
# atoms

_COMPLEMENT = {">": "<=", "<=": ">", "<": ">=", ">=": "<", "==": "!=", "!=": "=="}
_CMP_RE = re.compile(r"^\s*([A-Za-z_][\w.]*|-?\d+)\s*(<=|>=|==|!=|<|>)\s*([A-Za-z_][\w.]*|-?\d+)\s*$")
_IDENT_RE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*$")


def normalize_condition(text: str) -> str:
    """Canonical spelling of a branch condition: whitespace removed."""
    m = _CMP_RE.match(text)
    if m:
        return f"{m.group(1)}{m.group(2)}{m.group(3)}"
    m = _IDENT_RE.match(text)
    if m:
        return m.group(1)
    raise ValueError(f"malformed condition {text!r}")


@dataclass
class Atom:
    id: int
    source_text: str
    complement: Optional[int] = None


@dataclass
class AtomTable:
    """Interning of condition texts to atoms.

    Complementary comparisons share one propositional variable: the first
    spelling seen becomes the positive literal and the complement spelling
    maps to the same variable with negative sign.  Both spellings get an
    :class:`Atom` record, linked to each other, but only the base record's
    id ever appears inside guards.
    """

    atoms: List[Atom] = field(default_factory=list)
    complements: Dict[int, Atom] = field(default_factory=dict)
    _by_text: Dict[str, Tuple[int, bool]] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def intern(self, cond_text: str) -> Tuple[Atom, bool]:
        text = normalize_condition(cond_text)
        with self._lock:
            hit = self._by_text.get(text)
            if hit is not None:
                var, positive = hit
                return self.atoms[var - 1], positive
            var = len(self.atoms) + 1
            atom = Atom(var, text)
            self.atoms.append(atom)
            self._by_text[text] = (var, True)
            m = _CMP_RE.match(text)
            if m:
                comp = f"{m.group(1)}{_COMPLEMENT[m.group(2)]}{m.group(3)}"
                # the complement spelling gets its own record with the
                # negated id; guards only ever mention the base id
                atom.complement = -var
                self.complements[var] = Atom(-var, comp, complement=var)
                self._by_text[comp] = (var, False)
            return atom, True

    def text_of(self, var: int, positive: bool = True) -> str:
        if positive:
            return self.atoms[var - 1].source_text
        comp = self.complements.get(var)
        return comp.source_text if comp else "!" + self.atoms[var - 1].source_text

    def __len__(self):
        return len(self.atoms)

    def __eq__(self, other):
        if not isinstance(other, AtomTable):
            return NotImplemented
        return [a.source_text for a in self.atoms] == [a.source_text for a in other.atoms]


# ---------------------------------------------------------------------------
# guards

TRUE_K, FALSE_K, LIT_K, AND_K, OR_K = range(5)


class Guard:
    __slots__ = ("kind", "atom", "positive", "children", "digest", "sort_key", "_neg", "_atoms", "_text")

    def __init__(self, kind, atom=0, positive=True, children=()):
        self.kind = kind
        self.atom = atom
        self.positive = positive
        self.children = children
        self._neg = None
        self._atoms = None
        self._text = None
        h = hashlib.blake2b(digest_size=8)
        if kind == LIT_K:
            h.update(f"L{atom}{'+' if positive else '-'}".encode())
        else:
            h.update(bytes([kind]))
            for c in children:
                h.update(c.digest.to_bytes(8, "little"))
        self.digest = int.from_bytes(h.digest(), "little")
        # children are ordered by content, never by creation order, so the
        # canonical text is independent of thread scheduling
        if kind == LIT_K:
            self.sort_key = (1, atom, 0 if positive else 1)
        elif kind in (AND_K, OR_K):
            self.sort_key = (2, self.digest, 0)
        else:
            self.sort_key = (0, kind, 0)

    # structural helpers -------------------------------------------------
    def is_true(self):
        return self.kind == TRUE_K

    def is_false(self):
        return self.kind == FALSE_K

    def atoms(self) -> frozenset:
        if self._atoms is None:
            if self.kind == LIT_K:
                self._atoms = frozenset((self.atom,))
            elif self.kind in (AND_K, OR_K):
                acc = set()
                for c in self.children:
                    acc |= c.atoms()
                self._atoms = frozenset(acc)
            else:
                self._atoms = frozenset()
        return self._atoms

    def size(self) -> int:
        seen = set()
        stack = [self]
        while stack:
            g = stack.pop()
            if id(g) in seen:
                continue
            seen.add(id(g))
            stack.extend(g.children)
        return len(seen)

    def evaluate(self, assignment: Mapping[int, bool]) -> bool:
        k = self.kind
        if k == TRUE_K:
            return True
        if k == FALSE_K:
            return False
        if k == LIT_K:
            return assignment[self.atom] == self.positive
        if k == AND_K:
            return all(c.evaluate(assignment) for c in self.children)
        return any(c.evaluate(assignment) for c in self.children)

    # operators ------------------------------------------------------------
    def __and__(self, other):
        return conj(self, other)

    def __or__(self, other):
        return disj(self, other)

    def __invert__(self):
        return neg(self)

    def __str__(self):
        if self._text is None:
            k = self.kind
            if k == TRUE_K:
                self._text = "true"
            elif k == FALSE_K:
                self._text = "false"
            elif k == LIT_K:
                self._text = f"{'' if self.positive else '!'}p{self.atom}"
            else:
                op = "&" if k == AND_K else "|"
                self._text = f"({op} " + " ".join(str(c) for c in self.children) + ")"
        return self._text

    def __repr__(self):
        return f"Guard({self})"

    def __reduce__(self):
        return (_rebuild, (str(self),))


_table: Dict[tuple, Guard] = {}
_table_lock = threading.RLock()


def _intern(key, kind, atom=0, positive=True, children=()):
    g = _table.get(key)
    if g is not None:
        return g
    with _table_lock:
        g = _table.get(key)
        if g is None:
            g = Guard(kind, atom, positive, children)
            _table[key] = g
    return g


TRUE = _intern((TRUE_K,), TRUE_K)
FALSE = _intern((FALSE_K,), FALSE_K)
TRUE._neg = FALSE
FALSE._neg = TRUE


def lit(atom: int, positive: bool = True) -> Guard:
    if atom <= 0:
        raise ValueError("atom ids start at 1")
    return _intern((LIT_K, atom, positive), LIT_K, atom, positive)


def neg(g: Guard) -> Guard:
    n = g._neg
    if n is not None:
        return n
    if g.kind == LIT_K:
        n = lit(g.atom, not g.positive)
    elif g.kind == AND_K:
        n = _build(OR_K, [neg(c) for c in g.children])
    else:
        n = _build(AND_K, [neg(c) for c in g.children])
    g._neg = n
    if n._neg is None:
        n._neg = g
    return n


def conj(*gs: Guard) -> Guard:
    if len(gs) == 2:
        a, b = gs
        if a is b or b is TRUE:
            return a
        if a is TRUE:
            return b
        if a is FALSE or b is FALSE:
            return FALSE
    return _build(AND_K, gs)


def disj(*gs: Guard) -> Guard:
    if len(gs) == 2:
        a, b = gs
        if a is b or b is FALSE:
            return a
        if a is FALSE:
            return b
        if a is TRUE or b is TRUE:
            return TRUE
    return _build(OR_K, gs)


def conj_all(gs: Iterable[Guard]) -> Guard:
    return _build(AND_K, list(gs))


def disj_all(gs: Iterable[Guard]) -> Guard:
    return _build(OR_K, list(gs))


def implies(a: Guard, b: Guard) -> Guard:
    return disj(neg(a), b)


def _build(kind: int, items: Sequence[Guard]) -> Guard:
    """Smart constructor for AND/OR applying the fixed rewrite set.

    Rules, stated for AND (OR is dual): flatten nested ANDs, drop TRUE,
    FALSE annihilates, dedup children, x & !x -> FALSE, x & (x | y) -> x,
    x & (!x | y) -> x & y, (x | y) & (x | y | z) -> (x | y) and the
    common-factor rule (x | y) & (x | !y) -> x.  Each restart strictly
    shrinks the formula, so the loop terminates.
    """
    unit, zero = (TRUE, FALSE) if kind == AND_K else (FALSE, TRUE)
    dual = OR_K if kind == AND_K else AND_K
    work = list(items)
    while True:
        members: Dict[int, Guard] = {}
        stack = list(work)
        while stack:
            g = stack.pop()
            if g.kind == kind:
                stack.extend(g.children)
            elif g is unit:
                continue
            elif g is zero:
                return zero
            else:
                members[id(g)] = g
        if not members:
            return unit
        for g in members.values():
            if id(neg(g)) in members:
                return zero
        changed = False
        nxt: Dict[int, Guard] = {}
        for g in members.values():
            if g.kind == dual:
                sub = g.children
                if any(id(c) in members for c in sub):
                    changed = True
                    continue
                kept = [c for c in sub if id(neg(c)) not in members]
                if len(kept) != len(sub):
                    changed = True
                    g = _build(dual, kept)
                    if g is zero:
                        return zero
            nxt[id(g)] = g
        if changed:
            work = list(nxt.values())
            continue
        duals = [g for g in nxt.values() if g.kind == dual]
        if len(duals) >= 2:
            sets = [frozenset(id(c) for c in d.children) for d in duals]
            dead = set()
            merged = None
            for i in range(len(duals)):
                if i in dead:
                    continue
                for j in range(len(duals)):
                    if i == j or j in dead:
                        continue
                    a, b = sets[i], sets[j]
                    if a <= b:
                        dead.add(j)
                        continue
                    if len(a) == len(b):
                        da, db = a - b, b - a
                        if len(da) == 1 and len(db) == 1:
                            (x,) = [c for c in duals[i].children if id(c) in da]
                            (y,) = [c for c in duals[j].children if id(c) in db]
                            if neg(x) is y:
                                rest = [c for c in duals[i].children if id(c) not in da]
                                merged = (i, j, _build(dual, rest))
                                break
                if merged:
                    break
            if merged:
                i, j, m = merged
                work = [g for g in nxt.values() if g is not duals[i] and g is not duals[j]] + [m]
                continue
            if dead:
                drop = {id(duals[j]) for j in dead}
                work = [g for g in nxt.values() if id(g) not in drop]
                continue
        break
    kids = sorted(nxt.values(), key=lambda g: g.sort_key)
    if len(kids) == 1:
        return kids[0]
    return _intern((kind, tuple(id(c) for c in kids)), kind, children=tuple(kids))


def simplify(g: Guard) -> Guard:
    """Rebuild ``g`` bottom-up through the smart constructors.

    Construction already normalizes, so this is mostly the identity; it
    matters for guards assembled before some sibling became available
    (the rewrite rules see more context at the top level).
    """
    memo: Dict[int, Guard] = {}

    def go(h: Guard) -> Guard:
        r = memo.get(id(h))
        if r is not None:
            return r
        if h.kind in (AND_K, OR_K):
            r = _build(h.kind, [go(c) for c in h.children])
        else:
            r = h
        memo[id(h)] = r
        return r

    return go(g)


def restrict(g: Guard, assignment: Mapping[int, bool]) -> Guard:
    """Substitute the given atoms by constants and re-simplify."""
    memo: Dict[int, Guard] = {}

    def go(h: Guard) -> Guard:
        r = memo.get(id(h))
        if r is not None:
            return r
        k = h.kind
        if k == LIT_K:
            v = assignment.get(h.atom)
            r = h if v is None else (TRUE if v == h.positive else FALSE)
        elif k in (AND_K, OR_K):
            if not (h.atoms() & assignment.keys()):
                r = h
            else:
                r = _build(k, [go(c) for c in h.children])
        else:
            r = h
        memo[id(h)] = r
        return r

    return go(g)


def parse_guard(text: str) -> Guard:
    """Inverse of ``str(guard)`` for the canonical text form."""
    toks = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def go():
        nonlocal pos
        t = toks[pos]
        pos += 1
        if t == "true":
            return TRUE
        if t == "false":
            return FALSE
        if t == "(":
            op = toks[pos]
            pos += 1
            kids = []
            while toks[pos] != ")":
                kids.append(go())
            pos += 1
            return conj_all(kids) if op == "&" else disj_all(kids)
        positive = not t.startswith("!")
        return lit(int(t.lstrip("!")[1:]), positive)

    g = go()
    if pos != len(toks):
        raise ValueError(f"trailing input in guard text {text!r}")
    return g


def _rebuild(text):
    return parse_guard(text)


# ---------------------------------------------------------------------------
# semi decision: unit propagation

_semi_cache: Dict[int, SatVerdict] = {}


def _units(g: Guard):
    if g.kind == LIT_K:
        return [g]
    if g.kind == AND_K:
        return [c for c in g.children if c.kind == LIT_K]
    return []


def semi_decide(g: Guard) -> SatVerdict:
    """Unit propagation followed by one greedy witness probe.

    Sound in both directions: UNSAT is only reported when propagation
    derives FALSE, SAT only when a concrete assignment satisfies ``g``.
    """
    if g is TRUE:
        return SatVerdict.SAT
    if g is FALSE:
        return SatVerdict.UNSAT
    key = id(g)
    hit = _semi_cache.get(key)
    if hit is not None:
        return hit
    assign: Dict[int, bool] = {}
    cur = g
    verdict = None
    while True:
        units = _units(cur)
        if not units:
            break
        for u in units:
            assign[u.atom] = u.positive
        cur = restrict(cur, assign)
        if cur is FALSE:
            verdict = SatVerdict.UNSAT
            break
        if cur is TRUE:
            verdict = SatVerdict.SAT
            break
    if verdict is None:
        probe = dict(assign)
        for a in sorted(cur.atoms()):
            probe.setdefault(a, _polarity_hint(cur, a))
        for a in g.atoms():
            probe.setdefault(a, True)
        verdict = SatVerdict.SAT if g.evaluate(probe) else SatVerdict.UNKNOWN
    if len(_semi_cache) > 500_000:
        _semi_cache.clear()
    _semi_cache[key] = verdict
    return verdict


def _polarity_hint(g: Guard, atom: int) -> bool:
    pos = negs = 0
    stack = [g]
    seen = set()
    while stack:
        h = stack.pop()
        if id(h) in seen:
            continue
        seen.add(id(h))
        if h.kind == LIT_K and h.atom == atom:
            if h.positive:
                pos += 1
            else:
                negs += 1
        stack.extend(h.children)
    return pos >= negs


# ---------------------------------------------------------------------------
# full decision: CNF + DPLL kernel


@dataclass
class SolverLimits:
    max_atoms: int = 64
    max_decisions: int = 200_000
    distribute_budget: int = 2_000


DEFAULT_LIMITS = SolverLimits()
_full_cache: Dict[int, SatVerdict] = {}


def to_cnf(g: Guard, budget: int = 2000) -> Tuple[int, List[List[int]]]:
    """Clauses in DIMACS-style integers; atom ``k`` is variable ``k``.

    Distribution is tried first; if the clause count would exceed
    ``budget`` the Tseitin encoding is used instead, with auxiliary
    variables numbered above the largest atom.
    """
    nvars = max(g.atoms(), default=0)
    if g is TRUE:
        return nvars, []
    if g is FALSE:
        return nvars, [[]]
    clauses = _distribute(g, budget, {})
    if clauses is not None:
        return nvars, [sorted(c, key=abs) for c in clauses]
    return _tseitin(g, nvars)


def _distribute(g: Guard, budget: int, memo) -> Optional[List[frozenset]]:
    r = memo.get(id(g), 0)
    if r != 0:
        return r
    k = g.kind
    if k == LIT_K:
        out = [frozenset((g.atom if g.positive else -g.atom,))]
    elif k == AND_K:
        out = []
        for c in g.children:
            sub = _distribute(c, budget, memo)
            if sub is None:
                out = None
                break
            out.extend(sub)
            if len(out) > budget:
                out = None
                break
    else:
        out = [frozenset()]
        for c in g.children:
            sub = _distribute(c, budget, memo)
            if sub is None or len(out) * len(sub) > budget:
                out = None
                break
            nxt = []
            for a in out:
                for b in sub:
                    m = a | b
                    if any(-x in m for x in m):
                        continue
                    nxt.append(m)
            out = nxt
    memo[id(g)] = out
    return out


def _tseitin(g: Guard, nvars: int) -> Tuple[int, List[List[int]]]:
    names: Dict[int, int] = {}
    clauses: List[List[int]] = []
    counter = [nvars]

    def var(h: Guard) -> int:
        if h.kind == LIT_K:
            return h.atom if h.positive else -h.atom
        got = names.get(id(h))
        if got is not None:
            return got
        counter[0] += 1
        v = counter[0]
        names[id(h)] = v
        kids = [var(c) for c in h.children]
        if h.kind == AND_K:
            for c in kids:
                clauses.append([-v, c])
            clauses.append([v] + [-c for c in kids])
        else:
            clauses.append([-v] + kids)
            for c in kids:
                clauses.append([v, -c])
        return v

    top = var(g)
    clauses.append([top])
    return counter[0], clauses


def find_model(g: Guard, limits: SolverLimits = DEFAULT_LIMITS) -> Optional[Dict[int, bool]]:
    """A satisfying assignment over ``g``'s atoms, or None when UNSAT."""
    if g is FALSE:
        return None
    atoms = g.atoms()
    if len(atoms) > limits.max_atoms:
        raise SolverOverflow(f"{len(atoms)} atoms exceed the limit of {limits.max_atoms}")
    nvars, clauses = to_cnf(g, limits.distribute_budget)
    status, model = _kernel.dpll(nvars, clauses, limits.max_decisions)
    if status < 0:
        raise SolverOverflow(f"decision budget of {limits.max_decisions} exhausted")
    if status == 0:
        return None
    return {a: bool(model[a]) for a in atoms}


def full_sat(g: Guard, limits: SolverLimits = DEFAULT_LIMITS) -> SatVerdict:
    if g is TRUE:
        return SatVerdict.SAT
    if g is FALSE:
        return SatVerdict.UNSAT
    hit = _full_cache.get(id(g))
    if hit is not None:
        return hit
    semi = semi_decide(g)
    if semi is not SatVerdict.UNKNOWN:
        verdict = semi
    else:
        verdict = SatVerdict.UNSAT if find_model(g, limits) is None else SatVerdict.SAT
    if len(_full_cache) > 500_000:
        _full_cache.clear()
    _full_cache[id(g)] = verdict
    return verdict


def equivalent(a: Guard, b: Guard, limits: SolverLimits = DEFAULT_LIMITS) -> bool:
    if a is b:
        return True
    diff = disj(conj(a, neg(b)), conj(neg(a), b))
    return full_sat(diff, limits) is SatVerdict.UNSAT


def is_valid(g: Guard) -> bool:
    return full_sat(neg(g)) is SatVerdict.UNSAT


# ---------------------------------------------------------------------------
# truth tables (independent of the solver; used as a test oracle)


def truth_table(g: Guard, atoms: Sequence[int]) -> np.ndarray:
    """Vectorized evaluation over all 2**len(atoms) assignments.

    Row ``r`` assigns atom ``atoms[i]`` the bit ``(r >> i) & 1``.
    """
    n = len(atoms)
    rows = np.arange(1 << n, dtype=np.int64)
    cols = {a: ((rows >> i) & 1).astype(bool) for i, a in enumerate(atoms)}
    memo: Dict[int, np.ndarray] = {}

    def go(h: Guard) -> np.ndarray:
        r = memo.get(id(h))
        if r is not None:
            return r
        k = h.kind
        if k == TRUE_K:
            r = np.ones(1 << n, dtype=bool)
        elif k == FALSE_K:
            r = np.zeros(1 << n, dtype=bool)
        elif k == LIT_K:
            r = cols[h.atom] if h.positive else ~cols[h.atom]
        elif k == AND_K:
            r = np.logical_and.reduce([go(c) for c in h.children])
        else:
            r = np.logical_or.reduce([go(c) for c in h.children])
        memo[id(h)] = r
        return r

    return go(g)


def clear_caches() -> None:
    _semi_cache.clear()
    _full_cache.clear()
