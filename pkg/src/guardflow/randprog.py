"""Seeded generator of small loop-free programs for differential testing.

Programs are built from straight-line code and nested if/else diamonds
whose join blocks carry phis.  Function ``f<i>`` only calls ``f<j>`` with
``j > i``, so the call graph is acyclic.  Conditions mix plain atoms with
comparisons and their complements so that complement pairing gets
exercised.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

from .ir import Program, parse


@dataclass
class GenConfig:
    max_atoms: int = 6
    max_functions: int = 4
    max_statements: int = 30
    max_params: int = 2
    max_nesting: int = 2


_COMPARISONS = [("i < n", "i >= n"), ("x == y", "x != y"), ("k > 0", "k <= 0")]


@dataclass
class _Func:
    name: str
    params: List[str]
    lines: List[str] = field(default_factory=list)
    scope: List[str] = field(default_factory=list)
    fresh: int = 0
    block: str = "entry"
    returns: bool = False


class _Gen:
    def __init__(self, rng: random.Random, cfg: GenConfig):
        self.rng = rng
        self.cfg = cfg
        n_atoms = rng.randint(1, cfg.max_atoms)
        pool = [f"c{i}" for i in range(n_atoms)]
        # swap some plain atoms for comparisons (whose complements share the atom)
        for i, (pos, neg) in enumerate(_COMPARISONS[: n_atoms // 2]):
            if rng.random() < 0.5:
                pool[i] = (pos, neg)
        self.conds = pool
        self.budget = cfg.max_statements
        self.arity: Dict[str, int] = {}

    def cond(self) -> str:
        c = self.rng.choice(self.conds)
        if isinstance(c, tuple):
            return self.rng.choice(c)
        return c

    def value(self, f: _Func) -> Optional[str]:
        return self.rng.choice(f.scope) if f.scope else None

    def name(self, f: _Func, stem: str) -> str:
        f.fresh += 1
        return f"{stem}{f.fresh}"

    def stmt(self, f: _Func, callees: List[str]) -> None:
        self.budget -= 1
        r = self.rng.random()
        v = self.value(f)
        if v is None or r < 0.2:
            x = self.name(f, "a")
            f.lines.append(f"  {x} = alloc")
            f.scope.append(x)
        elif r < 0.27:
            x = self.name(f, "s")
            f.lines.append(f"  {x} = &m{self.rng.randint(1, 2)}")
            f.scope.append(x)
        elif r < 0.4:
            x = self.name(f, "v")
            f.lines.append(f"  {x} = {v}")
            f.scope.append(x)
        elif r < 0.6:
            x = self.name(f, "l")
            f.lines.append(f"  {x} = load {v}")
            f.scope.append(x)
        elif r < 0.8:
            f.lines.append(f"  store {v}, {self.value(f)}")
        elif r < 0.88 or not callees:
            f.lines.append(f"  free {v}")
        else:
            g = self.rng.choice(callees)
            args = ", ".join(self.value(f) for _ in range(self.arity[g]))
            if self.rng.random() < 0.7:
                x = self.name(f, "r")
                f.lines.append(f"  {x} = call {g}({args})")
                f.scope.append(x)
            else:
                f.lines.append(f"  call {g}({args})")

    def region(self, f: _Func, callees: List[str], depth: int) -> None:
        for _ in range(self.rng.randint(1, 4)):
            if self.budget <= 0:
                return
            if depth < self.cfg.max_nesting and self.rng.random() < 0.3:
                self.diamond(f, callees, depth)
            else:
                self.stmt(f, callees)

    def diamond(self, f: _Func, callees: List[str], depth: int) -> None:
        t, e, j = self.name(f, "t"), self.name(f, "e"), self.name(f, "j")
        f.lines.append(f"  br ({self.cond()}) {t} {e}")
        saved = list(f.scope)
        arms = []
        for b in (t, e):
            f.scope = list(saved)
            f.lines.append(f"{b}:")
            f.block = b
            if self.rng.random() < 0.8:
                self.region(f, callees, depth + 1)
            f.lines.append(f"  jmp {j}")
            arms.append((f.block, list(f.scope)))
        f.scope = list(saved)
        f.lines.append(f"{j}:")
        f.block = j
        (bt, st), (be, se) = arms
        for _ in range(self.rng.randint(0, 2)):
            if st and se and self.budget > 0:
                self.budget -= 1
                x = self.name(f, "p")
                f.lines.append(f"  {x} = phi [{bt}: {self.rng.choice(st)}] [{be}: {self.rng.choice(se)}]")
                f.scope.append(x)

    def function(self, name: str, callees: List[str], share: int) -> str:
        params = [f"q{i}" for i in range(self.rng.randint(0, self.cfg.max_params))]
        self.arity[name] = len(params)
        f = _Func(name, params, scope=list(params))
        stop = self.budget - share
        f.lines.append("entry:")
        while self.budget > max(stop, 0):
            self.region(f, callees, 0)
        v = self.value(f)
        if v is not None and self.rng.random() < 0.7:
            f.lines.append(f"  ret {v}")
        else:
            f.lines.append("  ret")
        return f"func {name}({', '.join(params)}) {{\n" + "\n".join(f.lines) + "\n}\n"


def generate(seed: int, cfg: GenConfig = GenConfig()) -> str:
    """Program text for ``seed``; same seed, same text."""
    rng = random.Random(seed)
    g = _Gen(rng, cfg)
    n = rng.randint(1, cfg.max_functions)
    names = [f"f{i}" for i in range(n)]
    texts = []
    # callees first so that their arity is known at call sites
    for i in reversed(range(n)):
        share = max(2, g.budget // (i + 1))
        texts.append(g.function(names[i], names[i + 1:], share))
    return "".join(reversed(texts))


def soundy_violations(prog: Program) -> List[str]:
    """Reasons the analysis' documented assumptions fail on ``prog``."""
    from .oracle import enumerate_runs
    from .pipeline import analyze_program

    reasons = list(enumerate_runs(prog).violations)
    reasons.extend(w for w in analyze_program(prog).warnings if "truncated" in w)
    return reasons


def corpus(count: int, seed: int = 0, cfg: GenConfig = GenConfig()) -> Iterator[Tuple[int, Program]]:
    """``count`` programs that respect the analysis' assumptions."""
    produced = 0
    s = seed
    while produced < count:
        prog = parse(generate(s, cfg))
        if not soundy_violations(prog):
            yield s, prog
            produced += 1
        s += 1
