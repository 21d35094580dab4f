"""The SSA mini-language: program representation, parser and printer.

Concrete syntax, one statement per line::

    func NAME(p1, p2) {
    BLOCK:
      x = alloc | x = &y | x = y | x = phi [bb1: v1] [bb2: v2]
      x = load y | store x, v | r = call f(a, b) | call f(a) | free x
      while (COND) { ... }
      br (COND) BB1 BB2 | jmp BB | ret x | ret
    }

``#`` starts a comment.  Statements and ``ret`` terminators are numbered
1, 2, ... in file order; parameters live at label 0.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Tuple, Union

from .guard import AtomTable, Guard


class IRError(Exception):
    """Base class for front-end errors."""


class ParseError(IRError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


class SemanticError(IRError):
    pass


# ---------------------------------------------------------------------------
# statements


@dataclass(frozen=True, kw_only=True)
class Stmt:
    label: int
    origin: int = 0
    in_loop: bool = False

    def defs(self) -> Tuple[str, ...]:
        dst = getattr(self, "dst", None)
        return (dst,) if dst else ()

    def uses(self) -> Tuple[str, ...]:
        return ()

    @property
    def site(self) -> int:
        """Label reported to users (the pre-unroll statement)."""
        return self.origin or self.label


@dataclass(frozen=True, kw_only=True)
class AddressOf(Stmt):
    dst: str
    var: str


@dataclass(frozen=True, kw_only=True)
class Alloc(Stmt):
    dst: str


@dataclass(frozen=True, kw_only=True)
class Copy(Stmt):
    dst: str
    src: str

    def uses(self):
        return (self.src,)


@dataclass(frozen=True, kw_only=True)
class Phi(Stmt):
    dst: str
    arms: Tuple[Tuple[str, str], ...]  # (predecessor block, value)
    gates: Optional[Tuple[Guard, ...]] = None

    def uses(self):
        return tuple(v for _, v in self.arms)


@dataclass(frozen=True, kw_only=True)
class Load(Stmt):
    dst: str
    ptr: str

    def uses(self):
        return (self.ptr,)


@dataclass(frozen=True, kw_only=True)
class Store(Stmt):
    ptr: str
    val: str

    def uses(self):
        return (self.ptr, self.val)


@dataclass(frozen=True, kw_only=True)
class Call(Stmt):
    dst: Optional[str]
    callee: str
    args: Tuple[str, ...]

    def uses(self):
        return self.args


@dataclass(frozen=True, kw_only=True)
class Free(Stmt):
    ptr: str

    def uses(self):
        return (self.ptr,)


@dataclass(frozen=True, kw_only=True)
class Havoc(Stmt):
    """A call cut off by the recursion bound: no effects, result unknown."""

    dst: Optional[str]
    callee: str
    args: Tuple[str, ...] = ()


@dataclass(frozen=True)
class While:
    cond: str
    atom: int
    positive: bool
    body: Tuple[Union[Stmt, "While"], ...]


# terminators


@dataclass(frozen=True)
class Branch:
    cond: str
    atom: int
    positive: bool
    then: str
    els: str

    def targets(self):
        return (self.then,) if self.then == self.els else (self.then, self.els)


@dataclass(frozen=True)
class Jump:
    target: str

    def targets(self):
        return (self.target,)


@dataclass(frozen=True)
class Return:
    value: Optional[str]
    label: int
    origin: int = 0

    def targets(self):
        return ()

    @property
    def site(self):
        return self.origin or self.label


Terminator = Union[Branch, Jump, Return]


@dataclass
class Block:
    name: str
    stmts: List[Union[Stmt, While]]
    term: Terminator


@dataclass
class Function:
    name: str
    params: Tuple[str, ...]
    blocks: Dict[str, Block]
    entry: str

    @property
    def ret(self) -> Return:
        for b in self.blocks.values():
            if isinstance(b.term, Return):
                return b.term
        raise SemanticError(f"function {self.name}: missing return")

    @property
    def return_value(self) -> Optional[str]:
        return self.ret.value

    @property
    def exit_block(self) -> str:
        for b in self.blocks.values():
            if isinstance(b.term, Return):
                return b.name
        raise SemanticError(f"function {self.name}: missing return")

    def statements(self) -> Iterator[Tuple[str, Stmt]]:
        """Statements in block order, descending into while bodies."""
        for b in self.blocks.values():
            for s in _flatten(b.stmts):
                yield b.name, s

    def has_loops(self) -> bool:
        return any(isinstance(s, While) for b in self.blocks.values() for s in b.stmts)


def _flatten(items):
    for it in items:
        if isinstance(it, While):
            yield from _flatten(it.body)
        else:
            yield it


@dataclass
class Program:
    functions: Dict[str, Function]
    atoms: AtomTable = field(default_factory=AtomTable)
    warnings: List[str] = field(default_factory=list, compare=False)
    max_label: int = field(default=0, compare=False)

    def function_of_label(self) -> Dict[int, str]:
        out = {}
        for f in self.functions.values():
            for _, s in f.statements():
                out[s.label] = f.name
            out[f.ret.label] = f.name
        return out

    def stmt_at(self, label: int) -> Stmt:
        for f in self.functions.values():
            for _, s in f.statements():
                if s.label == label:
                    return s
        raise KeyError(label)

    def has_havoc(self) -> bool:
        return any(isinstance(s, Havoc) for f in self.functions.values() for _, s in f.statements())


# ---------------------------------------------------------------------------
# tokenizer

_KEYWORDS = {"func", "while", "alloc", "phi", "load", "store", "call", "free", "br", "jmp", "ret"}
_TOKEN_RE = re.compile(
    r"(?P<nl>\n)|(?P<ws>[ \t\r]+)|(?P<comment>#[^\n]*)"
    r"|(?P<ident>[A-Za-z_][\w.]*)|(?P<int>-?\d+)"
    r"|(?P<op><=|>=|==|!=|<|>)|(?P<punct>[(){}\[\]:,=&*])"
)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            toks.append(Tok("nl", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str, atoms: AtomTable):
        self.toks = tokenize(text)
        self.i = 0
        self.atoms = atoms
        self.label = 0

    # token helpers
    def peek(self, k=0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def expect(self, text=None, kind=None) -> Tok:
        t = self.peek()
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = repr(text) if text is not None else kind
            got = "end of input" if t.kind == "eof" else repr(t.text)
            self.error(f"expected {want}, got {got}")
        return self.next()

    def skip_nl(self):
        while self.peek().kind == "nl":
            self.i += 1

    def ident(self, what="identifier") -> str:
        t = self.peek()
        if t.kind != "ident" or t.text in _KEYWORDS:
            self.error(f"expected {what}, got {t.text!r}" if t.kind != "eof" else f"expected {what}, got end of input")
        return self.next().text

    def end_of_stmt(self):
        t = self.peek()
        if t.kind == "nl":
            self.skip_nl()
        elif t.text != "}":
            self.error(f"expected end of line, got {t.text!r}")

    def fresh(self) -> int:
        self.label += 1
        return self.label

    # grammar
    def program(self) -> Program:
        funcs: Dict[str, Function] = {}
        self.skip_nl()
        while self.peek().kind != "eof":
            tok = self.peek()
            f = self.function()
            if f.name in funcs:
                raise SemanticError(f"duplicate function {f.name!r} (line {tok.line})")
            funcs[f.name] = f
            self.skip_nl()
        return Program(funcs, self.atoms, [], self.label)

    def function(self) -> Function:
        self.expect("func")
        name = self.ident("function name")
        self.expect("(")
        params = []
        if self.peek().text != ")":
            params.append(self.ident("parameter"))
            while self.peek().text == ",":
                self.next()
                params.append(self.ident("parameter"))
        self.expect(")")
        self.skip_nl()
        self.expect("{")
        self.skip_nl()
        blocks: Dict[str, Block] = {}
        cur_name: Optional[str] = None
        cur_items: List = []
        cur_tok = self.peek()
        order: List[Tuple[str, List, Optional[Terminator], Tok]] = []
        term: Optional[Terminator] = None
        while self.peek().text != "}":
            if self.peek().kind == "eof":
                self.error("unterminated function body")
            t = self.peek()
            if t.kind == "ident" and self.peek(1).text == ":" and t.text not in _KEYWORDS:
                if cur_name is not None or cur_items:
                    order.append((cur_name or "entry", cur_items, term, cur_tok))
                cur_name, cur_items, term, cur_tok = t.text, [], None, t
                self.i += 2
                self.skip_nl()
                continue
            if term is not None:
                self.error("statement after block terminator")
            if t.text in ("br", "jmp", "ret"):
                term = self.terminator()
            else:
                cur_items.append(self.item())
            self.end_of_stmt()
        self.expect("}")
        if cur_name is not None or cur_items or term is not None:
            order.append((cur_name or "entry", cur_items, term, cur_tok))
        if not order:
            raise SemanticError(f"function {name}: missing return")
        for bname, items, bterm, btok in order:
            if bname in blocks:
                raise SemanticError(f"function {name}: duplicate block {bname!r} (line {btok.line})")
            if bterm is None:
                raise SemanticError(f"function {name}: block {bname!r} lacks a terminator (line {btok.line})")
            blocks[bname] = Block(bname, items, bterm)
        return Function(name, tuple(params), blocks, order[0][0])

    def cond(self) -> Tuple[str, int, bool]:
        self.expect("(")
        parts = []
        while self.peek().text != ")":
            t = self.next()
            if t.kind in ("nl", "eof"):
                self.error("unterminated condition", t)
            parts.append(t)
        self.expect(")")
        ok = (len(parts) == 1 and parts[0].kind == "ident") or (
            len(parts) == 3 and parts[0].kind in ("ident", "int") and parts[1].kind == "op" and parts[2].kind in ("ident", "int")
        )
        if not ok:
            self.error("condition must be an identifier or a comparison", parts[0] if parts else None)
        text = "".join(p.text for p in parts)
        atom, positive = self.atoms.intern(text)
        return text, atom.id, positive

    def terminator(self) -> Terminator:
        t = self.next()
        if t.text == "br":
            text, atom, positive = self.cond()
            a = self.ident("block name")
            b = self.ident("block name")
            return Branch(text, atom, positive, a, b)
        if t.text == "jmp":
            return Jump(self.ident("block name"))
        value = None
        if self.peek().kind == "ident" and self.peek().text not in _KEYWORDS:
            value = self.next().text
        return Return(value, self.fresh())

    def item(self):
        t = self.peek()
        if t.text == "while":
            self.next()
            text, atom, positive = self.cond()
            self.skip_nl()
            self.expect("{")
            self.skip_nl()
            body = []
            while self.peek().text != "}":
                if self.peek().kind == "eof":
                    self.error("unterminated while body")
                if self.peek().text in ("br", "jmp", "ret"):
                    self.error("terminators are not allowed inside while bodies")
                if self.peek().kind == "ident" and self.peek(1).text == ":":
                    self.error("block labels are not allowed inside while bodies")
                body.append(self.item())
                self.end_of_stmt()
            self.expect("}")
            return While(text, atom, positive, tuple(body))
        if t.text == "store":
            self.next()
            ptr = self.ident("pointer")
            self.expect(",")
            val = self.ident("value")
            return Store(label=self.fresh(), ptr=ptr, val=val)
        if t.text == "free":
            self.next()
            return Free(label=self.fresh(), ptr=self.ident("pointer"))
        if t.text == "call":
            self.next()
            callee, args = self.call_tail()
            return Call(label=self.fresh(), dst=None, callee=callee, args=args)
        dst = self.ident("statement")
        self.expect("=")
        r = self.peek()
        if r.text == "alloc":
            self.next()
            return Alloc(label=self.fresh(), dst=dst)
        if r.text == "&":
            self.next()
            return AddressOf(label=self.fresh(), dst=dst, var=self.ident("variable"))
        if r.text == "load":
            self.next()
            return Load(label=self.fresh(), dst=dst, ptr=self.ident("pointer"))
        if r.text == "call":
            self.next()
            callee, args = self.call_tail()
            return Call(label=self.fresh(), dst=dst, callee=callee, args=args)
        if r.text == "phi":
            self.next()
            arms = []
            while self.peek().text == "[":
                self.next()
                bb = self.ident("block name")
                self.expect(":")
                v = self.ident("value")
                self.expect("]")
                arms.append((bb, v))
            if not arms:
                self.error("phi needs at least one [block: value] arm")
            return Phi(label=self.fresh(), dst=dst, arms=tuple(arms))
        return Copy(label=self.fresh(), dst=dst, src=self.ident("value"))

    def call_tail(self):
        callee = self.ident("function name")
        self.expect("(")
        args = []
        if self.peek().text != ")":
            args.append(self.ident("argument"))
            while self.peek().text == ",":
                self.next()
                args.append(self.ident("argument"))
        self.expect(")")
        return callee, tuple(args)


def parse(text: str, atoms: Optional[AtomTable] = None) -> Program:
    """Parse and validate a program.  Raises ParseError or SemanticError."""
    prog = _Parser(text, atoms if atoms is not None else AtomTable()).program()
    validate(prog)
    return prog


# ---------------------------------------------------------------------------
# validation


def validate(prog: Program) -> None:
    for f in prog.functions.values():
        _validate_function(prog, f)


def _validate_function(prog: Program, f: Function) -> None:
    from . import cfg  # local import: cfg depends on the types above

    where = f"function {f.name}"
    rets = [b for b in f.blocks.values() if isinstance(b.term, Return)]
    if not rets:
        raise SemanticError(f"{where}: missing return")
    if len(rets) > 1:
        raise SemanticError(f"{where}: more than one return statement")
    for b in f.blocks.values():
        for t in b.term.targets():
            if t not in f.blocks:
                raise SemanticError(f"{where}: jump to unknown block {t!r}")
            if t == f.entry:
                raise SemanticError(f"{where}: entry block {t!r} has a predecessor")
    preds = cfg.predecessors(f)
    reach = cfg.reachable(f)
    for b in f.blocks:
        if b not in reach:
            raise SemanticError(f"{where}: unreachable block {b!r}")
    if cfg.has_cycle(f):
        raise SemanticError(f"{where}: cyclic control flow (use while for loops)")

    # single definition
    defined: Dict[str, Tuple[str, int]] = {}
    for p in f.params:
        if p in defined:
            raise SemanticError(f"{where}: duplicate definition of {p!r}")
        defined[p] = (f.entry, -1)

    # position of each statement in textual order; labels need not be
    # increasing once statements have been copied around
    position: Dict[int, int] = {}

    def visit(items, block, scope_id, depth):
        for it in items:
            if isinstance(it, While):
                visit(it.body, block, id(it), depth + 1)
                continue
            position[id(it)] = len(position)
            for d in it.defs():
                if d in defined:
                    raise SemanticError(f"{where}: duplicate definition of {d!r} at label {it.label}")
                defined[d] = (block, position[id(it)])
                loop_scope[d] = scope_id
            if isinstance(it, Call):
                callee = prog.functions.get(it.callee)
                if callee is None:
                    raise SemanticError(f"{where}: unknown call target {it.callee!r} at label {it.label}")
                if len(callee.params) != len(it.args):
                    raise SemanticError(
                        f"{where}: arity mismatch calling {it.callee} at label {it.label}: "
                        f"expected {len(callee.params)}, got {len(it.args)}"
                    )
            if isinstance(it, Phi) and depth:
                raise SemanticError(f"{where}: phi inside a while body at label {it.label}")

    loop_scope: Dict[str, int] = {}
    for b in f.blocks.values():
        visit(b.stmts, b.name, 0, 0)

    dom = cfg.dominators(f)

    def dominates(a: str, b: str) -> bool:
        while b is not None:
            if a == b:
                return True
            b = dom.get(b)
        return False

    # def-before-use, dominance and loop scoping
    def check_use(v, block, label, scopes, phi_pred=None, pos=None):
        if v not in defined:
            raise SemanticError(f"{where}: use of undefined value {v!r} at label {label}")
        dblock, dpos = defined[v]
        if loop_scope.get(v, 0) not in scopes:
            raise SemanticError(f"{where}: value {v!r} defined in a loop body is used outside it at label {label}")
        if phi_pred is not None:
            if not dominates(dblock, phi_pred):
                raise SemanticError(f"{where}: phi operand {v!r} does not dominate edge from {phi_pred!r}")
            return
        if dblock == block:
            if pos is not None and dpos >= pos:
                raise SemanticError(f"{where}: value {v!r} used before its definition at label {label}")
        elif not dominates(dblock, block):
            raise SemanticError(f"{where}: definition of {v!r} does not dominate its use at label {label}")

    def check(items, block, scopes, first):
        seen_other = not first
        for it in items:
            if isinstance(it, While):
                check(it.body, block, scopes + (id(it),), False)
                seen_other = True
                continue
            if isinstance(it, Phi):
                if seen_other:
                    raise SemanticError(f"{where}: phi at label {it.label} is not at the start of block {block!r}")
                arm_blocks = [bb for bb, _ in it.arms]
                if sorted(arm_blocks) != sorted(preds[block]):
                    raise SemanticError(
                        f"{where}: phi at label {it.label} arms {arm_blocks} do not match predecessors {sorted(preds[block])}"
                    )
                for bb, v in it.arms:
                    check_use(v, block, it.label, scopes, phi_pred=bb)
                continue
            seen_other = True
            for v in it.uses():
                check_use(v, block, it.label, scopes, pos=position[id(it)])

    for b in f.blocks.values():
        check(b.stmts, b.name, (0,), True)
        if isinstance(b.term, Return) and b.term.value is not None:
            check_use(b.term.value, b.name, b.term.label, (0,))


# ---------------------------------------------------------------------------
# printer


def _fmt_stmt(s: Stmt) -> str:
    if isinstance(s, AddressOf):
        return f"{s.dst} = &{s.var}"
    if isinstance(s, Alloc):
        return f"{s.dst} = alloc"
    if isinstance(s, Copy):
        return f"{s.dst} = {s.src}"
    if isinstance(s, Phi):
        return f"{s.dst} = phi " + " ".join(f"[{b}: {v}]" for b, v in s.arms)
    if isinstance(s, Load):
        return f"{s.dst} = load {s.ptr}"
    if isinstance(s, Store):
        return f"store {s.ptr}, {s.val}"
    if isinstance(s, (Call, Havoc)):
        call = f"call {s.callee}({', '.join(s.args)})"
        if isinstance(s, Havoc):
            call = f"call {s.callee}({', '.join(s.args)})  # havoc"
        return f"{s.dst} = {call}" if s.dst else call
    if isinstance(s, Free):
        return f"free {s.ptr}"
    raise TypeError(s)


def _cond_text(atoms: AtomTable, atom: int, positive: bool, raw: str) -> str:
    return atoms.text_of(atom, positive) if atoms.atoms else raw


def pretty(prog: Program) -> str:
    out = []
    for f in prog.functions.values():
        out.append(f"func {f.name}({', '.join(f.params)}) {{")
        for b in f.blocks.values():
            out.append(f"{b.name}:")
            _emit_items(prog, b.stmts, out, "  ")
            t = b.term
            if isinstance(t, Branch):
                out.append(f"  br ({_cond_text(prog.atoms, t.atom, t.positive, t.cond)}) {t.then} {t.els}")
            elif isinstance(t, Jump):
                out.append(f"  jmp {t.target}")
            else:
                out.append(f"  ret {t.value}" if t.value else "  ret")
        out.append("}")
    return "\n".join(out) + "\n"


def _emit_items(prog, items, out, indent):
    for it in items:
        if isinstance(it, While):
            out.append(f"{indent}while ({_cond_text(prog.atoms, it.atom, it.positive, it.cond)}) {{")
            _emit_items(prog, it.body, out, indent + "  ")
            out.append(f"{indent}}}")
        else:
            out.append(indent + _fmt_stmt(it))


def relabel(s: Stmt, label: int, **changes) -> Stmt:
    """Copy of ``s`` at a fresh label, remembering where it came from."""
    return replace(s, label=label, origin=s.origin or s.label, **changes)
