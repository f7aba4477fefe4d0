"""Abstract syntax, parser, printer and evaluator for the concurrent mini-language.

A program is a set of threads, each a collection of labelled instructions
``l: inst; goto l';``.  Several instructions may share a label, which gives
nondeterministic choice.  Shared variables and registers all start at 0 and
range over a small finite integer domain.

Concrete syntax::

    // line comment
    program mp;
    domain 0..3;
    vars x y items[2];
    thread t1 regs r1 init l0 begin
      l0: r1 := 2; goto l1;
      l1: y := r1; goto l2;
      l2: x := 1; goto end;
    end
    abstract t2 l0: havoc(r3, r3 <= x);

``goto end`` terminates the thread.  ``items[2]`` declares the shared
variables ``items_0`` and ``items_1``; an instruction may index it with a
register expression, resolved when the instruction runs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Optional, Union

TERMINAL = "end"

KEYWORDS = frozenset(
    "program domain vars thread regs init begin end goto fence skip "
    "assume havoc cas abstract true false".split()
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class ValidationError(Exception):
    """A parsed program violates a well-formedness invariant."""


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: Union[int, bool]

    def __str__(self) -> str:
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        return str(self.value)


@dataclass(frozen=True)
class Name:
    id: str

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    arg: "Expr"

    def __str__(self) -> str:
        return f"{self.op}{_atom(self.arg)}"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Cond:
    test: "Expr"
    then: "Expr"
    orelse: "Expr"

    def __str__(self) -> str:
        return f"({self.test} ? {self.then} : {self.orelse})"


Expr = Union[Lit, Name, Unary, Binary, Cond]

ARITH_OPS = ("+", "-", "*")
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
LOGIC_OPS = ("&&", "||")


def _atom(e: Expr) -> str:
    s = str(e)
    if isinstance(e, Unary) or (isinstance(e, Lit) and not isinstance(e.value, bool) and e.value < 0):
        return f"({s})"
    return s


def names_in(e: Expr) -> Iterator[str]:
    if isinstance(e, Name):
        yield e.id
    elif isinstance(e, Unary):
        yield from names_in(e.arg)
    elif isinstance(e, Binary):
        yield from names_in(e.left)
        yield from names_in(e.right)
    elif isinstance(e, Cond):
        yield from names_in(e.test)
        yield from names_in(e.then)
        yield from names_in(e.orelse)


def literals_in(e: Expr) -> Iterator[int]:
    if isinstance(e, Lit):
        if not isinstance(e.value, bool):
            yield e.value
    elif isinstance(e, Unary):
        if e.op == "-" and isinstance(e.arg, Lit):
            yield -e.arg.value
        else:
            yield from literals_in(e.arg)
    elif isinstance(e, Binary):
        yield from literals_in(e.left)
        yield from literals_in(e.right)
    elif isinstance(e, Cond):
        yield from literals_in(e.test)
        yield from literals_in(e.then)
        yield from literals_in(e.orelse)


class Domain:
    """The finite value set ``lo..hi``; arithmetic wraps around into it."""

    __slots__ = ("lo", "hi", "size")

    def __init__(self, lo: int = 0, hi: int = 3):
        if not lo <= 0 <= hi:
            raise ValidationError(f"domain {lo}..{hi} must contain 0")
        self.lo = lo
        self.hi = hi
        self.size = hi - lo + 1

    def wrap(self, v: int) -> int:
        return self.lo + (v - self.lo) % self.size

    @property
    def values(self) -> range:
        return range(self.lo, self.hi + 1)

    def __contains__(self, v: object) -> bool:
        return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Domain) and (self.lo, self.hi) == (other.lo, other.hi)

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    def __repr__(self) -> str:
        return f"Domain({self.lo}, {self.hi})"


def evaluate(
    e: Expr,
    regs: Mapping[str, int],
    var_binding: Optional[tuple[str, int]] = None,
    domain: Optional[Domain] = None,
) -> Union[int, bool]:
    """Evaluate ``e`` under register valuation ``regs``.

    ``var_binding`` supplies the value of the single shared variable a havoc
    predicate may mention.  Unbound names raise ``KeyError``.
    """
    dom = domain or Domain()

    def go(e: Expr):
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, Name):
            if var_binding is not None and e.id == var_binding[0]:
                return var_binding[1]
            return regs[e.id]
        if isinstance(e, Unary):
            v = go(e.arg)
            return dom.wrap(-v) if e.op == "-" else not v
        if isinstance(e, Cond):
            return go(e.then) if go(e.test) else go(e.orelse)
        op = e.op
        if op == "&&":
            return bool(go(e.left)) and bool(go(e.right))
        if op == "||":
            return bool(go(e.left)) or bool(go(e.right))
        a, b = go(e.left), go(e.right)
        return _apply(op, a, b, dom)

    return go(e)


def _apply(op: str, a, b, dom: Domain):
    if op == "+":
        return dom.wrap(a + b)
    if op == "-":
        return dom.wrap(a - b)
    if op == "*":
        return dom.wrap(a * b)
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown operator {op!r}")


# ---------------------------------------------------------------------------
# Instructions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Loc:
    """A shared location: a plain variable, or an array cell ``base[index]``."""

    name: str
    index: Optional[Expr] = None

    def __str__(self) -> str:
        return self.name if self.index is None else f"{self.name}[{self.index}]"


@dataclass(frozen=True)
class Write:
    loc: Loc
    expr: Expr

    def __str__(self) -> str:
        return f"{self.loc} := {self.expr}"


@dataclass(frozen=True)
class LocalAssign:
    reg: str
    expr: Expr

    def __str__(self) -> str:
        return f"{self.reg} := {self.expr}"


@dataclass(frozen=True)
class Read:
    reg: str
    loc: Loc

    def __str__(self) -> str:
        return f"{self.reg} := {self.loc}"


@dataclass(frozen=True)
class Fence:
    def __str__(self) -> str:
        return "fence"


@dataclass(frozen=True)
class Cas:
    reg: str
    loc: Loc
    expected: Expr
    new: Expr

    def __str__(self) -> str:
        return f"{self.reg} := cas({self.loc}, {self.expected}, {self.new})"


@dataclass(frozen=True)
class Skip:
    def __str__(self) -> str:
        return "skip"


@dataclass(frozen=True)
class Assume:
    cond: Expr

    def __str__(self) -> str:
        return f"assume {self.cond}"


@dataclass(frozen=True)
class Havoc:
    """``havoc(reg, pred)``: assign ``reg`` any value making ``pred`` true.

    ``pred`` mentions registers of the thread (``reg`` standing for the new
    value) and exactly one shared variable ``var``.
    """

    reg: str
    var: str
    pred: Expr

    def __str__(self) -> str:
        return f"havoc({self.reg}, {self.pred})"


Instruction = Union[Write, LocalAssign, Read, Fence, Cas, Skip, Assume, Havoc]


@dataclass(frozen=True)
class LabeledInstruction:
    label: str
    inst: Instruction
    goto: str
    index: int  # source position within the thread

    def __str__(self) -> str:
        return f"{self.label}: {self.inst}; goto {self.goto};"


@dataclass(frozen=True)
class Thread:
    tid: str
    registers: tuple[str, ...]
    init: str
    code: tuple[LabeledInstruction, ...]

    @cached_property
    def body(self) -> dict[str, tuple[LabeledInstruction, ...]]:
        out: dict[str, list[LabeledInstruction]] = {}
        for li in self.code:
            out.setdefault(li.label, []).append(li)
        return {k: tuple(v) for k, v in out.items()}

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.body)


@dataclass(frozen=True)
class Annotation:
    """An in-file ``abstract [tid] label: havoc(reg, pred);`` request."""

    tid: Optional[str]
    label: str
    reg: str
    pred: Expr


@dataclass(frozen=True)
class Program:
    name: str
    decls: tuple[tuple[str, Optional[int]], ...]  # (name, array size or None)
    threads: tuple[Thread, ...]
    domain: Domain = field(default_factory=Domain)
    annotations: tuple[Annotation, ...] = ()

    @cached_property
    def arrays(self) -> dict[str, int]:
        return {n: k for n, k in self.decls if k is not None}

    @cached_property
    def shared_vars(self) -> tuple[str, ...]:
        out = []
        for n, k in self.decls:
            if k is None:
                out.append(n)
            else:
                out.extend(f"{n}_{i}" for i in range(k))
        return tuple(out)

    @cached_property
    def registers(self) -> tuple[str, ...]:
        return tuple(r for t in self.threads for r in t.registers)

    @cached_property
    def names(self) -> tuple[str, ...]:
        return self.shared_vars + self.registers

    @cached_property
    def slots(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.names)}

    @cached_property
    def tids(self) -> tuple[str, ...]:
        return tuple(t.tid for t in self.threads)

    def thread(self, tid: str) -> Thread:
        for t in self.threads:
            if t.tid == tid:
                return t
        raise KeyError(f"no thread {tid!r}")

    def thread_index(self, tid: str) -> int:
        return self.tids.index(tid)

    def __str__(self) -> str:
        return format_program(self)


def instructions_of(p: Program, label: str, tid: Optional[str] = None) -> tuple[LabeledInstruction, ...]:
    """The instructions labelled ``label`` (in thread ``tid`` if given)."""
    found: list[LabeledInstruction] = []
    known = False
    for t in p.threads:
        if tid is not None and t.tid != tid:
            continue
        if label in t.body:
            known = True
            found.extend(t.body[label])
    if not known:
        raise KeyError(f"unknown label {label!r}")
    return tuple(found)


def shared_locations(li_or_inst) -> tuple[str, ...]:
    """Names of shared variables/arrays an instruction accesses (statically)."""
    inst = li_or_inst.inst if isinstance(li_or_inst, LabeledInstruction) else li_or_inst
    if isinstance(inst, (Write, Read, Cas)):
        return (inst.loc.name,)
    if isinstance(inst, Havoc):
        return (inst.var,)
    return ()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def format_program(p: Program) -> str:
    lines = [f"program {p.name};"]
    if p.domain != Domain():
        lines.append(f"domain {p.domain.lo}..{p.domain.hi};")
    decls = " ".join(n if k is None else f"{n}[{k}]" for n, k in p.decls)
    lines.append(f"vars {decls};" if decls else "vars;")
    for t in p.threads:
        regs = " ".join(t.registers)
        lines.append(f"thread {t.tid} regs {regs}; init {t.init} begin" if regs
                     else f"thread {t.tid} regs; init {t.init} begin")
        for li in t.code:
            lines.append(f"  {li}")
        lines.append("end")
    for a in p.annotations:
        where = f"{a.tid} {a.label}" if a.tid else a.label
        lines.append(f"abstract {where}: havoc({a.reg}, {a.pred});")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Lexing and parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+) |
    (?P<nl>\n) |
    (?P<comment>//[^\n]*) |
    (?P<num>\d+) |
    (?P<ident>[A-Za-z_][A-Za-z_0-9]*) |
    (?P<op>:=|==|!=|<=|>=|&&|\|\||\.\.|[<>+\-*!?:;,()\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # num, ident, op, eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.shared: set[str] = set()
        self.arrays: dict[str, int] = {}

    # -- token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            got = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, got {got!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> str:
        tok = self.tok
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(f"expected {what}, got {tok.text or 'end of input'!r}")
        self.i += 1
        return tok.text

    def label(self) -> str:
        # ``end`` is a valid goto target (thread termination)
        if self.at(TERMINAL):
            self.i += 1
            return TERMINAL
        return self.ident("label")

    def integer(self) -> int:
        neg = self.accept("-")
        tok = self.tok
        if tok.kind != "num":
            raise self.error(f"expected integer, got {tok.text!r}")
        self.i += 1
        return -int(tok.text) if neg else int(tok.text)

    # -- program structure
    def program(self) -> Program:
        self.expect("program")
        name = self.ident("program name")
        self.accept(";")
        lo, hi = 0, 3
        if self.accept("domain"):
            tok = self.tok
            lo = self.integer()
            self.expect("..")
            hi = self.integer()
            self.accept(";")
            if not lo <= 0 <= hi:
                raise self.error(f"domain {lo}..{hi} must contain 0", tok)
        domain = Domain(lo, hi)
        self.expect("vars")
        decls: list[tuple[str, Optional[int]]] = []
        while self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
            n = self.ident()
            size = None
            if self.accept("["):
                size = self.integer()
                self.expect("]")
                if size < 1:
                    raise self.error(f"array {n} must have positive size")
                self.arrays[n] = size
            else:
                self.shared.add(n)
            decls.append((n, size))
            self.accept(",")
        self.accept(";")
        threads = []
        while self.at("thread"):
            threads.append(self.thread())
        annotations = []
        while self.at("abstract"):
            annotations.append(self.annotation())
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return Program(name, tuple(decls), tuple(threads), domain, tuple(annotations))

    def thread(self) -> Thread:
        self.expect("thread")
        tid = self.ident("thread id")
        self.expect("regs")
        regs = []
        while self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
            regs.append(self.ident())
            self.accept(",")
        self.accept(";")
        self.expect("init")
        init = self.ident("label")
        self.accept(";")
        self.expect("begin")
        code = []
        while not self.at("end"):
            if self.tok.kind == "eof":
                raise self.error(f"unterminated thread {tid}")
            lab = self.ident("label")
            self.expect(":")
            inst = self.instruction()
            self.expect(";")
            self.expect("goto")
            target = self.label()
            self.expect(";")
            code.append(LabeledInstruction(lab, inst, target, len(code)))
        self.expect("end")
        return Thread(tid, tuple(regs), init, tuple(code))

    def annotation(self) -> Annotation:
        self.expect("abstract")
        first = self.ident("label")
        tid = None
        if not self.at(":"):
            tid, first = first, self.ident("label")
        self.expect(":")
        self.expect("havoc")
        self.expect("(")
        reg = self.ident("register")
        self.expect(",")
        pred = self.expr()
        self.expect(")")
        self.expect(";")
        return Annotation(tid, first, reg, pred)

    def instruction(self) -> Instruction:
        if self.accept("fence"):
            return Fence()
        if self.accept("skip"):
            return Skip()
        if self.accept("assume"):
            return Assume(self.expr())
        if self.at("havoc"):
            tok = self.tok
            self.i += 1
            self.expect("(")
            reg = self.ident("register")
            self.expect(",")
            pred = self.expr()
            self.expect(")")
            shared = sorted({n for n in names_in(pred) if n in self.shared})
            if len(shared) != 1:
                raise self.error("havoc predicate must mention exactly one shared variable", tok)
            return Havoc(reg, shared[0], pred)
        tok = self.tok
        target = self.ident("assignment target")
        index = None
        if self.accept("["):
            index = self.expr()
            self.expect("]")
        self.expect(":=")
        if target in self.shared or target in self.arrays:
            if (target in self.arrays) != (index is not None):
                raise self.error(f"bad indexing of {target}", tok)
            return Write(Loc(target, index), self.expr())
        if index is not None:
            raise self.error(f"{target} is not an array", tok)
        if self.accept("cas"):
            self.expect("(")
            loc = self.loc()
            self.expect(",")
            e1 = self.expr()
            self.expect(",")
            e2 = self.expr()
            self.expect(")")
            return Cas(target, loc, e1, e2)
        if self.tok.kind == "ident" and (self.tok.text in self.shared or self.tok.text in self.arrays):
            nxt = self.peek()
            plain = nxt.text == ";" or nxt.kind == "eof"
            if self.tok.text in self.arrays or plain:
                return Read(target, self.loc())
        return LocalAssign(target, self.expr())

    def loc(self) -> Loc:
        tok = self.tok
        n = self.ident("shared variable")
        if n in self.arrays:
            self.expect("[")
            idx = self.expr()
            self.expect("]")
            return Loc(n, idx)
        if n not in self.shared:
            raise self.error(f"{n} is not a shared variable", tok)
        return Loc(n)

    # -- expressions, lowest precedence first
    def expr(self) -> Expr:
        test = self.disj()
        if self.accept("?"):
            then = self.expr()
            self.expect(":")
            return Cond(test, then, self.expr())
        return test

    def disj(self) -> Expr:
        e = self.conj()
        while self.accept("||"):
            e = Binary("||", e, self.conj())
        return e

    def conj(self) -> Expr:
        e = self.compare()
        while self.accept("&&"):
            e = Binary("&&", e, self.compare())
        return e

    def compare(self) -> Expr:
        e = self.additive()
        for op in COMPARE_OPS:
            if self.at(op):
                self.i += 1
                return Binary(op, e, self.additive())
        return e

    def additive(self) -> Expr:
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            e = Binary(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.accept("*"):
            e = Binary("*", e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.accept("-"):
            arg = self.unary()
            if isinstance(arg, Lit) and not isinstance(arg.value, bool):
                return Lit(-arg.value)
            return Unary("-", arg)
        if self.accept("!"):
            return Unary("!", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Lit(int(tok.text))
        if self.accept("true"):
            return Lit(True)
        if self.accept("false"):
            return Lit(False)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "ident" and tok.text in self.arrays:
            raise self.error(f"array {tok.text} may only be read by a read instruction")
        return Name(self.ident("expression"))


def parse_expr(text: str) -> Expr:
    """Parse a standalone expression such as ``h <= H``."""
    ps = _Parser(text)
    e = ps.expr()
    if ps.tok.kind != "eof":
        raise ps.error(f"unexpected {ps.tok.text!r} after expression")
    return e


def parse_program(text: str, validate: bool = True) -> Program:
    """Parse program text; raises ``ParseError`` or ``ValidationError``."""
    p = _Parser(text).program()
    if validate:
        validate_program(p)
    return p


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _type_of(e: Expr, where: str) -> str:
    if isinstance(e, Lit):
        return "bool" if isinstance(e.value, bool) else "int"
    if isinstance(e, Name):
        return "int"
    if isinstance(e, Unary):
        want = "int" if e.op == "-" else "bool"
        if _type_of(e.arg, where) != want:
            raise ValidationError(f"{where}: type error in {e}")
        return want
    if isinstance(e, Cond):
        if _type_of(e.test, where) != "bool":
            raise ValidationError(f"{where}: condition of {e} is not boolean")
        a, b = _type_of(e.then, where), _type_of(e.orelse, where)
        if a != b:
            raise ValidationError(f"{where}: branches of {e} differ in type")
        return a
    lt, rt = _type_of(e.left, where), _type_of(e.right, where)
    if e.op in LOGIC_OPS:
        if lt != "bool" or rt != "bool":
            raise ValidationError(f"{where}: operands of {e.op} must be boolean")
        return "bool"
    if e.op in ("==", "!=") and lt == rt:
        return "bool"
    if lt != "int" or rt != "int":
        raise ValidationError(f"{where}: operands of {e.op} must be integers")
    return "bool" if e.op in COMPARE_OPS else "int"


def _check_expr(p: Program, e: Expr, regs: set[str], where: str, want: str,
                allow_shared: Optional[str] = None) -> None:
    for n in names_in(e):
        if n in regs or n == allow_shared:
            continue
        if n in p.shared_vars or n in p.arrays:
            raise ValidationError(f"{where}: multiple shared variables / shared access not allowed here ({n})")
        if n in p.registers:
            raise ValidationError(f"{where}: cross-thread register {n}")
        raise ValidationError(f"{where}: unknown name {n}")
    for v in literals_in(e):
        if v not in p.domain:
            raise ValidationError(f"{where}: literal {v} outside domain {p.domain.lo}..{p.domain.hi}")
    if _type_of(e, where) != want:
        raise ValidationError(f"{where}: expected {want} expression, got {e}")


def validate_program(p: Program) -> None:
    """Check every well-formedness invariant; raises ``ValidationError``."""
    if 0 not in p.domain:
        raise ValidationError("domain must contain 0")
    seen: set[str] = set()
    for n, k in p.decls:
        if n in seen:
            raise ValidationError(f"duplicate shared variable {n}")
        seen.add(n)
    if len(set(p.shared_vars)) != len(p.shared_vars):
        raise ValidationError("array cells clash with a declared variable")
    if len(set(p.tids)) != len(p.tids):
        raise ValidationError("duplicate thread id")
    owner: dict[str, str] = {}
    for t in p.threads:
        for r in t.registers:
            if r in p.shared_vars or r in p.arrays:
                raise ValidationError(f"register {r} clashes with a shared variable")
            if r in owner:
                raise ValidationError(f"cross-thread register {r} declared by {owner[r]} and {t.tid}")
            owner[r] = t.tid
    for t in p.threads:
        regs = set(t.registers)
        if t.init not in t.body:
            raise ValidationError(f"thread {t.tid}: dangling label {t.init} (init)")
        for li in t.code:
            where = f"thread {t.tid}, {li.label}"
            if li.goto != TERMINAL and li.goto not in t.body:
                raise ValidationError(f"{where}: dangling label {li.goto}")
            inst = li.inst
            if isinstance(inst, (LocalAssign, Read, Cas, Havoc)) and inst.reg not in regs:
                kind = "cross-thread register" if inst.reg in owner else "unknown register"
                raise ValidationError(f"{where}: {kind} {inst.reg}")
            loc = getattr(inst, "loc", None)
            if loc is not None:
                if loc.name in p.arrays:
                    if loc.index is None:
                        raise ValidationError(f"{where}: array {loc.name} needs an index")
                    _check_expr(p, loc.index, regs, where, "int")
                elif loc.name not in p.shared_vars or loc.index is not None:
                    raise ValidationError(f"{where}: bad shared location {loc}")
            if isinstance(inst, (Write, LocalAssign)):
                _check_expr(p, inst.expr, regs, where, "int")
            elif isinstance(inst, Cas):
                _check_expr(p, inst.expected, regs, where, "int")
                _check_expr(p, inst.new, regs, where, "int")
            elif isinstance(inst, Assume):
                _check_expr(p, inst.cond, regs, where, "bool")
            elif isinstance(inst, Havoc):
                if inst.var not in p.shared_vars:
                    raise ValidationError(f"{where}: havoc over unknown variable {inst.var}")
                shared = {n for n in names_in(inst.pred) if n in p.shared_vars or n in p.arrays}
                if shared != {inst.var}:
                    raise ValidationError(f"{where}: havoc predicate must mention exactly one shared variable")
                _check_expr(p, inst.pred, regs, where, "bool", allow_shared=inst.var)
    for a in p.annotations:
        tids = [t.tid for t in p.threads if a.label in t.body and (a.tid is None or t.tid == a.tid)]
        if len(tids) != 1:
            raise ValidationError(f"abstract annotation {a.label}: label must identify one thread")
