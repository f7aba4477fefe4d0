"""SC and TSO small-step semantics.

Both machines share one compiled view of the program.  A successor is a
``Step``: the actions it emits, the resulting state, a key identifying the
transition independently of the state (used by the sleep-set reduction) and
the shared-memory footprint used to decide whether two steps commute.

Under SC a write emits ``(t,isu)(t,com,x,v)`` in one step.  Under TSO the
issue appends ``(x,v)`` to the thread's FIFO buffer and a separate commit
step drains the head into memory.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence

from .lang import (
    Assume,
    Binary,
    Cas,
    Cond,
    Expr,
    Fence,
    Havoc,
    LabeledInstruction,
    Lit,
    LocalAssign,
    Name,
    Program,
    Read,
    Unary,
    Write,
)

# step flags
STUCK = 1
BUFFER_FULL = 2


@dataclass(frozen=True)
class Action:
    """One transition label: ``(t,isu)``, ``(t,com,x,v)``, ``(t,rd,x,v)``,
    ``(t,tau)`` or ``(t,hvc,x,pred)``.

    For havoc actions ``pred`` is the set of values of ``x`` that satisfy the
    instantiated constraint; ``text`` is its printable form.  ``origin`` is
    the (label, source index) of the generating instruction, and is not part
    of the label's identity.
    """

    thread: str
    kind: str
    var: Optional[str] = None
    value: Optional[int] = None
    pred: Optional[frozenset] = None
    text: str = field(default="", compare=False)
    origin: Optional[tuple[str, int]] = field(default=None, compare=False)

    def __str__(self) -> str:
        if self.kind in ("isu", "tau"):
            return f"({self.thread}, {self.kind})"
        if self.kind == "hvc":
            return f"({self.thread}, hvc, {self.var}, {self.text})"
        return f"({self.thread}, {self.kind}, {self.var}, {self.value})"

    def to_json(self) -> list:
        if self.kind in ("isu", "tau"):
            return [self.thread, self.kind]
        if self.kind == "hvc":
            return [self.thread, self.kind, self.var, self.text]
        return [self.thread, self.kind, self.var, self.value]

    @property
    def is_shared(self) -> bool:
        return self.kind != "tau"


class ScState(NamedTuple):
    pc: tuple[str, ...]
    mem: tuple[int, ...]


class TsoState(NamedTuple):
    pc: tuple[str, ...]
    mem: tuple[int, ...]
    buf: tuple[tuple[tuple[str, int], ...], ...]


class Footprint(NamedTuple):
    var: str
    write: bool


class Step(NamedTuple):
    thread: int
    key: tuple
    actions: tuple[Action, ...]
    state: object
    footprint: Optional[Footprint]
    inst: Optional[LabeledInstruction]  # None for TSO commits


def independent(t1: int, f1: Optional[Footprint], t2: int, f2: Optional[Footprint]) -> bool:
    if t1 == t2:
        return False
    if f1 is None or f2 is None or f1.var != f2.var:
        return True
    return not (f1.write or f2.write)


def format_execution(actions: Sequence[Action]) -> str:
    return "\n".join(str(a) for a in actions)


# ---------------------------------------------------------------------------
# Expression compilation
# ---------------------------------------------------------------------------

_CMP = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _compile(e: Expr, slots: dict[str, int], wrap: Callable[[int], int]):
    if isinstance(e, Lit):
        v = e.value
        return lambda m: v
    if isinstance(e, Name):
        return operator.itemgetter(slots[e.id])
    if isinstance(e, Unary):
        f = _compile(e.arg, slots, wrap)
        if e.op == "-":
            return lambda m: wrap(-f(m))
        return lambda m: not f(m)
    if isinstance(e, Cond):
        c, a, b = (_compile(x, slots, wrap) for x in (e.test, e.then, e.orelse))
        return lambda m: a(m) if c(m) else b(m)
    assert isinstance(e, Binary)
    lf, rf = _compile(e.left, slots, wrap), _compile(e.right, slots, wrap)
    op = e.op
    if op == "&&":
        return lambda m: bool(lf(m)) and bool(rf(m))
    if op == "||":
        return lambda m: bool(lf(m)) or bool(rf(m))
    if op == "+":
        return lambda m: wrap(lf(m) + rf(m))
    if op == "-":
        return lambda m: wrap(lf(m) - rf(m))
    if op == "*":
        return lambda m: wrap(lf(m) * rf(m))
    cmp = _CMP[op]
    return lambda m: cmp(lf(m), rf(m))


def substitute(e: Expr, values: dict[str, object]) -> Expr:
    """Replace names in ``values`` by literals."""
    if isinstance(e, Name):
        return Lit(values[e.id]) if e.id in values else e
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, values))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, values), substitute(e.right, values))
    if isinstance(e, Cond):
        return Cond(substitute(e.test, values), substitute(e.then, values), substitute(e.orelse, values))
    return e


def _strip(s: str) -> str:
    return s[1:-1] if s.startswith("(") and s.endswith(")") else s


# ---------------------------------------------------------------------------
# Machine
# ---------------------------------------------------------------------------


class _Compiled(NamedTuple):
    li: LabeledInstruction
    tid: str
    ti: int
    slot: Optional[int]  # destination register slot
    loc: Optional[tuple]  # (name, None) or (base, index_fn, size)
    fns: tuple  # compiled expressions


class Machine:
    """Compiled program, producing SC and TSO successors."""

    def __init__(self, program: Program, buf_cap: int = 4):
        if buf_cap < 0:
            raise ValueError("buffer capacity must be >= 0")
        self.program = program
        self.buf_cap = buf_cap
        self.domain = program.domain
        self.slots = program.slots
        self.nshared = len(program.shared_vars)
        wrap = program.domain.wrap
        self.code: list[dict[str, list[_Compiled]]] = []
        for ti, t in enumerate(program.threads):
            table: dict[str, list[_Compiled]] = {}
            for li in t.code:
                table.setdefault(li.label, []).append(self._compile_inst(li, t.tid, ti, wrap))
            self.code.append(table)
        self._actions: dict[tuple, Action] = {}
        self._havoc_cache: dict[tuple, tuple[frozenset, str]] = {}

    def _compile_inst(self, li: LabeledInstruction, tid: str, ti: int, wrap) -> _Compiled:
        inst, slots = li.inst, self.slots
        loc = None
        if isinstance(inst, (Write, Read, Cas)):
            if inst.loc.index is None:
                loc = (inst.loc.name, None, 0)
            else:
                loc = (inst.loc.name, _compile(inst.loc.index, slots, wrap), self.program.arrays[inst.loc.name])
        slot = slots[inst.reg] if hasattr(inst, "reg") else None
        if isinstance(inst, (Write, LocalAssign)):
            fns = (_compile(inst.expr, slots, wrap),)
        elif isinstance(inst, Cas):
            fns = (_compile(inst.expected, slots, wrap), _compile(inst.new, slots, wrap))
        elif isinstance(inst, Assume):
            fns = (_compile(inst.cond, slots, wrap),)
        elif isinstance(inst, Havoc):
            # the shared variable gets an extra slot past the end of mem
            hslots = dict(slots)
            hslots[inst.var] = len(self.program.names)
            fns = (_compile(inst.pred, hslots, wrap),)
        else:
            fns = ()
        return _Compiled(li, tid, ti, slot, loc, fns)

    # -- helpers
    def act(self, tid: str, kind: str, var=None, value=None, pred=None, text="", origin=None) -> Action:
        key = (tid, kind, var, value, pred, text, origin)
        a = self._actions.get(key)
        if a is None:
            a = self._actions[key] = Action(tid, kind, var, value, pred, text, origin)
        return a

    def _resolve(self, c: _Compiled, mem) -> Optional[str]:
        name, index_fn, size = c.loc
        if index_fn is None:
            return name
        i = index_fn(mem)
        if 0 <= i < size:
            return f"{name}_{i}"
        return None

    def _havoc_choices(self, c: _Compiled, mem, xval: int):
        """(new value, extension, text) for every value satisfying the predicate."""
        inst: Havoc = c.li.inst
        pred_fn = c.fns[0]
        env = list(mem)
        env.append(xval)
        out = []
        for v in self.domain.values:
            env[c.slot] = v
            if not pred_fn(env):
                continue
            regs = tuple(mem[self.slots[r]] for r in self.program.thread(c.tid).registers)
            key = (c.li.index, c.tid, regs, v)
            hit = self._havoc_cache.get(key)
            if hit is None:
                probe = list(env)
                ext = []
                for xv in self.domain.values:
                    probe[-1] = xv
                    if pred_fn(probe):
                        ext.append(xv)
                values = {r: mem[self.slots[r]] for r in self.program.thread(c.tid).registers}
                values[inst.reg] = v
                text = _strip(str(substitute(inst.pred, values)))
                hit = self._havoc_cache[key] = (frozenset(ext), text)
            out.append((v, hit[0], hit[1]))
        return out

    @staticmethod
    def _set(mem: tuple, *pairs) -> tuple:
        m = list(mem)
        for i, v in pairs:
            m[i] = v
        return tuple(m)

    # -- initial states
    def sc_initial(self) -> ScState:
        p = self.program
        return ScState(tuple(t.init for t in p.threads), (0,) * len(p.names))

    def tso_initial(self) -> TsoState:
        p = self.program
        return TsoState(tuple(t.init for t in p.threads), (0,) * len(p.names), ((),) * len(p.threads))

    # -- SC
    def sc_successors(self, s: ScState) -> tuple[list[Step], int]:
        steps: list[Step] = []
        flags = 0
        pc, mem = s
        slots = self.slots
        for ti, table in enumerate(self.code):
            for c in table.get(pc[ti], ()):
                li, inst, tid = c.li, c.li.inst, c.tid
                origin = (li.label, li.index)
                npc = pc[:ti] + (li.goto,) + pc[ti + 1:]
                key = ("ins", ti, li.index, None)
                if isinstance(inst, Write):
                    x = self._resolve(c, mem)
                    if x is None:
                        flags |= STUCK
                        continue
                    v = c.fns[0](mem)
                    acts = (self.act(tid, "isu", origin=origin), self.act(tid, "com", x, v, origin=origin))
                    steps.append(Step(ti, key, acts, ScState(npc, self._set(mem, (slots[x], v))), Footprint(x, True), li))
                elif isinstance(inst, Read):
                    x = self._resolve(c, mem)
                    if x is None:
                        flags |= STUCK
                        continue
                    v = mem[slots[x]]
                    acts = (self.act(tid, "rd", x, v, origin=origin),)
                    steps.append(Step(ti, key, acts, ScState(npc, self._set(mem, (c.slot, v))), Footprint(x, False), li))
                elif isinstance(inst, Cas):
                    x = self._resolve(c, mem)
                    if x is None:
                        flags |= STUCK
                        continue
                    cur = mem[slots[x]]
                    if cur == c.fns[0](mem):
                        v = c.fns[1](mem)
                        acts = (self.act(tid, "isu", origin=origin), self.act(tid, "com", x, v, origin=origin))
                        nmem = self._set(mem, (c.slot, 1), (slots[x], v))
                    else:
                        acts = (self.act(tid, "rd", x, cur, origin=origin),)
                        nmem = self._set(mem, (c.slot, 0))
                    steps.append(Step(ti, key, acts, ScState(npc, nmem), Footprint(x, True), li))
                elif isinstance(inst, Havoc):
                    x = inst.var
                    for v, ext, text in self._havoc_choices(c, mem, mem[slots[x]]):
                        acts = (self.act(tid, "hvc", x, None, ext, text, origin),)
                        steps.append(Step(ti, ("ins", ti, li.index, v), acts,
                                          ScState(npc, self._set(mem, (c.slot, v))), Footprint(x, False), li))
                else:
                    nmem = mem
                    if isinstance(inst, LocalAssign):
                        nmem = self._set(mem, (c.slot, c.fns[0](mem)))
                    elif isinstance(inst, Assume):
                        if not c.fns[0](mem):
                            continue
                    acts = (self.act(tid, "tau", origin=origin),)
                    steps.append(Step(ti, key, acts, ScState(npc, nmem), None, li))
        return steps, flags

    # -- TSO
    def tso_successors(self, s: TsoState) -> tuple[list[Step], int]:
        steps: list[Step] = []
        flags = 0
        pc, mem, bufs = s
        slots = self.slots
        for ti, table in enumerate(self.code):
            buf = bufs[ti]
            tid = self.program.threads[ti].tid
            if buf:
                (x, v), rest = buf[0], buf[1:]
                nbufs = bufs[:ti] + (rest,) + bufs[ti + 1:]
                acts = (self.act(tid, "com", x, v),)
                steps.append(Step(ti, ("com", ti), acts, TsoState(pc, self._set(mem, (slots[x], v)), nbufs),
                                  Footprint(x, True), None))
            for c in table.get(pc[ti], ()):
                li, inst = c.li, c.li.inst
                origin = (li.label, li.index)
                npc = pc[:ti] + (li.goto,) + pc[ti + 1:]
                key = ("ins", ti, li.index, None)
                if isinstance(inst, Write):
                    x = self._resolve(c, mem)
                    if x is None:
                        flags |= STUCK
                        continue
                    if self.buf_cap == 0:
                        # write-through: no buffering at all
                        v = c.fns[0](mem)
                        acts = (self.act(tid, "isu", origin=origin), self.act(tid, "com", x, v, origin=origin))
                        steps.append(Step(ti, key, acts, TsoState(npc, self._set(mem, (slots[x], v)), bufs),
                                          Footprint(x, True), li))
                        continue
                    if len(buf) >= self.buf_cap:
                        flags |= BUFFER_FULL
                        continue
                    nbufs = bufs[:ti] + (buf + ((x, c.fns[0](mem)),),) + bufs[ti + 1:]
                    acts = (self.act(tid, "isu", origin=origin),)
                    steps.append(Step(ti, key, acts, TsoState(npc, mem, nbufs), None, li))
                elif isinstance(inst, (Read, Havoc)):
                    x = self._resolve(c, mem) if isinstance(inst, Read) else inst.var
                    if x is None:
                        flags |= STUCK
                        continue
                    v, fp = None, Footprint(x, False)
                    for bx, bv in reversed(buf):
                        if bx == x:
                            v, fp = bv, None
                            break
                    if v is None:
                        v = mem[slots[x]]
                    if isinstance(inst, Read):
                        acts = (self.act(tid, "rd", x, v, origin=origin),)
                        steps.append(Step(ti, key, acts, TsoState(npc, self._set(mem, (c.slot, v)), bufs), fp, li))
                    else:
                        for nv, ext, text in self._havoc_choices(c, mem, v):
                            acts = (self.act(tid, "hvc", x, None, ext, text, origin),)
                            steps.append(Step(ti, ("ins", ti, li.index, nv), acts,
                                              TsoState(npc, self._set(mem, (c.slot, nv)), bufs), fp, li))
                elif isinstance(inst, Cas):
                    if buf:
                        continue
                    x = self._resolve(c, mem)
                    if x is None:
                        flags |= STUCK
                        continue
                    cur = mem[slots[x]]
                    if cur == c.fns[0](mem):
                        v = c.fns[1](mem)
                        acts = (self.act(tid, "isu", origin=origin), self.act(tid, "com", x, v, origin=origin))
                        nmem = self._set(mem, (c.slot, 1), (slots[x], v))
                    else:
                        acts = (self.act(tid, "rd", x, cur, origin=origin),)
                        nmem = self._set(mem, (c.slot, 0))
                    steps.append(Step(ti, key, acts, TsoState(npc, nmem, bufs), Footprint(x, True), li))
                else:
                    nmem = mem
                    if isinstance(inst, Fence):
                        if buf:
                            continue
                    elif isinstance(inst, LocalAssign):
                        nmem = self._set(mem, (c.slot, c.fns[0](mem)))
                    elif isinstance(inst, Assume):
                        if not c.fns[0](mem):
                            continue
                    acts = (self.act(tid, "tau", origin=origin),)
                    steps.append(Step(ti, key, acts, TsoState(npc, nmem, bufs), None, li))
        return steps, flags


@lru_cache(maxsize=64)
def machine(p: Program, buf_cap: int = 4) -> Machine:
    return Machine(p, buf_cap)


def mem_of(p: Program, s) -> dict[str, int]:
    return dict(zip(p.names, s.mem))


def shared_valuation(p: Program, s) -> tuple[tuple[str, int], ...]:
    n = len(p.shared_vars)
    return tuple(zip(p.shared_vars, s.mem[:n]))


# ---------------------------------------------------------------------------
# Module-level API
# ---------------------------------------------------------------------------


def sc_initial(p: Program) -> ScState:
    return machine(p).sc_initial()


def sc_enabled(p: Program, s: ScState) -> list[Step]:
    return machine(p).sc_successors(s)[0]


def tso_initial(p: Program) -> TsoState:
    return machine(p).tso_initial()


def tso_enabled(p: Program, s: TsoState, buf_cap: int = 4) -> list[Step]:
    return machine(p, buf_cap).tso_successors(s)[0]
