"""Movers, buffer-free reachability and the write-atomicity check.

Mover checks are semantic and local: an instruction moves right when, in
every reachable SC state, each step it takes followed by an other-thread
step can be replayed in the opposite order with the same labels and end in
the same state.  The exploration is bounded; a verdict is a certificate only
when the bounded state space turned out to be the full one.

A write is atomic when it is a left mover, or when every read or havoc that
is buffer-free reachable from it is a right mover.  A program whose writes
are all atomic is robust.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .explore import StateSpace, replay_sc, sc_state_space, state_space
from .lang import Cas, Fence, Havoc, LabeledInstruction, Program, Read, Write
from .semantics import Action, Step, machine

RIGHT = "right"
LEFT = "left"

LEFT_MOVER = "LeftMover"
ALL_READS_RIGHT = "AllReadsRightMover"
NOT_ATOMIC = "NotAtomic"


# ---------------------------------------------------------------------------
# Swapping adjacent steps of an explicit execution
# ---------------------------------------------------------------------------


def _units(actions: tuple[Action, ...]) -> list[tuple[int, int]]:
    """Split into (start, end) units; an isu and the com right after it form one unit."""
    out = []
    i = 0
    while i < len(actions):
        a = actions[i]
        if a.kind == "isu":
            if i + 1 >= len(actions) or actions[i + 1].kind != "com" or actions[i + 1].thread != a.thread:
                raise ValueError(f"not an SC execution: issue at {i} is not followed by its commit")
            out.append((i, i + 2))
            i += 2
        else:
            out.append((i, i + 1))
            i += 1
    return out


def _swap(p: Program, actions, i: int, direction: str) -> bool:
    actions = tuple(getattr(actions, "actions", actions))
    units = _units(actions)
    k = next((j for j, (s, e) in enumerate(units) if s <= i < e), None)
    if k is None:
        raise ValueError(f"position {i} out of range")
    other = k + 1 if direction == RIGHT else k - 1
    if not 0 <= other < len(units):
        raise ValueError(f"no action on the {direction} of position {i}")
    first, second = sorted((k, other))
    a0, a1 = units[first]
    b0, b1 = units[second]
    if actions[a0].thread == actions[b0].thread:
        raise ValueError("adjacent actions belong to the same thread")
    original = replay_sc(p, actions)
    if not original:
        raise ValueError("not a valid SC execution of the program")
    swapped = actions[:a0] + actions[b0:b1] + actions[a0:a1] + actions[b1:]
    return bool(replay_sc(p, swapped) & original)


def moves_right(p: Program, execution, i: int) -> bool:
    """Whether the action at ``i`` (0-based) can swap with the next other-thread action.

    Issue/commit pairs move as one unit.  True iff the swapped sequence is
    an SC execution of ``p`` that can end in a state the original reaches.
    """
    return _swap(p, execution, i, RIGHT)


def moves_left(p: Program, execution, i: int) -> bool:
    return _swap(p, execution, i, LEFT)


# ---------------------------------------------------------------------------
# Mover classification
# ---------------------------------------------------------------------------

InstrKey = tuple[int, int]  # (thread index, source index)


@dataclass
class MoverClass:
    thread: str
    label: str
    index: int
    instruction: str
    right_mover: bool = True
    left_mover: bool = True
    right_witness: Optional[tuple[tuple[Action, ...], int]] = None
    left_witness: Optional[tuple[tuple[Action, ...], int]] = None
    exhaustive: bool = True

    @property
    def kind(self) -> str:
        if self.right_mover and self.left_mover:
            return "both"
        if self.right_mover:
            return "right"
        if self.left_mover:
            return "left"
        return "non"

    def to_json(self) -> dict:
        out = {
            "thread": self.thread,
            "label": self.label,
            "index": self.index,
            "instruction": self.instruction,
            "right_mover": self.right_mover,
            "left_mover": self.left_mover,
            "exhaustive": self.exhaustive,
        }
        for name in ("right_witness", "left_witness"):
            w = getattr(self, name)
            if w is not None:
                out[name] = {"execution": [a.to_json() for a in w[0]], "position": w[1]}
        return out


def _commutes(succ, s, a: Step, b: Step) -> bool:
    """s -a-> -b-> t can be replayed as s -b'-> -a'-> t with the same labels."""
    target = b.state
    for b2 in succ(s)[0]:
        if b2.thread != b.thread or b2.actions != b.actions:
            continue
        for a2 in succ(b2.state)[0]:
            if a2.thread == a.thread and a2.actions == a.actions and a2.state == target:
                return True
    return False


class MoverAnalysis:
    """Mover flags for every instruction over a bounded SC state space."""

    def __init__(self, p: Program, max_steps: int = 20, space: Optional[StateSpace] = None):
        self.p = p
        self.max_steps = max_steps
        self.space = space if space is not None else sc_state_space(p, max_steps)
        self.exhaustive = self.space.complete
        self._classes: dict[InstrKey, MoverClass] = {}
        for ti, t in enumerate(p.threads):
            for li in t.code:
                self._classes[(ti, li.index)] = MoverClass(t.tid, li.label, li.index, str(li.inst),
                                                           exhaustive=self.exhaustive)
        self._run()

    def _run(self):
        succ = machine(self.p).sc_successors
        space = self.space
        for s, steps in space.edges.items():
            for a in steps:
                ka = (a.thread, a.inst.index)
                for b in space.edges.get(a.state, ()):
                    if b.thread == a.thread:
                        continue
                    kb = (b.thread, b.inst.index)
                    ca, cb = self._classes[ka], self._classes[kb]
                    if not ca.right_mover and not cb.left_mover:
                        continue
                    if _commutes(succ, s, a, b):
                        continue
                    prefix = space.path_to(s)
                    witness = prefix + a.actions + b.actions
                    if ca.right_mover:
                        ca.right_mover = False
                        ca.right_witness = (witness, len(prefix))
                    if cb.left_mover:
                        cb.left_mover = False
                        cb.left_witness = (witness, len(prefix) + len(a.actions))

    def get(self, li: Union[LabeledInstruction, tuple[str, str]], tid: Optional[str] = None) -> MoverClass:
        ti, li = _resolve(self.p, li, tid)
        return self._classes[(ti, li.index)]

    def classes(self) -> list[MoverClass]:
        return [self._classes[k] for k in sorted(self._classes)]


def classify_movers(p: Program, max_steps: int = 20) -> list[MoverClass]:
    return MoverAnalysis(p, max_steps).classes()


def _resolve(p: Program, ref, tid: Optional[str] = None) -> tuple[int, LabeledInstruction]:
    """(thread index, instruction) for a LabeledInstruction or a (thread, label) pair."""
    if isinstance(ref, LabeledInstruction):
        for ti, t in enumerate(p.threads):
            if tid is not None and t.tid != tid:
                continue
            if ref in t.code:
                return ti, ref
        raise KeyError(f"instruction {ref} not in program")
    tid, label = ref
    ti = p.thread_index(tid)
    found = p.threads[ti].body.get(label)
    if not found:
        raise KeyError(f"unknown label {label!r} in thread {tid}")
    if len(found) > 1:
        raise KeyError(f"label {label!r} of thread {tid} holds {len(found)} instructions")
    return ti, found[0]


# ---------------------------------------------------------------------------
# Buffer-free reachability
# ---------------------------------------------------------------------------


def _is_read(li: LabeledInstruction) -> bool:
    return isinstance(li.inst, (Read, Havoc))


def cfg_candidates(p: Program, tid: str, w: LabeledInstruction) -> set[int]:
    """Reads/havocs a path of the control-flow graph can reach from ``w`` without
    crossing a fence or cas, and without a write to their variable on the way.

    Over-approximates buffer-free reachability (array cells count as unknown).
    """
    t = p.thread(tid)
    body = t.body

    def var_of(li) -> Optional[str]:
        inst = li.inst
        if isinstance(inst, Havoc):
            return inst.var
        if inst.loc.index is None:
            return inst.loc.name
        return None

    start = frozenset([var_of(w)]) - {None}
    out: set[int] = set()
    seen = set()
    todo = deque([(w.goto, start)])
    while todo:
        label, written = todo.popleft()
        if (label, written) in seen:
            continue
        seen.add((label, written))
        for li in body.get(label, ()):
            inst = li.inst
            if isinstance(inst, (Fence, Cas)):
                continue
            nxt = written
            if isinstance(inst, Write):
                v = var_of(li)
                if v is not None:
                    nxt = written | {v}
            elif _is_read(li):
                v = var_of(li)
                if v is None or v not in written:
                    out.add(li.index)
            todo.append((li.goto, nxt))
    return out


@dataclass
class Reachability:
    reads: set[int]  # source indices of reachable read/havoc instructions
    exhaustive: bool
    witnesses: dict = field(default_factory=dict)  # read index -> actions


def buffer_free_reads(p: Program, w: Union[LabeledInstruction, tuple[str, str]], max_steps: int = 20,
                      tid: Optional[str] = None) -> Reachability:
    """All reads/havocs buffer-free reachable from write ``w`` in bounded SC runs.

    The search tracks, since the latest execution of ``w``, the variables
    the thread has written; a fence or cas clears the tracking.  A read or
    havoc of a variable outside that set is reachable.
    """
    ti, w = _resolve(p, w, tid)
    if not isinstance(w.inst, Write):
        raise ValueError(f"{w} is not a write")
    candidates = cfg_candidates(p, p.threads[ti].tid, w)
    if not candidates:
        return Reachability(set(), True)
    m = machine(p)

    def successors(node):
        s, written = node
        steps, flags = m.sc_successors(s)
        out = []
        for step in steps:
            mon = written
            if step.thread == ti:
                li = step.inst
                if li.index == w.index:
                    mon = frozenset([step.actions[1].var])
                elif mon is not None:
                    if isinstance(li.inst, (Fence, Cas)):
                        mon = None
                    elif isinstance(li.inst, Write):
                        mon = mon | {step.actions[1].var}
            out.append(step._replace(state=(step.state, mon)))
        return out, flags

    space = state_space((m.sc_initial(), None), successors, max_steps)
    witnesses: dict[int, tuple[Action, ...]] = {}
    for node, steps in space.edges.items():
        written = node[1]
        if written is None:
            continue
        for step in steps:
            li = step.inst
            if step.thread != ti or li.index not in candidates or li.index in witnesses:
                continue
            if step.actions[0].var not in written:
                witnesses[li.index] = space.path_to(node) + step.actions
    reads = set(witnesses)
    return Reachability(reads, space.complete or reads == candidates, witnesses)


def buffer_free_reachable(p: Program, w, r, max_steps: int = 20, tid: Optional[str] = None) -> bool:
    """Whether read/havoc ``r`` is buffer-free reachable from write ``w`` (same thread)."""
    tw, w = _resolve(p, w, tid)
    tr, r = _resolve(p, r, tid)
    if tw != tr:
        raise ValueError("write and read must belong to the same thread")
    if not _is_read(r):
        raise ValueError(f"{r} is not a read or havoc")
    return r.index in buffer_free_reads(p, w, max_steps, p.threads[tw].tid).reads


# ---------------------------------------------------------------------------
# Write atomicity
# ---------------------------------------------------------------------------


@dataclass
class WriteAtomicity:
    thread: str
    label: str
    index: int
    instruction: str
    atomic: bool
    via: str
    left_mover: bool
    reachable_reads: list[tuple[str, int, str]]  # (label, index, text)
    offending_reads: list[tuple[str, int, str]]

    def to_json(self) -> dict:
        return {
            "thread": self.thread,
            "label": self.label,
            "index": self.index,
            "instruction": self.instruction,
            "atomic": self.atomic,
            "via": self.via,
            "left_mover": self.left_mover,
            "reachable_reads": [list(r) for r in self.reachable_reads],
            "offending_reads": [list(r) for r in self.offending_reads],
        }


@dataclass
class AtomicityReport:
    program: str
    max_steps: int
    writes: list[WriteAtomicity]
    movers: list[MoverClass]
    exhaustive: bool

    @property
    def atomic(self) -> bool:
        return all(w.atomic for w in self.writes)

    @property
    def certified(self) -> bool:
        """Atomic with every underlying check exhaustive: robustness is proven."""
        return self.atomic and self.exhaustive

    def offending(self) -> list[tuple[str, str, int, str]]:
        out = []
        for w in self.writes:
            for label, index, text in w.offending_reads:
                out.append((w.thread, label, index, text))
        return sorted(set(out), key=lambda r: (r[0], r[2]))

    def to_json(self) -> dict:
        return {
            "program": self.program,
            "max_steps": self.max_steps,
            "atomic": self.atomic,
            "exhaustive": self.exhaustive,
            "writes": [w.to_json() for w in self.writes],
            "movers": [m.to_json() for m in self.movers],
        }


def check_write_atomicity(p: Program, max_steps: int = 20) -> AtomicityReport:
    movers = MoverAnalysis(p, max_steps)
    exhaustive = movers.exhaustive
    writes = []
    for ti, t in enumerate(p.threads):
        for li in t.code:
            if not isinstance(li.inst, Write):
                continue
            mc = movers.get(li, t.tid)
            reach = buffer_free_reads(p, li, max_steps, t.tid)
            exhaustive = exhaustive and reach.exhaustive
            body = {x.index: x for x in t.code}
            reads = [(body[i].label, i, str(body[i].inst)) for i in sorted(reach.reads)]
            bad = [r for r in reads if not movers.get(body[r[1]], t.tid).right_mover]
            if mc.left_mover:
                via = LEFT_MOVER
            elif not bad:
                via = ALL_READS_RIGHT
            else:
                via = NOT_ATOMIC
            writes.append(WriteAtomicity(t.tid, li.label, li.index, str(li.inst), via != NOT_ATOMIC, via,
                                         mc.left_mover, reads, bad if via == NOT_ATOMIC else []))
    return AtomicityReport(p.name, max_steps, writes, movers.classes(), exhaustive)


def right_movers(classes: Iterable[MoverClass]) -> set[tuple[str, int]]:
    return {(c.thread, c.index) for c in classes if c.right_mover}
