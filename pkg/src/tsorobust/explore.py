"""Bounded depth-first enumeration of SC and TSO executions.

Executions are maximal paths of the bounded computation tree: a path ends
when no step is enabled, or when no enabled step fits in the remaining
action budget (``cut``).  Order is deterministic: threads by index, a
thread's commit before its instructions, instructions in source order,
havoc values ascending.

With ``reduce=True`` the search uses sleep sets: of all executions that
differ only by swapping adjacent commuting steps, at least one is
produced.  Commuting steps yield the same trace, so trace-level analyses
lose nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from .lang import Program
from .semantics import BUFFER_FULL, STUCK, Action, ScState, Step, TsoState, independent, machine


@dataclass(frozen=True)
class Execution:
    actions: tuple[Action, ...]
    final: object
    cut: bool = False  # the step bound ended this path
    pending: bool = False  # TSO: buffers non-empty when the path ended

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __str__(self) -> str:
        return " ".join(str(a) for a in self.actions)


@dataclass
class Stats:
    executions: int = 0
    cut: int = 0
    pending: int = 0
    stuck: int = 0
    buffer_full: int = 0
    blocked: int = 0

    @property
    def truncated(self) -> bool:
        return bool(self.cut or self.pending or self.buffer_full)

    def as_dict(self) -> dict:
        return dict(executions=self.executions, cut=self.cut, pending=self.pending,
                    stuck=self.stuck, buffer_full=self.buffer_full, blocked=self.blocked)


class _Frame:
    __slots__ = ("depth", "todo", "pos", "sleep")

    def __init__(self, depth, todo, sleep):
        self.depth = depth
        self.todo = todo
        self.pos = 0
        self.sleep = sleep


def dfs(
    initial,
    successors: Callable,
    max_steps: int,
    reduce: bool = False,
    stats: Optional[Stats] = None,
    sleep: Optional[dict] = None,
) -> Iterator[tuple[tuple[Action, ...], object, bool]]:
    """Yield ``(actions, final_state, cut)`` for every maximal bounded path.

    ``sleep`` seeds the root sleep set (used when a caller splits the tree).
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    stats = stats if stats is not None else Stats()
    path: list[tuple[Action, ...]] = []

    def open_frame(state, depth, sl):
        steps, flags = successors(state)
        if flags & STUCK:
            stats.stuck += 1
        if flags & BUFFER_FULL:
            stats.buffer_full += 1
        if not steps:
            return "leaf"
        fit = [s for s in steps if depth + len(s.actions) <= max_steps]
        if not fit:
            return "cut"
        todo = [s for s in fit if s.key not in sl] if sl else fit
        if not todo:
            stats.blocked += 1
            return None
        return _Frame(depth, todo, dict(sl) if reduce else None)

    def flat():
        return tuple(a for group in path for a in group)

    root = open_frame(initial, 0, sleep or {})
    if isinstance(root, str):
        yield (), initial, root == "cut"
        return
    if root is None:
        return
    stack = [root]
    while stack:
        frame = stack[-1]
        if frame.pos == len(frame.todo):
            stack.pop()
            if stack:
                path.pop()
            continue
        step: Step = frame.todo[frame.pos]
        frame.pos += 1
        child_sleep = {}
        if reduce:
            for k, (t, fp) in frame.sleep.items():
                if independent(t, fp, step.thread, step.footprint):
                    child_sleep[k] = (t, fp)
            frame.sleep[step.key] = (step.thread, step.footprint)
        path.append(step.actions)
        child = open_frame(step.state, frame.depth + len(step.actions), child_sleep)
        if isinstance(child, _Frame):
            stack.append(child)
        else:
            if child is not None:
                yield flat(), step.state, child == "cut"
            path.pop()


def sc_executions(p: Program, max_steps: int, reduce: bool = False,
                  stats: Optional[Stats] = None) -> Iterator[Execution]:
    """All SC executions with at most ``max_steps`` actions."""
    stats = stats if stats is not None else Stats()
    m = machine(p)
    for actions, final, cut in dfs(m.sc_initial(), m.sc_successors, max_steps, reduce, stats):
        stats.executions += 1
        if cut:
            stats.cut += 1
        yield Execution(actions, final, cut)


def _root_split(initial, successors, max_steps: int, reduce: bool):
    """Root steps within the bound, each with the sleep set its subtree starts from."""
    steps, flags = successors(initial)
    fit = [s for s in steps if len(s.actions) <= max_steps]
    out = []
    for i, step in enumerate(fit):
        sleep = {}
        if reduce:
            for prev in fit[:i]:
                if independent(prev.thread, prev.footprint, step.thread, step.footprint):
                    sleep[prev.key] = (prev.thread, prev.footprint)
        out.append((step, sleep))
    return out, flags


def _subtree(initial, successors, max_steps, reduce, stats, index):
    roots, flags = _root_split(initial, successors, max_steps, reduce)
    if not roots:
        yield from dfs(initial, successors, max_steps, reduce, stats)
        return
    if index >= len(roots):
        return
    if index == 0:
        if flags & STUCK:
            stats.stuck += 1
        if flags & BUFFER_FULL:
            stats.buffer_full += 1
    step, sleep = roots[index]
    for actions, final, cut in dfs(step.state, successors, max_steps - len(step.actions), reduce, stats, sleep):
        yield step.actions + actions, final, cut


def tso_subtrees(p: Program, max_steps: int, buf_cap: int = 4) -> int:
    """Number of independent root subtrees of the TSO search (0 if the root is a leaf)."""
    m = machine(p, buf_cap)
    return len(_root_split(m.tso_initial(), m.tso_successors, max_steps, False)[0])


def tso_runs(p: Program, max_steps: int, buf_cap: int = 4, reduce: bool = False,
             stats: Optional[Stats] = None, drain: bool = False,
             subtree: Optional[int] = None) -> Iterator[Execution]:
    """Every maximal bounded TSO path, including ones left with pending writes.

    With ``drain=True`` a path cut with non-empty buffers is completed by
    committing the remaining buffered writes (threads in index order), which
    may exceed ``max_steps``.  ``buf_cap=0`` makes writes write-through,
    which coincides with SC.  ``subtree=i`` restricts the search to the
    i-th root step (see ``tso_subtrees``); concatenating all subtrees in
    order gives the same runs and statistics as the full search.
    """
    if buf_cap < 0:
        raise ValueError("buf_cap must be >= 0")
    stats = stats if stats is not None else Stats()
    m = machine(p, buf_cap)
    if subtree is None:
        paths = dfs(m.tso_initial(), m.tso_successors, max_steps, reduce, stats)
    else:
        paths = _subtree(m.tso_initial(), m.tso_successors, max_steps, reduce, stats, subtree)
    for actions, final, cut in paths:
        if cut:
            stats.cut += 1
        if any(final.buf):
            stats.pending += 1
            if drain:
                actions, final = drain_buffers(p, actions, final, buf_cap)
                yield Execution(actions, final, cut, pending=True)
            else:
                yield Execution(actions, final, cut, pending=True)
            continue
        stats.executions += 1
        yield Execution(actions, final, cut)


def tso_executions(p: Program, max_steps: int, buf_cap: int = 4, reduce: bool = False,
                   stats: Optional[Stats] = None) -> Iterator[Execution]:
    """All TSO executions with at most ``max_steps`` actions ending with empty buffers."""
    for e in tso_runs(p, max_steps, buf_cap, reduce, stats):
        if not e.pending:
            yield e


def drain_buffers(p: Program, actions, state: TsoState, buf_cap: int = 4):
    m = machine(p, buf_cap)
    actions = list(actions)
    while any(state.buf):
        steps, _ = m.tso_successors(state)
        step = next(s for s in steps if s.key[0] == "com")
        actions.extend(step.actions)
        state = step.state
    return tuple(actions), state


def _replay(initial, successors, actions) -> set:
    actions = tuple(actions)
    n = len(actions)
    frontier = {(initial, 0)}
    done = set()
    while frontier:
        nxt = set()
        for s, i in frontier:
            if i == n:
                done.add(s)
                continue
            for step in successors(s)[0]:
                k = len(step.actions)
                if actions[i:i + k] == step.actions:
                    nxt.add((step.state, i + k))
        frontier = nxt
    return done


def replay_sc(p: Program, actions) -> set[ScState]:
    """States reachable from the SC initial state along exactly these labels."""
    m = machine(p)
    return _replay(m.sc_initial(), m.sc_successors, actions)


def replay_tso(p: Program, actions, buf_cap: int = 4) -> set[TsoState]:
    m = machine(p, buf_cap)
    return _replay(m.tso_initial(), m.tso_successors, actions)


@dataclass
class StateSpace:
    """States reachable within a bound, with shortest-path parent pointers.

    ``depth[s]`` counts actions.  ``complete`` is true when no step was
    dropped because of the bound or a full buffer, i.e. the space is the
    program's full reachable state space.
    """

    initial: object
    depth: dict
    parent: dict  # state -> (previous state, Step); absent for the initial state
    edges: dict  # state -> list of Step (only steps within the bound)
    complete: bool

    def path_to(self, s) -> tuple[Action, ...]:
        groups = []
        while s in self.parent:
            prev, step = self.parent[s]
            groups.append(step.actions)
            s = prev
        return tuple(a for g in reversed(groups) for a in g)


def state_space(initial, successors: Callable, max_steps: int) -> StateSpace:
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    depth = {initial: 0}
    parent: dict = {}
    edges: dict = {}
    complete = True
    buckets: dict[int, list] = {0: [initial]}
    d = 0
    while d <= max_steps:
        for s in buckets.pop(d, ()):
            if depth[s] != d or s in edges:
                continue
            steps, flags = successors(s)
            if flags & BUFFER_FULL:
                complete = False
            kept = []
            for step in steps:
                nd = d + len(step.actions)
                if nd > max_steps:
                    complete = False
                    continue
                kept.append(step)
                old = depth.get(step.state)
                if old is None or nd < old:
                    depth[step.state] = nd
                    parent[step.state] = (s, step)
                    buckets.setdefault(nd, []).append(step.state)
            edges[s] = kept
        d += 1
    return StateSpace(initial, depth, parent, edges, complete)


def sc_state_space(p: Program, max_steps: int) -> StateSpace:
    m = machine(p)
    return state_space(m.sc_initial(), m.sc_successors, max_steps)


def tso_state_space(p: Program, max_steps: int, buf_cap: int = 4) -> StateSpace:
    m = machine(p, buf_cap)
    return state_space(m.tso_initial(), m.tso_successors, max_steps)
