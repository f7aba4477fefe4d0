"""Traces: the happens-before graph of an execution's shared-memory actions.

Nodes are the non-tau actions, with a write's issue and commit merged into
one node.  A node is identified by ``(thread, po position)`` so traces of
different interleavings of the same accesses compare equal.

Two variants differ in store order.  ``STANDARD`` totally orders all
commits to a variable; ``EXTENDED`` keeps only pairs writing different
values.  From-read is read-from composed with the variant's store order,
except for havoc nodes, which only conflict with commits that falsify
their constraint (and everything store-ordered after those).

A havoc reads from the first commit of the run of constraint-satisfying
commits that ends at the commit it observed.  Any position inside that
run yields the same from-read edges, so the choice makes havoc nodes
movable across writes that keep their constraint true.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Optional, Sequence

from .semantics import Action

STANDARD = "standard"
EXTENDED = "extended"
VARIANTS = (STANDARD, EXTENDED)

NodeId = tuple[str, int]
Edge = tuple[NodeId, NodeId]


class MalformedExecution(Exception):
    pass


@dataclass(frozen=True)
class TraceNode:
    thread: str
    kind: str  # "W", "R" or "H"
    var: str
    value: Optional[int] = None
    pred: Optional[frozenset] = None
    text: str = field(default="", compare=False)
    origin: Optional[tuple] = field(default=None, compare=False)

    def label(self) -> str:
        if self.kind == "H":
            return f"{self.thread}:hvc {self.var} {self.text}"
        kind = "wr" if self.kind == "W" else "rd"
        return f"{self.thread}:{kind} {self.var}={self.value}"


@dataclass(frozen=True)
class Trace:
    nodes: dict  # NodeId -> TraceNode
    po: frozenset
    so: frozenset
    rf: frozenset
    fr: frozenset
    variant: str = EXTENDED

    def edges(self) -> Iterable[tuple[str, Edge]]:
        for rel in ("po", "so", "rf", "fr"):
            for e in sorted(getattr(self, rel)):
                yield rel, e

    @property
    def hb(self) -> frozenset:
        return self.po | self.so | self.rf | self.fr

    def key(self) -> tuple:
        return (self.variant, tuple(sorted(self.nodes.items())), self.po, self.so, self.rf, self.fr)

    def __eq__(self, other) -> bool:
        return isinstance(other, Trace) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())


def _match_issues(actions: Sequence[Action]) -> dict[int, int]:
    """Map each isu index to the index of its commit (k-th isu <-> k-th com per thread)."""
    issues: dict[str, list[int]] = {}
    commits: dict[str, list[int]] = {}
    for i, a in enumerate(actions):
        if a.kind == "isu":
            issues.setdefault(a.thread, []).append(i)
        elif a.kind == "com":
            commits.setdefault(a.thread, []).append(i)
    out = {}
    for t, isus in issues.items():
        coms = commits.get(t, [])
        if len(coms) > len(isus):
            raise MalformedExecution(f"thread {t} commits more writes than it issued")
        for i, c in zip(isus, coms):
            if c < i:
                raise MalformedExecution(f"commit at {c} precedes its issue at {i}")
            out[i] = c
    for t, coms in commits.items():
        if t not in issues and coms:
            raise MalformedExecution(f"thread {t} commits without issuing")
    return out


class _Init:
    """The initial value 0 of a variable, acting as an implicit first write."""

    value = 0

    def __repr__(self) -> str:
        return "INIT"


INIT = _Init()


def _build(actions: Sequence[Action], variant: str):
    if variant not in VARIANTS:
        raise ValueError(f"unknown trace variant {variant!r}")
    actions = tuple(actions)
    match = _match_issues(actions)
    nodes: dict[NodeId, TraceNode] = {}
    po_index: dict[str, int] = {}
    node_at: dict[int, NodeId] = {}  # action index (isu, rd, hvc) -> node
    commit_node: dict[int, NodeId] = {}  # com index -> node
    for i, a in enumerate(actions):
        if a.kind in ("tau", "com"):
            continue
        k = po_index.get(a.thread, 0)
        po_index[a.thread] = k + 1
        nid = (a.thread, k)
        if a.kind == "isu":
            c = match.get(i)
            if c is None:
                raise MalformedExecution(f"write issued at {i} is never committed")
            com = actions[c]
            nodes[nid] = TraceNode(a.thread, "W", com.var, com.value, origin=a.origin)
            commit_node[c] = nid
        elif a.kind == "rd":
            nodes[nid] = TraceNode(a.thread, "R", a.var, a.value, origin=a.origin)
        elif a.kind == "hvc":
            nodes[nid] = TraceNode(a.thread, "H", a.var, None, a.pred, a.text, a.origin)
        else:
            raise MalformedExecution(f"unknown action kind {a.kind!r}")
        node_at[i] = nid

    # per-variable commit order
    commits: dict[str, list[NodeId]] = {}
    for c in sorted(commit_node):
        commits.setdefault(actions[c].var, []).append(commit_node[c])
    commit_pos = {nid: (nodes[nid].var, j) for var, lst in commits.items() for j, nid in enumerate(lst)}

    # read-from: the thread's latest pending write to x, else the latest commit to x
    sources: dict[NodeId, object] = {}
    last_commit: dict[str, NodeId] = {}
    outstanding: dict[str, list[int]] = {}  # thread -> isu indices issued, not yet committed
    for i, a in enumerate(actions):
        if a.kind == "isu":
            outstanding.setdefault(a.thread, []).append(i)
        elif a.kind == "com":
            outstanding[a.thread].pop(0)
            if i in commit_node:
                last_commit[a.var] = commit_node[i]
        elif a.kind in ("rd", "hvc"):
            nid = node_at[i]
            src = None
            for j in reversed(outstanding.get(a.thread, [])):
                c = match[j]
                if actions[c].var == a.var:
                    src = commit_node[c]
                    break
            if src is None:
                src = last_commit.get(a.var, INIT)
            if a.kind == "hvc":
                src = _run_start(src, commits.get(a.var, []), commit_pos, nodes, a.pred)
            if a.kind == "rd":
                sv = INIT.value if src is INIT else nodes[src].value
                if sv != a.value:
                    raise MalformedExecution(f"read at {i} returns {a.value} but its source wrote {sv}")
            sources[nid] = src

    def so_pair(x, y) -> bool:
        """x store-ordered before y (x may be INIT)."""
        if x is INIT:
            before = True
        else:
            before = commit_pos[x][1] < commit_pos[y][1]
        if not before:
            return False
        if variant == STANDARD:
            return True
        xv = INIT.value if x is INIT else nodes[x].value
        return xv != nodes[y].value

    po = set()
    by_thread: dict[str, list[NodeId]] = {}
    for nid in sorted(nodes, key=lambda n: (n[0], n[1])):
        by_thread.setdefault(nid[0], []).append(nid)
    for lst in by_thread.values():
        for i in range(len(lst)):
            for j in range(i + 1, len(lst)):
                po.add((lst[i], lst[j]))

    so = set()
    for lst in commits.values():
        for i in range(len(lst)):
            for j in range(i + 1, len(lst)):
                if so_pair(lst[i], lst[j]):
                    so.add((lst[i], lst[j]))

    rf = set()
    fr = set()
    for nid, src in sources.items():
        if src is not INIT:
            rf.add((src, nid))
        node = nodes[nid]
        later = commits.get(node.var, [])
        if node.kind == "R":
            for w in later:
                if w != src and so_pair(src, w):
                    fr.add((nid, w))
        else:
            hit = [w for w in later if w != src and so_pair(src, w) and nodes[w].value not in node.pred]
            closed = set(hit)
            changed = True
            while changed:
                changed = False
                for w in later:
                    if w not in closed and any(so_pair(g, w) for g in closed):
                        closed.add(w)
                        changed = True
            fr.update((nid, w) for w in closed)

    return Trace(nodes, frozenset(po), frozenset(so), frozenset(rf), frozenset(fr), variant), sources


def _run_start(src, commits, commit_pos, nodes, pred):
    """First commit of the run of ``pred``-satisfying commits ending at ``src``."""
    if src is INIT:
        return INIT
    j = commit_pos[src][1]
    while j > 0 and nodes[commits[j - 1]].value in pred:
        j -= 1
    if j == 0 and INIT.value in pred:
        return INIT
    return commits[j]


def build_trace(execution, variant: str = EXTENDED) -> Trace:
    """The trace of an execution (an ``Execution`` or any iterable of actions).

    Raises ``MalformedExecution`` if a write is never committed or a read
    disagrees with its source.
    """
    actions = tuple(getattr(execution, "actions", execution))
    return _build(actions, variant)[0]


def read_sources(execution, variant: str = EXTENDED) -> dict:
    """Read/havoc node -> the write node it reads from (or ``INIT``).

    Reads get their operational source; havocs the start of its run.
    """
    actions = tuple(getattr(execution, "actions", execution))
    return _build(actions, variant)[1]


def traces_equal(a: Trace, b: Trace) -> bool:
    if a.variant != b.variant:
        raise ValueError("cannot compare traces of different variants")
    return a == b


def hb_acyclic(tr: Trace) -> bool:
    return find_cycle(tr) is None


def find_cycle(tr: Trace) -> Optional[list[NodeId]]:
    graph: dict[NodeId, set[NodeId]] = {n: set() for n in tr.nodes}
    for u, v in tr.hb:
        graph[v].add(u)  # TopologicalSorter takes predecessors
    try:
        tuple(TopologicalSorter(graph).static_order())
    except CycleError as err:
        return list(err.args[1])
    return None


def successors(tr: Trace) -> dict[NodeId, set[NodeId]]:
    out: dict[NodeId, set[NodeId]] = {n: set() for n in tr.nodes}
    for u, v in tr.hb:
        out[u].add(v)
    return out


def reachable_from(tr: Trace, start: NodeId) -> set[NodeId]:
    """Nodes reachable from ``start`` by one or more hb edges."""
    succ = successors(tr)
    seen: set[NodeId] = set()
    todo = list(succ.get(start, ()))
    while todo:
        n = todo.pop()
        if n in seen:
            continue
        seen.add(n)
        todo.extend(succ[n])
    return seen


def transitive_reduction(tr: Trace) -> list[tuple[str, Edge]]:
    """Edges of ``tr`` minus those implied by longer hb paths (acyclic traces only)."""
    succ = successors(tr)
    out = []
    for rel, (u, v) in tr.edges():
        implied = any(w != v and v in _reach(succ, w) for w in succ[u])
        if not implied:
            out.append((rel, (u, v)))
    return out


def _reach(succ, start) -> set:
    seen = {start}
    todo = [start]
    while todo:
        n = todo.pop()
        for m in succ[n]:
            if m not in seen:
                seen.add(m)
                todo.append(m)
    return seen


def to_dot(tr: Trace, reduce: bool = True, name: str = "trace") -> str:
    """Graphviz rendering; transitive reduction applies only when hb is acyclic."""
    ids = {nid: f"n_{nid[0]}_{nid[1]}" for nid in tr.nodes}
    lines = [f"digraph {name} {{"]
    for nid in sorted(tr.nodes):
        label = tr.nodes[nid].label().replace('"', '\\"')
        lines.append(f'  {ids[nid]} [label="{label}"];')
    edges = transitive_reduction(tr) if reduce and hb_acyclic(tr) else list(tr.edges())
    for rel, (u, v) in edges:
        lines.append(f'  {ids[u]} -> {ids[v]} [label="{rel}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
