"""Robustness against SC: direct trace comparison, hb cycles, minimal violations.

``check_robustness`` enumerates bounded TSO runs (sleep-set reduced, with
pending buffers drained) and, for each distinct trace, decides whether an
SC execution has the same trace.  A cyclic hb refutes immediately.  Under
the standard variant an acyclic hb suffices for a match; under the
extended variant the SC execution is searched for explicitly, guided by
the target trace.

``find_minimal_violation`` searches only runs of the canonical shape
``pi1 (t,isu) pi2 (t,rd,y,_) pi3 (t,com,x,_) pi4`` in which one thread ``t``
delays its writes and everything in ``pi3`` plus the commit is
hb-reachable from the read.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .explore import Execution, Stats, sc_state_space, state_space, tso_runs, tso_subtrees
from .lang import Program
from .semantics import Action, machine, shared_valuation
from .trace import EXTENDED, STANDARD, VARIANTS, Trace, build_trace, find_cycle

ROBUST = "Robust"
NOT_ROBUST = "NotRobust"
UNKNOWN = "Unknown"

DEFAULT_MATCH_BUDGET = 200_000


# ---------------------------------------------------------------------------
# SC matching
# ---------------------------------------------------------------------------


class MatchBudgetExceeded(Exception):
    pass


def sc_match(p: Program, target: Trace, max_states: int = DEFAULT_MATCH_BUDGET) -> Optional[Execution]:
    """An SC execution whose trace equals ``target``, or None.

    Raises ``MatchBudgetExceeded`` when more than ``max_states`` search
    states were visited without an answer.
    """
    m = machine(p)
    tids = [t.tid for t in p.threads]
    per_thread = [sorted((n for n in target.nodes if n[0] == tid), key=lambda n: n[1]) for tid in tids]
    lengths = tuple(len(x) for x in per_thread)
    shared = {x: i for i, x in enumerate(p.shared_vars)}
    source = {}
    for nid, node in target.nodes.items():
        if node.kind != "W":
            source[nid] = None
    for u, v in target.rf:
        source[v] = u
    so_pred: dict = {}
    for u, v in target.so:
        so_pred.setdefault(v, set()).add(u)

    tindex = {tid: i for i, tid in enumerate(tids)}
    # havoc sources depend on the commit history of their variable, so
    # for those variables the whole history is part of the search state
    havocked = {node.var for node in target.nodes.values() if node.kind == "H"}

    def executed(nid, pos) -> bool:
        return nid[1] < pos[tindex[nid[0]]]

    def havoc_source(hist, pred):
        j = len(hist)
        if j == 0:
            return None
        j -= 1
        while j > 0 and target.nodes[hist[j - 1]].value in pred:
            j -= 1
        if j == 0 and 0 in pred:
            return None
        return hist[j]

    start = (m.sc_initial(), (0,) * len(tids), ((),) * len(shared))
    seen = {start}
    stack = [(start, iter(m.sc_successors(start[0])[0]))]
    path: list[tuple[Action, ...]] = []
    if lengths == start[1]:
        return Execution((), start[0])
    while stack:
        (state, pos, hist), it = stack[-1]
        step = next(it, None)
        if step is None:
            stack.pop()
            if path:
                path.pop()
            continue
        ti = step.thread
        if pos[ti] == lengths[ti]:
            continue
        acts = step.actions
        npos, nhist = pos, hist
        head = acts[0]
        if head.kind != "tau":
            nid = per_thread[ti][pos[ti]]
            node = target.nodes[nid]
            if head.kind == "isu":
                com = acts[1]
                if node.kind != "W" or node.var != com.var or node.value != com.value:
                    continue
                if any(not executed(u, pos) for u in so_pred.get(nid, ())):
                    continue
                k = shared[com.var]
                h = hist[k] + (nid,) if com.var in havocked else (nid,)
                nhist = hist[:k] + (h,) + hist[k + 1:]
            elif head.kind == "rd":
                if node.kind != "R" or node.var != head.var or node.value != head.value:
                    continue
                h = hist[shared[head.var]]
                if (h[-1] if h else None) != source[nid]:
                    continue
            else:
                if node.kind != "H" or node.var != head.var or node.pred != head.pred:
                    continue
                if havoc_source(hist[shared[head.var]], node.pred) != source[nid]:
                    continue
            npos = pos[:ti] + (pos[ti] + 1,) + pos[ti + 1:]
        key = (step.state, npos, nhist)
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > max_states:
            raise MatchBudgetExceeded(len(seen))
        path.append(acts)
        if npos == lengths:
            actions = tuple(a for g in path for a in g)
            if build_trace(actions, target.variant) == target:
                return Execution(actions, step.state)
            path.pop()
            continue
        stack.append((key, iter(m.sc_successors(step.state)[0])))
    return None


def is_sc_shaped(actions) -> bool:
    """Every issue is immediately followed by a commit of the same thread."""
    actions = tuple(actions)
    for i, a in enumerate(actions):
        if a.kind == "isu":
            if i + 1 >= len(actions) or actions[i + 1].kind != "com" or actions[i + 1].thread != a.thread:
                return False
    return True


# ---------------------------------------------------------------------------
# Robustness
# ---------------------------------------------------------------------------


@dataclass
class RobustnessVerdict:
    status: str
    variant: str
    bounds: tuple[int, int]
    witness: Optional[Execution] = None
    reason: str = ""
    cycle: Optional[list] = None
    stats: Stats = field(default_factory=Stats)
    traces: int = 0  # distinct traces examined

    @property
    def truncated(self) -> bool:
        return self.stats.truncated

    def to_json(self) -> dict:
        out = {
            "status": self.status,
            "variant": self.variant,
            "bounds": {"max_steps": self.bounds[0], "buf_cap": self.bounds[1]},
            "truncated": self.truncated,
            "stats": self.stats.as_dict(),
        }
        if self.witness is not None:
            out["witness"] = [a.to_json() for a in self.witness.actions]
            out["reason"] = self.reason
        if self.cycle:
            out["cycle"] = [list(n) for n in self.cycle]
        return out


def classify(p: Program, e: Execution, variant: str, max_states: int = DEFAULT_MATCH_BUDGET):
    """(status, reason, cycle) for one complete execution."""
    tr = build_trace(e, variant)
    cycle = find_cycle(tr)
    if cycle is not None:
        return NOT_ROBUST, "cyclic hb", cycle
    if variant == STANDARD or is_sc_shaped(e.actions):
        return ROBUST, "", None
    try:
        found = sc_match(p, tr, max_states)
    except MatchBudgetExceeded:
        return UNKNOWN, "sc search budget exceeded", None
    if found is None:
        return NOT_ROBUST, "no trace-equal SC execution", None
    return ROBUST, "", None


def violations(p: Program, max_steps: int = 20, buf_cap: int = 4, variant: str = EXTENDED,
               max_states: int = DEFAULT_MATCH_BUDGET, stats: Optional[Stats] = None,
               subtree: Optional[int] = None) -> Iterator[tuple[Execution, str, Optional[list]]]:
    """Every explored run whose trace has no SC counterpart.

    Yields ``(execution, reason, cycle)``; a reason of
    ``"sc search budget exceeded"`` marks an undecided run.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown trace variant {variant!r}")
    cache: dict = {}
    for e in tso_runs(p, max_steps, buf_cap, reduce=True, stats=stats, drain=True, subtree=subtree):
        key = build_trace(e, variant).key()
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = classify(p, e, variant, max_states)
        status, reason, cycle = hit
        if status != ROBUST:
            yield e, reason, cycle


def _scan(p, max_steps, buf_cap, variant, max_states, subtree=None):
    """(first violation or None, unknown seen, stats) over one subtree."""
    stats = Stats()
    unknown = None
    for e, reason, cycle in violations(p, max_steps, buf_cap, variant, max_states, stats, subtree):
        if reason == "sc search budget exceeded":
            unknown = unknown or e
            continue
        return (e, reason, cycle), unknown, stats
    return None, unknown, stats


def _scan_job(args):
    return _scan(*args)


def check_robustness(p: Program, max_steps: int = 20, buf_cap: int = 4, variant: str = EXTENDED,
                     jobs: int = 1, max_states: int = DEFAULT_MATCH_BUDGET) -> RobustnessVerdict:
    """Decide trace-robustness up to the bounds.

    With ``jobs > 1`` the root subtrees are scanned in worker processes and
    merged in canonical order; the verdict and statistics are the same as
    for a sequential scan.
    """
    if max_steps < 0 or buf_cap < 0:
        raise ValueError("bounds must be >= 0")
    bounds = (max_steps, buf_cap)
    n = tso_subtrees(p, max_steps, buf_cap)
    if jobs > 1 and n > 1:
        args = [(p, max_steps, buf_cap, variant, max_states, i) for i in range(n)]
        with ProcessPoolExecutor(max_workers=min(jobs, n)) as pool:
            parts = list(pool.map(_scan_job, args))
    else:
        parts = [_scan(p, max_steps, buf_cap, variant, max_states)]
    total = Stats()
    unknown = None
    for found, unk, stats in parts:
        for k, v in stats.as_dict().items():
            setattr(total, k, getattr(total, k) + v)
        unknown = unknown or unk
        if found is not None:
            e, reason, cycle = found
            return RobustnessVerdict(NOT_ROBUST, variant, bounds, e, reason, cycle, total)
    if unknown is not None:
        return RobustnessVerdict(UNKNOWN, variant, bounds, None, "sc search budget exceeded", None, total)
    return RobustnessVerdict(ROBUST, variant, bounds, None, "", None, total)


# ---------------------------------------------------------------------------
# Minimal violations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimalViolation:
    execution: Execution
    attacker: str
    alpha: int  # index of the delayed issue
    theta: int  # index of the read from memory
    beta: int  # index of the commit of the delayed write
    delayed: int  # attacker actions from alpha (exclusive) through theta

    def to_json(self) -> dict:
        return {
            "attacker": self.attacker,
            "alpha": self.alpha,
            "theta": self.theta,
            "beta": self.beta,
            "delayed": self.delayed,
            "execution": [a.to_json() for a in self.execution.actions],
        }


def _write_after(summary: frozenset, x: str, v: int, variant: str) -> bool:
    """Whether a new commit of (x, v) gets an so/fr edge from the summarized nodes."""
    for fact in summary:
        kind = fact[0]
        if kind == "w" and fact[1] == x and (variant == STANDARD or fact[2] != v):
            return True
        if kind == "r" and fact[1] == x and (variant == STANDARD or fact[2] != v):
            return True
        if kind == "h" and fact[1] == x and v not in fact[3] and (variant == STANDARD or fact[2] != v):
            return True
    return False


class _ViolationSearch:
    def __init__(self, p: Program, attacker: int, delayed: int, max_steps: int, buf_cap: int, variant: str):
        self.p = p
        self.t = attacker
        self.d = delayed
        self.max_steps = max_steps
        self.variant = variant
        self.buffered = machine(p, buf_cap)
        self.atomic = machine(p, 0)
        self.slots = p.slots
        self.failed: dict = {}
        self.path: list[tuple[Action, ...]] = []
        self.marks: dict = {}

    def _memo(self, key, depth) -> bool:
        old = self.failed.get(key)
        if old is not None and old <= depth:
            return True
        self.failed[key] = depth
        return False

    def _atomic_steps(self, state, skip_thread: Optional[int] = None):
        for step in self.atomic.tso_successors(state)[0]:
            if step.thread != skip_thread and step.key[0] == "ins":
                yield step

    def run(self) -> Optional[tuple]:
        return self._phase1(self.atomic.tso_initial(), 0)

    def _push(self, step):
        self.path.append(step.actions)

    def _phase1(self, state, depth):
        if self._memo((1, state), depth):
            return None
        t = self.t
        for step in self.buffered.tso_successors(state)[0]:
            if step.thread == t and step.key[0] == "ins" and step.actions[0].kind == "isu" and len(step.actions) == 1:
                if depth + 1 > self.max_steps:
                    continue
                self._push(step)
                self.marks["alpha"] = depth
                r = self._phase2(step.state, depth + 1, 0)
                if r:
                    return r
                self.path.pop()
        for step in self._atomic_steps(state):
            nd = depth + len(step.actions)
            if nd > self.max_steps:
                continue
            self._push(step)
            r = self._phase1(step.state, nd)
            if r:
                return r
            self.path.pop()
        return None

    def _phase2(self, state, depth, k):
        if self._memo((2, state, k), depth):
            return None
        t = self.t
        for step in self.buffered.tso_successors(state)[0]:
            if step.thread != t or step.key[0] != "ins":
                continue
            nd = depth + len(step.actions)
            if nd > self.max_steps:
                continue
            a = step.actions[0]
            from_memory = a.kind in ("rd", "hvc") and step.footprint is not None
            if from_memory and k + 1 == self.d:
                # theta
                x = a.var
                srcval = state.mem[self.slots[x]]
                fact = ("r", x, a.value) if a.kind == "rd" else ("h", x, srcval, a.pred)
                self._push(step)
                self.marks["theta"] = depth
                self.theta_mem = state.mem
                r = self._phase3(step.state, nd, frozenset([fact]), ((),) * len(self.p.shared_vars))
                if r:
                    return r
                self.path.pop()
            elif k + 1 < self.d:
                self._push(step)
                r = self._phase2(step.state, nd, k + 1)
                if r:
                    return r
                self.path.pop()
        for step in self._atomic_steps(state, skip_thread=t):
            nd = depth + len(step.actions)
            if nd > self.max_steps:
                continue
            self._push(step)
            r = self._phase2(step.state, nd, k)
            if r:
                return r
            self.path.pop()
        return None

    def _rf_from_a(self, x, seqs, pred) -> bool:
        """Whether a read (``pred`` None) or havoc of ``x`` now reads from a pi3 write."""
        values = seqs[self.slots[x]]
        if not values:
            return False
        if pred is None:
            return True
        j = len(values) - 1
        while j > 0 and values[j - 1] in pred:
            j -= 1
        return not (j == 0 and self.theta_mem[self.slots[x]] in pred)

    def _phase3(self, state, depth, summary, seqs):
        # seqs: values written to each shared variable during pi3
        if self._memo((3, state, summary, seqs), depth):
            return None
        t = self.t
        variant = self.variant
        buf = state.buf[t]
        # beta: commit the delayed head
        if buf and depth + 1 <= self.max_steps:
            x, v = buf[0]
            if _write_after(summary, x, v, variant):
                for step in self.buffered.tso_successors(state)[0]:
                    if step.thread == t and step.key[0] == "com":
                        self._push(step)
                        self.marks["beta"] = depth
                        return step.state
        for step in self._atomic_steps(state, skip_thread=t):
            nd = depth + len(step.actions)
            if nd > self.max_steps:
                continue
            u = step.thread
            acts = step.actions
            nseqs = seqs
            in_a = ("thr", u) in summary
            added = {("thr", u)}
            head = acts[0]
            if head.kind == "tau":
                if not in_a:
                    continue
                added = set()
            elif head.kind == "isu":
                com = acts[1]
                in_a = in_a or _write_after(summary, com.var, com.value, variant)
                added.add(("w", com.var, com.value))
                k = self.slots[com.var]
                nseqs = seqs[:k] + (seqs[k] + (com.value,),) + seqs[k + 1:]
            else:
                x = head.var
                in_a = in_a or self._rf_from_a(x, seqs, head.pred)
                srcval = state.mem[self.slots[x]]
                if head.kind == "rd":
                    added.add(("r", x, head.value))
                else:
                    added.add(("h", x, srcval, head.pred))
            if not in_a:
                continue
            self._push(step)
            r = self._phase3(step.state, nd, summary | added, nseqs)
            if r:
                return r
            self.path.pop()
        return None


def find_minimal_violation(p: Program, max_steps: int = 20, buf_cap: int = 4,
                           variant: str = EXTENDED) -> Optional[MinimalViolation]:
    """The first minimal violation, trying smaller delay counts first."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown trace variant {variant!r}")
    if len(p.threads) < 2 or buf_cap < 1:
        return None
    for d in range(1, max_steps + 1):
        for ti, thread in enumerate(p.threads):
            search = _ViolationSearch(p, ti, d, max_steps, buf_cap, variant)
            final = search.run()
            if final is None:
                continue
            actions = tuple(a for g in search.path for a in g)
            m = machine(p, buf_cap)
            state = final
            while state.buf[ti]:
                step = next(s for s in m.tso_successors(state)[0] if s.thread == ti and s.key[0] == "com")
                actions += step.actions
                state = step.state
            # marks are depths in actions, i.e. flat indices
            alpha, theta, beta = (search.marks[k] for k in ("alpha", "theta", "beta"))
            return MinimalViolation(Execution(actions, state), thread.tid, alpha, theta, beta, d)
    return None


# ---------------------------------------------------------------------------
# Reachable valuations
# ---------------------------------------------------------------------------

SC = "sc"
TSO = "tso"


def valuation_search(p: Program, model: str, max_steps: int, buf_cap: int = 4) -> tuple[frozenset, bool]:
    """(shared valuations reached within ``max_steps`` actions, exhaustive?)."""
    model = model.lower()
    if model == SC:
        space = sc_state_space(p, max_steps)
        states = space.depth
    elif model == TSO:
        m = machine(p, buf_cap)
        space = state_space(m.tso_initial(), m.tso_successors, max_steps)
        states = [s for s in space.depth if not any(s.buf)]
    else:
        raise ValueError(f"unknown memory model {model!r}")
    return frozenset(shared_valuation(p, s) for s in states), space.complete


def reachable_valuations(p: Program, model: str, max_steps: int, buf_cap: int = 4) -> frozenset:
    return valuation_search(p, model, max_steps, buf_cap)[0]


def format_valuation(v) -> str:
    return "{" + ", ".join(f"{x}={val}" for x, val in v) + "}"
