"""Read abstraction: replacing ``r := x`` by ``havoc(r, phi)``.

``phi`` may mention ``r`` (the value being chosen), the thread's other
registers and ``x``.  The rewrite is sound when ``r == x`` implies ``phi``:
the abstract program can then do everything the original does, under SC
and under TSO.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .lang import (
    Expr,
    Havoc,
    LabeledInstruction,
    Program,
    Read,
    ValidationError,
    evaluate,
    names_in,
    parse_expr,
    validate_program,
)
from .robustness import reachable_valuations


class AbstractionError(Exception):
    pass


@dataclass(frozen=True)
class AbstractionSpec:
    thread: Optional[str]  # None: the label must be unique across threads
    label: str
    predicate: Expr

    @classmethod
    def parse(cls, text: str) -> "AbstractionSpec":
        """``thread:label:phi`` (or ``label:phi``)."""
        parts = text.split(":", 2)
        if len(parts) == 3 and "?" not in parts[0] + parts[1]:
            tid, label, phi = parts
        elif len(parts) >= 2:
            tid, (label, phi) = None, text.split(":", 1)
        else:
            raise AbstractionError(f"bad abstraction spec {text!r}; expected thread:label:phi")
        return cls(tid.strip() if tid else None, label.strip(), parse_expr(phi))

    def __str__(self) -> str:
        head = f"{self.thread}:{self.label}" if self.thread else self.label
        return f"{head}:{self.predicate}"


def _target(spec: AbstractionSpec, p: Program) -> tuple[str, LabeledInstruction]:
    hits = []
    for t in p.threads:
        if spec.thread is not None and t.tid != spec.thread:
            continue
        for li in t.body.get(spec.label, ()):
            hits.append((t.tid, li))
    if spec.thread is not None and spec.thread not in p.tids:
        raise AbstractionError(f"unknown thread {spec.thread}")
    if not hits:
        raise AbstractionError(f"no instruction labelled {spec.label}")
    if len(hits) > 1:
        raise AbstractionError(f"label {spec.label} does not identify a single instruction")
    tid, li = hits[0]
    if not isinstance(li.inst, Read) or li.inst.loc.index is not None:
        raise AbstractionError(f"{tid}:{spec.label} is not a read of a shared variable")
    return tid, li


def validate_weakening(spec: AbstractionSpec, p: Program) -> bool:
    """Whether ``reg == var`` implies the predicate, for every valuation over the domain."""
    tid, li = _target(spec, p)
    reg, var = li.inst.reg, li.inst.loc.name
    names = set(names_in(spec.predicate))
    regs = set(p.thread(tid).registers)
    for n in sorted(names):
        if n == var or n in regs:
            continue
        if n in p.shared_vars or n in p.arrays:
            raise AbstractionError(f"predicate mentions {n}, but the read is of {var}")
        raise AbstractionError(f"predicate mentions {n}, which is not a register of {tid}")
    free = sorted(n for n in names if n in regs and n != reg)
    dom = p.domain
    for v in dom.values:
        for combo in itertools.product(dom.values, repeat=len(free)):
            env = dict(zip(free, combo))
            env[reg] = v
            if evaluate(spec.predicate, env, (var, v), dom) is not True:
                return False
    return True


def apply_abstraction(p: Program, specs: Iterable[AbstractionSpec]) -> Program:
    """A copy of ``p`` with each targeted read replaced by a havoc."""
    specs = list(specs)
    chosen: dict[tuple[str, int], tuple[AbstractionSpec, LabeledInstruction]] = {}
    for spec in specs:
        tid, li = _target(spec, p)
        if (tid, li.index) in chosen:
            raise AbstractionError(f"overlapping abstractions for {tid}:{li.label}")
        if not validate_weakening(spec, p):
            raise AbstractionError(f"{spec}: predicate is not implied by {li.inst.reg} == {li.inst.loc.name}")
        chosen[(tid, li.index)] = (spec, li)
    if not chosen:
        return p
    threads = []
    for t in p.threads:
        code = []
        for li in t.code:
            hit = chosen.get((t.tid, li.index))
            if hit is not None:
                spec, _ = hit
                li = replace(li, inst=Havoc(li.inst.reg, li.inst.loc.name, spec.predicate))
            code.append(li)
        threads.append(replace(t, code=tuple(code)))
    done = {(tid, spec.label) for (tid, _), (spec, _) in chosen.items()}
    kept = tuple(a for a in p.annotations if not any(a.label == lbl and a.tid in (None, tid) for tid, lbl in done))
    out = Program(p.name, p.decls, tuple(threads), p.domain, kept)
    try:
        validate_program(out)
    except ValidationError as err:
        raise AbstractionError(str(err)) from err
    return out


def specs_from_annotations(p: Program) -> list[AbstractionSpec]:
    """The ``abstract`` requests written in the program file."""
    out = []
    for a in p.annotations:
        spec = AbstractionSpec(a.tid, a.label, a.pred)
        tid, li = _target(spec, p)
        if li.inst.reg != a.reg:
            raise AbstractionError(f"annotation for {a.label} names register {a.reg}, the read assigns {li.inst.reg}")
        out.append(AbstractionSpec(tid, a.label, a.pred))
    return out


def check_abstraction_soundness(p: Program, abstract: Program, model: str, max_steps: int = 20,
                                buf_cap: int = 4) -> bool:
    """Whether every shared valuation ``p`` reaches is also reached by ``abstract``."""
    if p.shared_vars != abstract.shared_vars:
        raise AbstractionError("programs declare different shared variables")
    concrete = reachable_valuations(p, model, max_steps, buf_cap)
    return concrete <= reachable_valuations(abstract, model, max_steps, buf_cap)
