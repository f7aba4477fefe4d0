"""Command-line front end.

Exit codes: 0 the property holds, 1 refuted (with a witness), 2 unknown,
3 usage, I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from . import abstraction, explore, mover, robustness, trace
from .lang import ParseError, Program, ValidationError, format_program, parse_program
from .semantics import format_execution

OK, REFUTED, UNKNOWN, ERROR = 0, 1, 2, 3

COMMANDS = ("parse", "explore", "robust", "atomic", "abstract", "compare-states", "trace-dot")
BUNDLED = Path(__file__).resolve().parent / "corpus"


class UsageError(Exception):
    pass


def resolve_program(path: str) -> Path:
    """``path`` as given, else relative to $TSOROBUST_CORPUS, else in the bundled corpus."""
    p = Path(path)
    if p.is_file():
        return p
    roots = []
    env = os.environ.get("TSOROBUST_CORPUS")
    if env:
        roots.append(Path(env))
    roots.append(BUNDLED)
    for root in roots:
        for cand in (root / p, root / p.name):
            if cand.is_file():
                return cand
    raise UsageError(f"cannot find program {path}")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsorobust", description="TSO robustness analyses for small concurrent programs.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("program", help="program file (also looked up in $TSOROBUST_CORPUS and the bundled corpus)")
    ap.add_argument("--steps", type=int, default=20, help="bound on execution length in actions (default 20)")
    ap.add_argument("--buf", type=int, default=4, help="store buffer capacity (default 4)")
    ap.add_argument("--variant", choices=trace.VARIANTS, default=trace.EXTENDED)
    ap.add_argument("--abstract", action="append", default=[], metavar="THREAD:LABEL:PHI",
                    help="replace the read at LABEL by havoc(reg, PHI); repeatable")
    ap.add_argument("--annotations", action="store_true",
                    help="also apply the abstract annotations written in the file")
    ap.add_argument("--format", choices=("text", "json", "dot"), default="text")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes (output does not depend on it)")
    ap.add_argument("--model", choices=("sc", "tso"), default="tso", help="memory model for explore/trace-dot")
    ap.add_argument("--limit", type=int, default=10, help="executions printed by explore")
    ap.add_argument("--index", type=int, default=0, help="execution rendered by trace-dot")
    ap.add_argument("--witness", action="store_true", help="trace-dot: render the robustness witness")
    ap.add_argument("--minimal", action="store_true", help="robust: also search for a minimal violation")
    return ap


def _load(args) -> tuple[Program, Program]:
    path = resolve_program(args.program)
    try:
        text = path.read_text()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err}") from err
    original = parse_program(text)
    specs = [abstraction.AbstractionSpec.parse(s) for s in args.abstract]
    if args.annotations or args.command == "abstract":
        specs = abstraction.specs_from_annotations(original) + specs
    return original, abstraction.apply_abstraction(original, specs) if specs else original


def _emit(out: TextIO, args, data: dict, text_lines: Sequence[str]) -> None:
    if args.format == "json":
        out.write(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        out.write("\n".join(text_lines) + "\n")


def _bounds_line(args) -> str:
    return f"bounds: max_steps={args.steps} buf_cap={args.buf}"


def _header(p: Program, args) -> list[str]:
    return [f"program: {p.name}", _bounds_line(args)]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_parse(p: Program, original: Program, args, out) -> int:
    data = {
        "program": p.name,
        "domain": [p.domain.lo, p.domain.hi],
        "shared_vars": list(p.shared_vars),
        "threads": [
            {"id": t.tid, "registers": list(t.registers), "init": t.init, "instructions": len(t.code)}
            for t in p.threads
        ],
    }
    if args.format == "json":
        _emit(out, args, data, [])
    else:
        out.write(format_program(p))
    return OK


def cmd_explore(p: Program, original: Program, args, out) -> int:
    stats = explore.Stats()
    if args.model == "sc":
        runs = explore.sc_executions(p, args.steps, stats=stats)
    else:
        runs = explore.tso_executions(p, args.steps, args.buf, stats=stats)
    shown = []
    for e in runs:
        if len(shown) < args.limit:
            shown.append(e)
    data = {
        "program": p.name,
        "model": args.model,
        "bounds": {"max_steps": args.steps, "buf_cap": args.buf},
        "stats": stats.as_dict(),
        "executions": [[a.to_json() for a in e.actions] for e in shown],
    }
    lines = _header(p, args) + [f"model: {args.model}"]
    lines += [f"{k}: {v}" for k, v in stats.as_dict().items()]
    for i, e in enumerate(shown):
        lines.append(f"-- execution {i}{' (cut)' if e.cut else ''}")
        if e.actions:
            lines.append(format_execution(e.actions))
    _emit(out, args, data, lines)
    return OK


def cmd_robust(p: Program, original: Program, args, out) -> int:
    v = robustness.check_robustness(p, args.steps, args.buf, args.variant, jobs=args.jobs)
    data = {"program": p.name, **v.to_json()}
    lines = _header(p, args) + [f"variant: {v.variant}", f"status: {v.status}"]
    if v.status == robustness.ROBUST and v.truncated:
        lines.append("note: robust up to the bounds")
    lines += [f"{k}: {val}" for k, val in v.stats.as_dict().items()]
    if v.witness is not None:
        lines.append(f"reason: {v.reason}")
        lines.append("witness:")
        lines.append(format_execution(v.witness.actions))
        if v.cycle:
            lines.append("cycle: " + " -> ".join(f"{t}#{k}" for t, k in v.cycle))
    if args.minimal:
        mv = robustness.find_minimal_violation(p, args.steps, args.buf, args.variant)
        data["minimal_violation"] = mv.to_json() if mv else None
        if mv is None:
            lines.append("minimal violation: none")
        else:
            lines.append(f"minimal violation: attacker {mv.attacker}, delayed {mv.delayed}, "
                         f"alpha {mv.alpha}, theta {mv.theta}, beta {mv.beta}")
            lines.append(format_execution(mv.execution.actions))
    _emit(out, args, data, lines)
    return {robustness.ROBUST: OK, robustness.NOT_ROBUST: REFUTED}.get(v.status, UNKNOWN)


def cmd_atomic(p: Program, original: Program, args, out) -> int:
    r = mover.check_write_atomicity(p, args.steps)
    data = r.to_json()
    lines = [f"program: {p.name}", f"bounds: max_steps={args.steps}",
             f"write atomic: {'yes' if r.atomic else 'no'}",
             f"exhaustive: {'yes' if r.exhaustive else 'no'}",
             f"certifies robustness: {'yes' if r.certified else 'no'}"]
    for w in r.writes:
        line = f"write {w.thread} {w.label}: {w.instruction} -> {w.via}"
        if w.reachable_reads:
            line += " (reads: " + ", ".join(lbl for lbl, _, _ in w.reachable_reads) + ")"
        lines.append(line)
    for t, label, _, text in r.offending():
        lines.append(f"offending read {t} {label}: {text}")
    lines.append("movers:")
    for c in r.movers:
        lines.append(f"  {c.thread} {c.label}: {c.instruction} [{c.kind}]")
    _emit(out, args, data, lines)
    return OK if r.atomic else REFUTED


def cmd_abstract(p: Program, original: Program, args, out) -> int:
    results = {}
    for model in ("sc", "tso"):
        conc, c1 = robustness.valuation_search(original, model, args.steps, args.buf)
        abst, c2 = robustness.valuation_search(p, model, args.steps, args.buf)
        results[model] = (conc, abst, c1 and c2)
    sound = all(conc <= abst for conc, abst, _ in results.values())
    data = {
        "program": p.name,
        "bounds": {"max_steps": args.steps, "buf_cap": args.buf},
        "sound": sound,
        "abstract_program": format_program(p),
    }
    lines = _header(p, args)
    for model, (conc, abst, complete) in results.items():
        missing = sorted(conc - abst)
        data[model] = {
            "original": len(conc),
            "abstract": len(abst),
            "equal": conc == abst,
            "exhaustive": complete,
            "missing": [robustness.format_valuation(v) for v in missing],
        }
        rel = "=" if conc == abst else ("<" if conc <= abst else "not <=")
        lines.append(f"{model}: original {len(conc)} {rel} abstract {len(abst)} valuations")
        lines += [f"  missing {robustness.format_valuation(v)}" for v in missing]
    lines.append(f"sound: {'yes' if sound else 'no'}")
    lines.append("")
    lines.append(format_program(p).rstrip("\n"))
    _emit(out, args, data, lines)
    return OK if sound else REFUTED


def cmd_compare_states(p: Program, original: Program, args, out) -> int:
    sc, c1 = robustness.valuation_search(p, "sc", args.steps)
    tso, c2 = robustness.valuation_search(p, "tso", args.steps, args.buf)
    only_tso = sorted(tso - sc)
    only_sc = sorted(sc - tso)
    data = {
        "program": p.name,
        "bounds": {"max_steps": args.steps, "buf_cap": args.buf},
        "sc": len(sc),
        "tso": len(tso),
        "equal": sc == tso,
        "exhaustive": c1 and c2,
        "only_tso": [robustness.format_valuation(v) for v in only_tso],
        "only_sc": [robustness.format_valuation(v) for v in only_sc],
    }
    lines = _header(p, args) + [f"sc valuations: {len(sc)}", f"tso valuations: {len(tso)}",
                                f"equal: {'yes' if sc == tso else 'no'}"]
    lines += [f"only under tso: {robustness.format_valuation(v)}" for v in only_tso]
    lines += [f"only under sc: {robustness.format_valuation(v)}" for v in only_sc]
    _emit(out, args, data, lines)
    return OK if sc == tso else REFUTED


def cmd_trace_dot(p: Program, original: Program, args, out) -> int:
    if args.witness:
        v = robustness.check_robustness(p, args.steps, args.buf, args.variant, jobs=args.jobs)
        if v.witness is None:
            raise UsageError(f"no witness: program is {v.status} at these bounds")
        e = v.witness
    else:
        if args.model == "sc":
            runs = explore.sc_executions(p, args.steps)
        else:
            runs = explore.tso_executions(p, args.steps, args.buf)
        e = next((x for i, x in enumerate(runs) if i == args.index), None)
        if e is None:
            raise UsageError(f"no execution with index {args.index}")
    tr = trace.build_trace(e, args.variant)
    if args.format == "json":
        data = {
            "nodes": [{"id": list(n), "label": tr.nodes[n].label()} for n in sorted(tr.nodes)],
            "edges": [{"rel": rel, "from": list(u), "to": list(v)} for rel, (u, v) in tr.edges()],
            "acyclic": trace.hb_acyclic(tr),
        }
        out.write(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        out.write(trace.to_dot(tr, name=p.name))
    return OK


HANDLERS = {
    "parse": cmd_parse,
    "explore": cmd_explore,
    "robust": cmd_robust,
    "atomic": cmd_atomic,
    "abstract": cmd_abstract,
    "compare-states": cmd_compare_states,
    "trace-dot": cmd_trace_dot,
}


def run(argv: Optional[Sequence[str]] = None, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return OK if exc.code == 0 else ERROR
    if args.steps < 0 or args.buf < 1 or args.jobs < 1:
        err.write("tsorobust: --steps must be >= 0, --buf and --jobs >= 1\n")
        return ERROR
    try:
        original, p = _load(args)
        return HANDLERS[args.command](p, original, args, out)
    except ParseError as e:
        err.write(f"tsorobust: parse error: {e}\n")
    except (ValidationError, abstraction.AbstractionError, UsageError) as e:
        err.write(f"tsorobust: {e}\n")
    return ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
