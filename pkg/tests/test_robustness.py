import json

import pytest
from hypothesis import given, settings

from tsorobust.explore import replay_sc, replay_tso, tso_runs
from tsorobust.robustness import (
    NOT_ROBUST,
    ROBUST,
    SC,
    TSO,
    UNKNOWN,
    check_robustness,
    classify,
    find_minimal_violation,
    format_valuation,
    is_sc_shaped,
    reachable_valuations,
    sc_match,
    valuation_search,
)
from tsorobust.trace import EXTENDED, STANDARD, build_trace, hb_acyclic

from conftest import prog
from oracles import sc_trace_keys, tso_prefixes
from test_semantics import straight_line, threads

SB_PLAIN = prog("""
program sbp; vars x y;
thread a regs r; init l0 begin l0: x := 1; goto l1; l1: r := y; goto end; end
thread b regs s; init l0 begin l0: y := 1; goto l1; l1: s := x; goto end; end
""")

# writes of the initial value: no extended store order, so no cycle either
SB_SAME = prog("""
program sbz; vars x y;
thread a regs r; init l0 begin l0: x := 0; goto l1; l1: r := y; goto end; end
thread b regs s; init l0 begin l0: y := 0; goto l1; l1: s := x; goto end; end
""")

LONE = prog("""
program lone; vars x y;
thread a regs r; init l0 begin l0: x := 1; goto l1; l1: r := y; goto l2; l2: y := r + 1; goto end; end
""")


def acyclic_vs_sc(p, max_steps, buf_cap):
    """(executions checked, cyclic ones, discrepancies) for the standard variant."""
    keys = sc_trace_keys(p, max_steps, STANDARD)
    n = cyclic = bad = 0
    for actions in tso_prefixes(p, max_steps, buf_cap):
        tr = build_trace(actions, STANDARD)
        acyclic = hb_acyclic(tr)
        n += 1
        cyclic += not acyclic
        bad += acyclic != (tr.key() in keys)
    return n, cyclic, bad


@pytest.mark.parametrize("p", [SB_PLAIN, SB_SAME, LONE], ids=lambda p: p.name)
def test_acyclic_vs_sc_litmus(p):
    n, cyclic, bad = acyclic_vs_sc(p, 10, 2)
    assert bad == 0
    assert n > 0
    if p is not LONE:
        assert cyclic > 0


@settings(max_examples=25, deadline=None)
@given(threads)
def test_acyclic_vs_sc_generated(ops):
    assert acyclic_vs_sc(straight_line(ops), 10, 2)[2] == 0


@pytest.mark.parametrize("p", [SB_PLAIN, SB_SAME], ids=lambda p: p.name)
def test_sc_match_agrees_with_oracle(p):
    for variant in (STANDARD, EXTENDED):
        keys = sc_trace_keys(p, 10, variant)
        for actions in tso_prefixes(p, 10, 2):
            tr = build_trace(actions, variant)
            found = sc_match(p, tr)
            assert (found is not None) == (tr.key() in keys)
            if found is not None:
                assert build_trace(found, variant) == tr
                assert is_sc_shaped(found.actions)


def test_sc_match_on_corpus_trace(corpus):
    mp = corpus["mp"]
    for e in tso_runs(mp, 12, 2, reduce=True):
        if e.pending:
            continue
        tr = build_trace(e)
        found = sc_match(mp, tr)
        assert found is not None and replay_sc(mp, found.actions)


def test_same_value_sb_acyclic_but_unmatched():
    seen = False
    for actions in tso_prefixes(SB_SAME, 10, 2):
        tr = build_trace(actions, EXTENDED)
        if hb_acyclic(tr) and sc_match(SB_SAME, tr) is None:
            seen = True
            assert not hb_acyclic(build_trace(actions, STANDARD))
    assert seen


# -- verdicts ------------------------------------------------------------------


def test_sb_plain_not_robust():
    v = check_robustness(SB_PLAIN, 10, 2, STANDARD)
    assert v.status == NOT_ROBUST and v.reason == "cyclic hb"
    assert replay_tso(SB_PLAIN, v.witness.actions, 2)
    assert not hb_acyclic(build_trace(v.witness, STANDARD))
    assert v.cycle


def test_same_value_sb_verdicts():
    assert check_robustness(SB_SAME, 10, 2, STANDARD).status == NOT_ROBUST
    v = check_robustness(SB_SAME, 10, 2, EXTENDED)
    assert v.status == NOT_ROBUST
    assert v.reason == "no trace-equal SC execution"
    assert v.cycle is None


def test_lone_thread_robust():
    for variant in (STANDARD, EXTENDED):
        assert check_robustness(LONE, 12, 2, variant).status == ROBUST


def test_verdict_json():
    v = check_robustness(SB_PLAIN, 10, 2, STANDARD)
    doc = json.loads(json.dumps(v.to_json()))
    assert doc["status"] == NOT_ROBUST
    assert doc["bounds"] == {"max_steps": 10, "buf_cap": 2}
    assert doc["witness"] == [a.to_json() for a in v.witness.actions]
    r = check_robustness(LONE, 10, 2).to_json()
    assert "witness" not in r and r["status"] == ROBUST


def test_witness_only_when_not_robust(corpus):
    for name in ("mp", "sb"):
        v = check_robustness(corpus[name], 14, 2)
        assert v.status == ROBUST and v.witness is None


def test_unknown_when_budget_exhausted():
    v = check_robustness(SB_SAME, 10, 2, EXTENDED, max_states=1)
    assert v.status == UNKNOWN and v.witness is None


def test_classify_sc_shaped_run_is_robust():
    (e,) = [e for e in tso_runs(SB_PLAIN, 8, 0)][:1]
    assert classify(SB_PLAIN, e, EXTENDED)[0] == ROBUST


def test_bad_bounds():
    with pytest.raises(ValueError):
        check_robustness(SB_PLAIN, -1, 2)


def test_parallel_verdict_identical():
    a = check_robustness(SB_PLAIN, 10, 2, EXTENDED)
    b = check_robustness(SB_PLAIN, 10, 2, EXTENDED, jobs=3)
    assert a.to_json() == b.to_json()


@pytest.mark.parametrize("name", ["mp", "sb", "fig6", "fig6_abs", "wsq", "wsq_abs"])
def test_standard_robust_implies_extended_robust(corpus, name):
    std = check_robustness(corpus[name], 14, 2, STANDARD)
    if std.status == ROBUST:
        assert check_robustness(corpus[name], 14, 2, EXTENDED).status == ROBUST


# -- minimal violations ----------------------------------------------------------


def test_minimal_violation_sb():
    mv = find_minimal_violation(SB_PLAIN, 10, 2)
    assert mv is not None
    actions = mv.execution.actions
    assert replay_tso(SB_PLAIN, actions, 2)
    assert mv.alpha < mv.theta < mv.beta
    a = mv.attacker
    assert (actions[mv.alpha].thread, actions[mv.alpha].kind) == (a, "isu")
    assert (actions[mv.theta].thread, actions[mv.theta].kind) == (a, "rd")
    assert (actions[mv.beta].thread, actions[mv.beta].kind) == (a, "com")
    # only the attacker delays: every other issue is followed by its commit
    others = tuple(x for x in actions if x.thread != a)
    assert is_sc_shaped(others)
    assert mv.delayed == 1
    assert not hb_acyclic(build_trace(actions, STANDARD))


def test_same_value_sb_has_no_extended_minimal_violation():
    # the read of y=0 has no extended fr edge into b's y := 0, so no run has
    # the minimal shape, although the program is not robust
    assert find_minimal_violation(SB_SAME, 10, 2, EXTENDED) is None
    assert check_robustness(SB_SAME, 10, 2, EXTENDED).status == NOT_ROBUST
    mv = find_minimal_violation(SB_SAME, 10, 2, STANDARD)
    assert mv is not None
    assert not hb_acyclic(build_trace(mv.execution, STANDARD))


def test_no_minimal_violation_mp(corpus):
    assert find_minimal_violation(corpus["mp"], 14, 2) is None


def test_no_minimal_violation_single_thread():
    assert find_minimal_violation(LONE, 12, 2) is None


def test_minimal_violation_json():
    doc = find_minimal_violation(SB_PLAIN, 10, 2).to_json()
    assert set(doc) == {"attacker", "alpha", "theta", "beta", "delayed", "execution"}


@settings(max_examples=40, deadline=None)
@given(threads)
def test_minimal_violation_agrees_generated(ops):
    p = straight_line(ops)
    robust = check_robustness(p, 14, 2, STANDARD).status == ROBUST
    assert robust == (find_minimal_violation(p, 14, 2, STANDARD) is None)
    # extended: a minimal violation is always a real one
    mv = find_minimal_violation(p, 14, 2, EXTENDED)
    if mv is not None:
        assert sc_match(p, build_trace(mv.execution, EXTENDED)) is None
        assert check_robustness(p, 14, 2, EXTENDED).status == NOT_ROBUST


# -- valuations ----------------------------------------------------------------


def test_mp_final_valuation(corpus):
    vals = reachable_valuations(corpus["mp"], SC, 14)
    assert (("x", 1), ("y", 2)) in vals


def test_mp_valuations_equal(corpus):
    mp = corpus["mp"]
    sc, sc_done = valuation_search(mp, SC, 20)
    tso, _ = valuation_search(mp, TSO, 20, 2)
    assert sc_done
    assert sc == tso


def test_sb_plain_valuations():
    # no shared-state difference: the anomaly lives in the registers
    assert reachable_valuations(SB_PLAIN, SC, 10) == reachable_valuations(SB_PLAIN, TSO, 10, 2)


def test_unknown_model():
    with pytest.raises(ValueError):
        reachable_valuations(SB_PLAIN, "pso", 4)


def test_format_valuation():
    assert format_valuation((("x", 1), ("y", 0))) == "{x=1, y=0}"
