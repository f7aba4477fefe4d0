import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsorobust.lang import (
    Assume,
    Binary,
    Cas,
    Cond,
    Domain,
    Fence,
    Havoc,
    Lit,
    LocalAssign,
    Name,
    ParseError,
    Read,
    Skip,
    Unary,
    ValidationError,
    Write,
    evaluate,
    format_program,
    instructions_of,
    parse_expr,
    parse_program,
    shared_locations,
)

from conftest import CORPUS, prog

ALL = """
program all;
domain 0..3;
vars x a[2];
thread t regs r s; init l0 begin
  l0: x := 1; goto l1;
  l1: r := x; goto l2;
  l2: s := r + 1; goto l3;
  l3: fence; goto l4;
  l4: skip; goto l5;
  l5: assume r == 1; goto l6;
  l6: s := cas(x, 1, 2); goto l7;
  l7: havoc(r, r <= x); goto l8;
  l8: a[r] := 3; goto l9;
  l9: s := a[r - 1]; goto end;
end
"""


def test_instruction_kinds():
    p = prog(ALL)
    kinds = [type(li.inst) for li in p.thread("t").code]
    assert kinds == [Write, Read, LocalAssign, Fence, Skip, Assume, Cas, Havoc, Write, Read]


def test_havoc_variable_is_the_shared_one():
    p = prog(ALL)
    (li,) = instructions_of(p, "l7")
    assert li.inst.var == "x" and li.inst.reg == "r"


def test_array_cells_are_shared_vars():
    p = prog(ALL)
    assert p.shared_vars == ("x", "a_0", "a_1")
    assert p.names == ("x", "a_0", "a_1", "r", "s")


def test_nondeterministic_labels(corpus):
    tests = instructions_of(corpus["mp"], "L_test")
    assert [li.goto for li in tests] == ["L_spin", "L_get"]
    assert instructions_of(corpus["mp"], "L_test", "recv") == tests


def test_unknown_label():
    with pytest.raises(KeyError):
        instructions_of(prog(ALL), "nope")


def test_shared_locations(corpus):
    p = prog(ALL)
    locs = [shared_locations(li) for li in p.thread("t").code]
    assert locs[:4] == [("x",), ("x",), (), ()]
    assert locs[7] == ("x",)
    assert locs[8] == ("a",)


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_print_round_trip(corpus, name):
    p = corpus[name]
    again = parse_program(format_program(p))
    assert again == p
    assert format_program(again) == format_program(p)


@pytest.mark.parametrize(
    "src, needle",
    [
        ("program p; vars x; thread t regs r; init l begin l: r := ; goto end; end", "1:"),
        ("program p; domain 1..3; vars x;", "must contain 0"),
        ("program p; vars x; thread t regs r; init l begin l: r := x; goto end;", "unterminated"),
        ("program p; vars x; thread t regs r; init l begin l: x[1] := 1; goto end; end", "bad indexing"),
        ("program p; vars x y; thread t regs r; init l begin l: havoc(r, r <= 2); goto end; end", "exactly one"),
        ("program p; vars x; thread t regs r; init l begin l: r := x $ 1; goto end; end", "unexpected character"),
    ],
)
def test_parse_errors(src, needle):
    with pytest.raises(ParseError) as err:
        parse_program(src)
    assert needle in str(err.value)


def test_parse_error_position():
    src = "program p;\nvars x;\nthread t regs r; init l begin\n  l: r := ; goto end;\nend\n"
    with pytest.raises(ParseError) as err:
        parse_program(src)
    assert (err.value.line, err.value.col) == (4, 11)


@pytest.mark.parametrize(
    "body, needle",
    [
        ("l: r := 1; goto nowhere;", "dangling label"),
        ("l: r := 9; goto end;", "outside domain"),
        ("l: r := q; goto end;", "unknown name"),
        ("l: assume r; goto end;", "expected bool"),
        ("l: r := x + 1; goto end;", "shared access"),
        ("l: r := r == 1; goto end;", "expected int"),
    ],
)
def test_validation_errors(body, needle):
    src = f"program p; vars x; thread t regs r; init l begin {body} end"
    with pytest.raises(ValidationError) as err:
        parse_program(src)
    assert needle in str(err.value)


def test_cross_thread_register_rejected():
    src = """program p; vars x;
    thread a regs r; init l begin l: r := x; goto end; end
    thread b regs s; init l begin l: s := r; goto end; end"""
    with pytest.raises(ValidationError, match="cross-thread"):
        parse_program(src)


def test_duplicate_thread_rejected():
    src = """program p; vars x;
    thread a regs r; init l begin l: skip; goto end; end
    thread a regs s; init l begin l: skip; goto end; end"""
    with pytest.raises(ValidationError, match="duplicate thread"):
        parse_program(src)


def test_annotation_parsed(corpus):
    src = ALL + "abstract t l1: havoc(r, r <= x);\n"
    (a,) = parse_program(src).annotations
    assert (a.tid, a.label, a.reg) == ("t", "l1", "r")
    assert parse_program(format_program(parse_program(src))) == parse_program(src)


# -- expressions ------------------------------------------------------------

DOM = Domain(0, 3)


def test_wrapping_arithmetic():
    env = {"r": 3}
    assert evaluate(parse_expr("r + 1"), env) == 0
    assert evaluate(parse_expr("0 - 1"), env) == 3
    assert evaluate(parse_expr("r * 3"), env) == 1
    assert evaluate(parse_expr("-r"), env) == 1


def test_evaluate_binding_and_cond():
    e = parse_expr("x != 0 ? r == x || r == 0 : r == 0")
    assert evaluate(e, {"r": 0}, ("x", 2)) is True
    assert evaluate(e, {"r": 2}, ("x", 2)) is True
    assert evaluate(e, {"r": 1}, ("x", 2)) is False
    assert evaluate(e, {"r": 1}, ("x", 0)) is False


def test_evaluate_unbound_name():
    with pytest.raises(KeyError):
        evaluate(parse_expr("q + 1"), {})


def test_precedence():
    assert parse_expr("1 + 2 * 3") == Binary("+", Lit(1), Binary("*", Lit(2), Lit(3)))
    assert parse_expr("a < b && c || d == 1") == Binary(
        "||", Binary("&&", Binary("<", Name("a"), Name("b")), Name("c")), Binary("==", Name("d"), Lit(1)))


names = st.sampled_from(["r", "s"])


def ints(depth):
    leaf = st.one_of(st.integers(0, 3).map(Lit), names.map(Name))
    if depth == 0:
        return leaf
    sub = ints(depth - 1)
    return st.one_of(
        leaf,
        st.builds(Binary, st.sampled_from(["+", "-", "*"]), sub, sub),
        st.builds(Cond, bools(depth - 1), sub, sub),
    )


def bools(depth):
    if depth == 0:
        sub = ints(0)
        return st.builds(Binary, st.sampled_from(["==", "!=", "<", "<=", ">", ">="]), sub, sub)
    sub, isub = bools(depth - 1), ints(depth - 1)
    return st.one_of(
        st.builds(Binary, st.sampled_from(["&&", "||"]), sub, sub),
        st.builds(Unary, st.just("!"), sub),
        st.builds(Binary, st.sampled_from(["==", "<"]), isub, isub),
    )


def oracle(e, env):
    """Plain Python evaluation, wrapping at the end of each arithmetic step."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Name):
        return env[e.id]
    if isinstance(e, Unary):
        return not oracle(e.arg, env) if e.op == "!" else (-oracle(e.arg, env)) % 4
    if isinstance(e, Cond):
        return oracle(e.then, env) if oracle(e.test, env) else oracle(e.orelse, env)
    a, b = oracle(e.left, env), oracle(e.right, env)
    return {
        "+": lambda: (a + b) % 4, "-": lambda: (a - b) % 4, "*": lambda: (a * b) % 4,
        "==": lambda: a == b, "!=": lambda: a != b, "<": lambda: a < b, "<=": lambda: a <= b,
        ">": lambda: a > b, ">=": lambda: a >= b, "&&": lambda: a and b, "||": lambda: a or b,
    }[e.op]()


@settings(max_examples=300, deadline=None)
@given(st.one_of(ints(3), bools(3)))
def test_expression_print_round_trip(e):
    assert parse_expr(str(e)) == e


@settings(max_examples=300, deadline=None)
@given(st.one_of(ints(3), bools(3)), st.integers(0, 3), st.integers(0, 3))
def test_evaluate_matches_oracle(e, r, s):
    env = {"r": r, "s": s}
    assert evaluate(e, env, domain=DOM) == oracle(e, env)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["x", "y"]), st.integers(0, 3), st.booleans()), min_size=1, max_size=6))
def test_straight_line_program_round_trip(ops):
    lines = []
    for i, (v, k, is_write) in enumerate(ops):
        nxt = f"l{i + 1}" if i + 1 < len(ops) else "end"
        inst = f"{v} := {k}" if is_write else f"r := {v}"
        lines.append(f"l{i}: {inst}; goto {nxt};")
    src = "program g; vars x y; thread t regs r; init l0 begin " + " ".join(lines) + " end"
    p = parse_program(src)
    assert parse_program(format_program(p)) == p
    assert len(p.thread("t").code) == len(ops)
