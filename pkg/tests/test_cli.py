import functools
import io
import json
import subprocess
import sys

import pytest

from tsorobust import cli, robustness
from tsorobust.cli import ERROR, OK, REFUTED, UNKNOWN, run

SBP = """program sbp; vars x y;
thread a regs r; init l0 begin l0: x := 1; goto l1; l1: r := y; goto end; end
thread b regs s; init l0 begin l0: y := 1; goto l1; l1: s := x; goto end; end
"""


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def sbp(tmp_path):
    f = tmp_path / "sbp.prog"
    f.write_text(SBP)
    return str(f)


def test_parse():
    code, out, _ = call("parse", "mp.prog", "--format", "json")
    assert code == OK
    doc = json.loads(out)
    assert doc["shared_vars"] == ["x", "y"]
    assert [t["id"] for t in doc["threads"]] == ["send", "recv"]


def test_parse_text_prints_program():
    code, out, _ = call("parse", "mp.prog")
    assert code == OK and "program mp;" in out


def test_robust_exit_codes(sbp):
    assert call("robust", "mp.prog", "--steps", "14", "--buf", "2")[0] == OK
    code, out, _ = call("robust", sbp, "--steps", "10", "--buf", "2")
    assert code == REFUTED
    assert "status: NotRobust" in out and "witness:" in out


def test_robust_json_witness(sbp):
    code, out, _ = call("robust", sbp, "--steps", "10", "--buf", "2", "--format", "json", "--minimal")
    doc = json.loads(out)
    assert code == REFUTED and doc["status"] == "NotRobust"
    assert doc["witness"][0][0] in ("a", "b")
    assert doc["minimal_violation"]["attacker"] in ("a", "b")


def test_robust_unknown(monkeypatch, tmp_path):
    f = tmp_path / "sbz.prog"
    f.write_text(SBP.replace(":= 1", ":= 0"))
    monkeypatch.setattr(robustness, "check_robustness",
                        functools.partial(robustness.check_robustness, max_states=1))
    code, out, _ = call("robust", str(f), "--steps", "10", "--buf", "2")
    assert code == UNKNOWN and "status: Unknown" in out


def test_atomic():
    assert call("atomic", "fig6_abs.prog")[0] == OK
    code, out, _ = call("atomic", "fig6.prog")
    assert code == REFUTED
    assert "offending read foo f1: r2 := y" in out


def test_abstract_command():
    code, out, _ = call("abstract", "wsq.prog", "--steps", "14", "--buf", "2", "--abstract", "take:L_readH:h <= H")
    assert code == OK and "sound: yes" in out
    assert "havoc(h, (h <= H))" in out


def test_abstract_flag_changes_verdict():
    args = ["robust", "wsq.prog", "--steps", "20", "--buf", "2"]
    assert call(*args)[0] == REFUTED
    assert call(*args, "--abstract", "take:L_readH:h <= H")[0] == OK


def test_invalid_weakening():
    code, _, err = call("robust", "wsq.prog", "--abstract", "take:L_readH:h < H")
    assert code == ERROR and "not implied" in err


def test_compare_states():
    assert call("compare-states", "mp.prog", "--steps", "16", "--buf", "2")[0] == OK
    code, out, _ = call("compare-states", "wsq.prog", "--steps", "22", "--buf", "2", "--format", "json")
    doc = json.loads(out)
    assert code == REFUTED and doc["only_tso"] and not doc["only_sc"]


def test_trace_dot():
    code, out, _ = call("trace-dot", "mp.prog", "--steps", "12", "--buf", "2")
    assert code == OK and out.startswith("digraph mp {")
    code, out, _ = call("trace-dot", "mp.prog", "--steps", "12", "--model", "sc", "--format", "json")
    assert code == OK and json.loads(out)["acyclic"] is True


def test_trace_dot_witness(sbp):
    code, out, _ = call("trace-dot", sbp, "--witness", "--steps", "10", "--buf", "2")
    assert code == OK and "fr" in out
    code, _, err = call("trace-dot", "mp.prog", "--witness", "--steps", "10", "--buf", "2")
    assert code == ERROR and "no witness" in err


def test_explore():
    code, out, _ = call("explore", "sb.prog", "--steps", "8", "--buf", "1", "--limit", "1")
    assert code == OK
    assert out.count("-- execution") == 1


@pytest.mark.parametrize("argv, needle", [
    (["parse", "missing.prog"], "cannot find"),
    (["robust", "mp.prog", "--steps", "-1"], "--steps"),
    (["robust", "mp.prog", "--buf", "0"], "--buf"),
    (["frobnicate", "mp.prog"], ""),
])
def test_errors(argv, needle):
    code, _, err = call(*argv)
    assert code == ERROR and needle in err


def test_parse_error(tmp_path):
    f = tmp_path / "bad.prog"
    f.write_text("program bad; vars x; thread t regs r; init l begin l: r := ; goto end; end")
    code, _, err = call("parse", str(f))
    assert code == ERROR and "parse error: 1:" in err


def test_corpus_environment(tmp_path, monkeypatch):
    (tmp_path / "mine.prog").write_text(SBP)
    monkeypatch.setenv("TSOROBUST_CORPUS", str(tmp_path))
    assert call("parse", "mine.prog")[0] == OK


COMMANDS = [
    ["parse", "wsq.prog"],
    ["explore", "wsq.prog", "--steps", "12", "--buf", "2", "--limit", "3"],
    ["robust", "wsq.prog", "--buf", "2", "--minimal"],
    ["robust", "fig6.prog", "--buf", "2", "--format", "json"],
    ["atomic", "sb.prog", "--format", "json"],
    ["abstract", "fig6.prog", "--abstract", "bar:L_spin:x != 0 ? r1 == x || r1 == 0 : r1 == 0"],
    ["compare-states", "wsq.prog", "--steps", "22", "--buf", "2"],
    ["trace-dot", "wsq.prog", "--witness", "--buf", "2"],
]


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: a[0])
def test_deterministic(argv):
    first = call(*argv)
    assert call(*argv) == first
    assert call(*argv, "--jobs", "3") == first


def test_console_entry_point():
    cmd = [sys.executable, "-m", "tsorobust", "robust", "mp.prog", "--steps", "12", "--buf", "2"]
    a = subprocess.run(cmd, capture_output=True, text=True)
    b = subprocess.run(cmd + ["--jobs", "2"], capture_output=True, text=True)
    assert a.returncode == OK
    assert a.stdout == b.stdout and "status: Robust" in a.stdout


def test_exit_code_constants():
    assert (cli.OK, cli.REFUTED, cli.UNKNOWN, cli.ERROR) == (0, 1, 2, 3)
