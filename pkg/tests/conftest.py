import pytest

from tsorobust.corpus import load
from tsorobust.lang import parse_program

CORPUS = ("mp", "sb", "fig6", "fig6_abs", "wsq", "wsq_abs")


def prog(text: str):
    return parse_program(text)


@pytest.fixture(scope="session")
def corpus():
    return {name: load(name) for name in CORPUS}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
