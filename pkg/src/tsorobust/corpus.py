"""Bundled example programs and their expected verdicts.

The manifest lists one fixture per line: program file, CLI command,
arguments, expected exit code and the provenance of the expectation.
"""

from __future__ import annotations

import io
import shlex
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .cli import BUNDLED, run
from .lang import Program, parse_program

PROVENANCE = ("published", "derived", "trivial")


@dataclass(frozen=True)
class Fixture:
    file: str
    command: str
    args: tuple[str, ...]
    expected: int
    provenance: str

    @property
    def argv(self) -> list[str]:
        return [self.command, self.file, *self.args]

    def __str__(self) -> str:
        return " ".join(shlex.quote(a) for a in self.argv)


@dataclass(frozen=True)
class FixtureResult:
    fixture: Fixture
    exit_code: int
    output: str

    @property
    def ok(self) -> bool:
        return self.exit_code == self.fixture.expected


def corpus_dir() -> Path:
    return BUNDLED


def program_files() -> list[str]:
    return sorted(p.name for p in BUNDLED.glob("*.prog"))


def load(name: str) -> Program:
    """A bundled program, by file name with or without ``.prog``."""
    if not name.endswith(".prog"):
        name += ".prog"
    return parse_program((BUNDLED / name).read_text())


def parse_manifest(text: str) -> list[Fixture]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        words = shlex.split(line, comments=True)
        if not words:
            continue
        if len(words) < 4:
            raise ValueError(f"manifest line {n}: expected file, command, args, exit code, provenance")
        file, command, *args, code, provenance = words
        if provenance not in PROVENANCE:
            raise ValueError(f"manifest line {n}: unknown provenance {provenance!r}")
        out.append(Fixture(file, command, tuple(args), int(code), provenance))
    return out


def fixtures() -> list[Fixture]:
    return parse_manifest((BUNDLED / "MANIFEST").read_text())


def run_fixture(fx: Fixture) -> FixtureResult:
    out, err = io.StringIO(), io.StringIO()
    code = run([fx.command, str(BUNDLED / fx.file), *fx.args], out, err)
    return FixtureResult(fx, code, out.getvalue() + err.getvalue())


def corpus_check(jobs: Optional[int] = None) -> list[FixtureResult]:
    """Run every fixture; results come back in manifest order."""
    fxs = fixtures()
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_fixture, fxs))
    return [run_fixture(fx) for fx in fxs]


def main() -> int:
    results = corpus_check()
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.fixture} -> {r.exit_code} (expected {r.fixture.expected})")
    return 0 if all(r.ok for r in results) else 1


if __name__ == "__main__":
    raise SystemExit(main())
