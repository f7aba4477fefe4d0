"""Robustness of concurrent programs against TSO.

Parses programs of a small goto-based language, runs them under SC and
TSO, builds happens-before traces and checks robustness by trace
comparison, by hb cycles, by minimal violations and by the mover-based
write-atomicity criterion.  Reads can be weakened into havoc instructions.
"""

from .abstraction import (
    AbstractionError,
    AbstractionSpec,
    apply_abstraction,
    check_abstraction_soundness,
    validate_weakening,
)
from .explore import Execution, sc_executions, tso_executions
from .lang import ParseError, Program, ValidationError, evaluate, instructions_of, parse_program
from .mover import (
    buffer_free_reachable,
    check_write_atomicity,
    classify_movers,
    moves_left,
    moves_right,
)
from .robustness import check_robustness, find_minimal_violation, reachable_valuations
from .semantics import Action, sc_enabled, sc_initial, tso_enabled, tso_initial
from .trace import EXTENDED, STANDARD, build_trace, hb_acyclic, traces_equal

__all__ = [
    "AbstractionError",
    "AbstractionSpec",
    "Action",
    "EXTENDED",
    "Execution",
    "ParseError",
    "Program",
    "STANDARD",
    "ValidationError",
    "apply_abstraction",
    "buffer_free_reachable",
    "build_trace",
    "check_abstraction_soundness",
    "check_robustness",
    "check_write_atomicity",
    "classify_movers",
    "evaluate",
    "find_minimal_violation",
    "hb_acyclic",
    "instructions_of",
    "moves_left",
    "moves_right",
    "parse_program",
    "reachable_valuations",
    "sc_enabled",
    "sc_executions",
    "sc_initial",
    "traces_equal",
    "tso_enabled",
    "tso_executions",
    "tso_initial",
    "validate_weakening",
]
