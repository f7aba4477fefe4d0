"""Brute-force reference enumerations, independent of the explorer and matcher.

Both walk the full, unreduced transition tree with the interpreter's
successor function and keep every prefix, not just maximal paths.
"""

from tsorobust.semantics import machine
from tsorobust.trace import build_trace


def _prefixes(initial, successors, max_steps, keep):
    stack = [(initial, ())]
    while stack:
        s, actions = stack.pop()
        if keep(s):
            yield actions
        for st in successors(s)[0]:
            nxt = actions + st.actions
            if len(nxt) <= max_steps:
                stack.append((st.state, nxt))


def sc_prefixes(p, max_steps):
    m = machine(p)
    return _prefixes(m.sc_initial(), m.sc_successors, max_steps, lambda s: True)


def tso_prefixes(p, max_steps, buf_cap):
    """Every TSO execution of at most ``max_steps`` actions that ends with empty buffers."""
    m = machine(p, buf_cap)
    return _prefixes(m.tso_initial(), m.tso_successors, max_steps, lambda s: not any(s.buf))


def sc_trace_keys(p, max_steps, variant):
    return {build_trace(a, variant).key() for a in sc_prefixes(p, max_steps)}
