"""Global numeric policy: tolerances and truncation defaults.

A single immutable record is active at a time. Swap it with
:func:`set_policy` or temporarily with :func:`using_policy`.
"""

from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class NumericPolicy:
    hermitian_atol: float = 1e-10
    trace_atol: float = 1e-9
    pure_norm_atol: float = 1e-9
    eigenvalue_floor: float = -1e-8
    # |v(0)|, |v(T)| relative to max|v|; 1e-5 admits the default 5-sigma window
    envelope_boundary_rtol: float = 1e-5
    envelope_norm_atol: float = 1e-6
    virtual_epsilon: float = 1e-12
    rtol: float = 1e-8
    atol: float = 1e-10
    fock_tail_max: float = 1e-6
    coherent_tail_max: float = 1e-8
    n_cavity_full: int = 10

    def replace(self, **changes) -> "NumericPolicy":
        return dataclasses.replace(self, **changes)


_ACTIVE = NumericPolicy()


def get_policy() -> NumericPolicy:
    return _ACTIVE


def set_policy(policy: NumericPolicy) -> NumericPolicy:
    """Install ``policy`` globally and return the previous one."""
    global _ACTIVE
    previous, _ACTIVE = _ACTIVE, policy
    return previous


@contextlib.contextmanager
def using_policy(**changes):
    previous = set_policy(get_policy().replace(**changes))
    try:
        yield get_policy()
    finally:
        set_policy(previous)
