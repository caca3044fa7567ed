"""Operation counters for the group and modular-arithmetic primitives.

Counting is off unless a :func:`counting` block is active in the current
context.  Exponentiations are tallied two ways: ``exp_calls`` is every
call, ``exponentiations`` is the number of distinct exponents used in the
block.  The second is the convention of published cost tables, where
raising several fixed public bases to one blinding exponent is a single
entry.

Work done inside :func:`verification` (pairing checks on received keys,
RSA signature checks) lands in ``counters.checks`` rather than the main
tally, because the cost tables list protocol operations only.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field
from typing import Iterator

HASH_NAMES = ("H1", "H2", "H3", "H'")


@dataclass
class OpCounters:
    exponentiations: int = 0
    exp_calls: int = 0
    multiplications: int = 0
    inversions: int = 0
    pairings: int = 0
    hashes: dict = field(default_factory=lambda: dict.fromkeys(HASH_NAMES, 0))
    checks: "OpCounters | None" = None
    _exponents: set = field(default_factory=set, repr=False, compare=False)

    @property
    def hash_total(self) -> int:
        return sum(self.hashes.values())

    def as_dict(self) -> dict:
        out = {
            "exponentiations": self.exponentiations,
            "exp_calls": self.exp_calls,
            "multiplications": self.multiplications,
            "inversions": self.inversions,
            "pairings": self.pairings,
            "hashes": dict(self.hashes),
            "hash_total": self.hash_total,
        }
        if self.checks is not None:
            out["checks"] = self.checks.as_dict()
        return out


_active: contextvars.ContextVar[OpCounters | None] = contextvars.ContextVar(
    "pepsi_opcounters", default=None
)


@contextlib.contextmanager
def counting(counters: OpCounters | None = None) -> Iterator[OpCounters]:
    """Count operations for the duration of the block.

    Pass an existing ``OpCounters`` to resume a tally, e.g. around the
    second half of an interactive protocol after the other party replied.
    """
    if counters is None:
        counters = OpCounters()
    if counters.checks is None:
        counters.checks = OpCounters()
    token = _active.set(counters)
    try:
        yield counters
    finally:
        _active.reset(token)


@contextlib.contextmanager
def verification() -> Iterator[None]:
    current = _active.get()
    if current is None or current.checks is None:
        yield
        return
    token = _active.set(current.checks)
    try:
        yield
    finally:
        _active.reset(token)


def record_exp(exponent: int) -> None:
    c = _active.get()
    if c is None:
        return
    c.exp_calls += 1
    if exponent not in c._exponents:
        c._exponents.add(exponent)
        c.exponentiations += 1


def record_mul(n: int = 1) -> None:
    c = _active.get()
    if c is not None:
        c.multiplications += n


def record_inv() -> None:
    c = _active.get()
    if c is not None:
        c.inversions += 1


def record_pairing() -> None:
    c = _active.get()
    if c is not None:
        c.pairings += 1


def record_hash(name: str) -> None:
    c = _active.get()
    if c is not None:
        c.hashes[name] = c.hashes.get(name, 0) + 1
