"""Published integer sequences checked against the library enumerations.

Each fixture is a known prefix; `verify_sequences` regenerates it from
scratch and reports mismatches as values.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

from .classify import enumerate_near_perfect
from .construct import enumerate_p_primes
from .errors import RangeError
from .sieve import scan_range
from .tests import assert_raises, test

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequenceFixture:
    name: str
    oeis: str
    description: str
    prefix: tuple[int, ...]
    bound: int  # generate(name, bound) covers the prefix


@dataclass(frozen=True)
class SequenceCheck:
    name: str
    oeis: str
    expected: list[int]
    produced: list[int]

    @property
    def ok(self) -> bool:
        return self.produced[: len(self.expected)] == self.expected


FIXTURES: dict[str, SequenceFixture] = {
    f.name: f
    for f in (
        SequenceFixture(
            name="near-perfect",
            oeis="A181595",
            description="Near-perfect numbers",
            prefix=(12, 18, 20, 24, 40, 56, 88, 104, 196, 224, 234, 368, 464, 650, 992),
            bound=1000,
        ),
        SequenceFixture(
            name="redundant-divisors",
            oeis="A181596",
            description="Redundant divisors of the near-perfect numbers",
            prefix=(4, 3, 2, 12, 10, 8, 4, 2, 7, 56, 78, 8, 2, 2, 32),
            bound=1000,
        ),
        SequenceFixture(
            name="p-primes",
            oeis="A181741",
            description="Primes of the form 2^t - 2^k - 1",
            prefix=(3, 5, 7, 11, 13, 23, 29, 31, 47, 59, 61, 127, 191, 223, 239),
            bound=250,
        ),
        SequenceFixture(
            name="perfect",
            oeis="A000396",
            description="Perfect numbers",
            prefix=(6, 28, 496, 8128, 33550336),
            bound=33550337,
        ),
    )
}


def _near_perfect(bound: int) -> list[int]:
    return [w.n for w in enumerate_near_perfect(1, bound)]


def _redundant(bound: int) -> list[int]:
    return [w.redundant for w in enumerate_near_perfect(1, bound)]


def _p_primes(bound: int) -> list[int]:
    t_max = max(2, bound.bit_length() + 1)
    return [pk.value for pk in enumerate_p_primes(t_max) if pk.value < bound]


def _perfect(bound: int) -> list[int]:
    return [n for n, _ in scan_range(1, bound, "perfect")]


GENERATORS: dict[str, Callable[[int], list[int]]] = {
    "near-perfect": _near_perfect,
    "redundant-divisors": _redundant,
    "p-primes": _p_primes,
    "perfect": _perfect,
}


def generate(name: str, bound: Optional[int] = None) -> list[int]:
    """Terms of the named sequence below bound (redundant divisors: of n below bound)."""
    if name not in FIXTURES:
        raise RangeError(f"Unknown sequence {name!r} (known: {', '.join(FIXTURES)})")
    if bound is None:
        bound = FIXTURES[name].bound
    if bound < 2:
        raise RangeError(f"Sequence bound must be at least 2, got {bound}")
    return GENERATORS[name](bound)


def verify_sequences(names: Optional[list[str]] = None) -> list[SequenceCheck]:
    checks = []
    for name in names or list(FIXTURES):
        fixture = FIXTURES.get(name)
        if fixture is None:
            raise RangeError(f"Unknown sequence {name!r} (known: {', '.join(FIXTURES)})")
        check = SequenceCheck(
            name=name,
            oeis=fixture.oeis,
            expected=list(fixture.prefix),
            produced=generate(name, fixture.bound),
        )
        if not check.ok:
            logger.warning("%s (%s) mismatch: produced %s", name, fixture.oeis, check.produced)
        checks.append(check)
    return checks


@test()
def test_verify_sequences():
    """All fixtures regenerate from the library"""
    checks = verify_sequences()
    assert [c.name for c in checks] == list(FIXTURES)
    for c in checks:
        assert c.ok, (c.name, c.produced)
    assert generate("near-perfect") == list(FIXTURES["near-perfect"].prefix)
    assert generate("p-primes", 64) == [3, 5, 7, 11, 13, 23, 29, 31, 47, 59, 61]


@test()
def test_sequence_mismatch_is_a_value():
    """A wrong prefix yields ok=False rather than an exception"""
    check = SequenceCheck(name="x", oeis="A0", expected=[1, 2, 3], produced=[1, 2, 4])
    assert not check.ok
    assert SequenceCheck(name="x", oeis="A0", expected=[1], produced=[1, 5]).ok
    assert_raises(RangeError, generate, "weird")
    assert_raises(RangeError, verify_sequences, ["weird"])
    assert_raises(RangeError, generate, "perfect", 1)
