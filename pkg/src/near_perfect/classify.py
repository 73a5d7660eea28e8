"""Deficient / perfect / abundant classification and near-perfect witnesses.

A near-perfect number n is the sum of all its proper divisors except one,
the redundant divisor d. Since the proper divisors sum to sigma(n) - n,
d = sigma(n) - 2n; it is determined by n, so a witness is unique.
Proper divisors include 1 and exclude n, so 1 <= d < n.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import arith
from .config import get_settings
from .errors import CapExceededError, RangeError
from .sieve import (
    iter_spans,
    map_segments,
    near_perfect_entries,
    scan_range,
    sigma_segment,
    sigma_segment_odd,
)
from .tests import assert_ascending, assert_raises, test
from .utils import OutputRecord, Tag

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Classification:
    n: int
    sigma: int
    tag: Tag
    abundance: int

    def as_record(self) -> OutputRecord:
        return {"n": self.n, "sigma": self.sigma, "tag": self.tag}


@dataclass(frozen=True)
class NearPerfectWitness:
    n: int
    sigma: int
    redundant: int

    def as_record(self) -> OutputRecord:
        return {
            "n": self.n,
            "sigma": self.sigma,
            "tag": "abundant",
            "redundant": self.redundant,
        }


def _tag(abundance: int) -> Tag:
    if abundance < 0:
        return "deficient"
    if abundance == 0:
        return "perfect"
    return "abundant"


def _witness_from_sigma(n: int, s: int) -> Optional[NearPerfectWitness]:
    d = s - 2 * n
    if 1 <= d < n and n % d == 0:
        return NearPerfectWitness(n=n, sigma=s, redundant=d)
    return None


def classify(n: int) -> Classification:
    s = arith.sigma(n)
    return Classification(n=n, sigma=s, tag=_tag(s - 2 * n), abundance=s - 2 * n)


def near_perfect_witness(n: int) -> Optional[NearPerfectWitness]:
    """The redundant divisor of n, or None when n is not near-perfect."""
    return _witness_from_sigma(n, arith.sigma(n))


def enumerate_near_perfect(lo: int, hi: int) -> list[NearPerfectWitness]:
    """All near-perfect n in [lo, hi), ascending.

    Abundant numbers come from the sieve; only those get the divisibility
    check, and nothing is factorized.
    """
    witnesses = []
    for n, s in scan_range(lo, hi, "abundant"):
        witness = _witness_from_sigma(n, s)
        if witness is not None:
            witnesses.append(witness)
    logger.debug("%d near-perfect numbers in [%d, %d)", len(witnesses), lo, hi)
    return witnesses


def is_pseudoperfect(n: int) -> bool:
    """True iff some subset of the proper divisors of n sums to n.

    Exact subset-sum over a bitset of reachable sums; costs about
    tau(n) shifts of an n-bit integer, hence the configured cap.
    """
    cap = get_settings().pseudoperfect_cap
    if n < 1:
        raise RangeError(f"n must be a positive integer, got {n}")
    if n > cap:
        raise CapExceededError(f"is_pseudoperfect({n}) exceeds the configured cap {cap}")
    proper = arith.divisors(n)[:-1]
    if sum(proper) < n:
        return False
    mask = (1 << (n + 1)) - 1
    reachable = 1
    # largest first: the target bit tends to appear early for abundant n
    for d in reversed(proper):
        reachable = (reachable | (reachable << d)) & mask
        if reachable >> n & 1:
            return True
    return False


def is_n_minus_l_perfect(n: int, l: int) -> bool:
    """Perfect when l does not divide n, else near-perfect with redundant l."""
    if n < 1 or l < 1:
        raise RangeError(f"n and l must be positive integers, got n={n}, l={l}")
    if n % l:
        return classify(n).tag == "perfect"
    witness = near_perfect_witness(n)
    return witness is not None and witness.redundant == l


def near_perfect_brute(n: int) -> Optional[int]:
    """Redundant divisor by direct removal of each proper divisor."""
    proper = arith.divisors(n)[:-1]
    total = sum(proper)
    matches = [d for d in proper if total - d == n]
    return matches[0] if matches else None


def p_near_perfect_form(n: int) -> Optional[tuple[int, int]]:
    """(t, k) with n = 2^(t-1) * (2^t - 2^k - 1) and the odd part prime."""
    if n < 2 or n % 2:
        return None
    t = arith.trailing_zeros(n) + 1
    q = n >> (t - 1)
    gap = (1 << t) - 1 - q
    if gap < 2 or not arith.is_power_of_two(gap):
        return None
    k = arith.trailing_zeros(gap)
    if k > t - 1 or not arith.is_probable_prime(q):
        return None
    return t, k


def _tally_span(span: tuple[int, int]) -> dict[str, int]:
    segment = sigma_segment(*span)
    n = segment.numbers
    s = segment.sigma_values
    perfect = int(np.count_nonzero(s == 2 * n))
    abundant = int(np.count_nonzero(s > 2 * n))
    return {
        "deficient": len(segment) - perfect - abundant,
        "perfect": perfect,
        "abundant": abundant,
    }


def classify_range(lo: int, hi: int) -> dict[str, int]:
    """Count of each tag over [lo, hi)."""
    if lo < 1 or lo >= hi:
        raise RangeError(f"Invalid range [{lo}, {hi}): need 1 <= lo < hi")
    tallies = {"deficient": 0, "perfect": 0, "abundant": 0}
    for part in map_segments(_tally_span, iter_spans(lo, hi, get_settings().segment_size)):
        for tag, count in part.items():
            tallies[tag] += count
    return tallies


@test()
def test_classify_examples():
    """classify on 1, 6 and 12"""
    assert classify(6) == Classification(n=6, sigma=12, tag="perfect", abundance=0)
    assert classify(1) == Classification(n=1, sigma=1, tag="deficient", abundance=-1)
    assert classify(12) == Classification(n=12, sigma=28, tag="abundant", abundance=4)
    assert classify(496).tag == "perfect"
    assert classify(7).tag == "deficient"
    assert_raises(RangeError, classify, 0)


@test()
def test_near_perfect_witness_examples():
    """Witnesses for 12 and 650; none for perfect or deficient n"""
    assert near_perfect_witness(12) == NearPerfectWitness(n=12, sigma=28, redundant=4)
    assert near_perfect_witness(650).redundant == 2
    assert near_perfect_witness(6) is None
    assert near_perfect_witness(1) is None
    assert near_perfect_witness(2) is None
    assert near_perfect_witness(97) is None
    # sigma(120) = 360 = 3n: d = n is not a proper divisor
    assert near_perfect_witness(120) is None
    odd = near_perfect_witness(173369889)
    assert odd is not None
    assert odd.redundant == 2751903
    assert 173369889 % odd.redundant == 0


@test()
def test_enumerate_near_perfect_sequences():
    """The first fifteen near-perfect numbers and their redundant divisors"""
    witnesses = enumerate_near_perfect(1, 1000)
    assert [w.n for w in witnesses] == [
        12, 18, 20, 24, 40, 56, 88, 104, 196, 224, 234, 368, 464, 650, 992
    ]
    assert [w.redundant for w in witnesses] == [4, 3, 2, 12, 10, 8, 4, 2, 7, 56, 78, 8, 2, 2, 32]
    assert enumerate_near_perfect(1, 12) == []
    assert [w.n for w in enumerate_near_perfect(12, 13)] == [12]
    larger = enumerate_near_perfect(1, 20000)
    assert_ascending(w.n for w in larger)
    found = {w.n for w in larger}
    assert {1504, 1888, 1952, 3724, 5624, 9112, 11096, 13736, 15376, 15872} <= found


@test()
def test_witness_properties():
    """Near-perfect implies abundant, and the witness formula holds"""
    for w in enumerate_near_perfect(1, 10**5):
        c = classify(w.n)
        assert c.tag == "abundant", w.n
        assert w.redundant == c.sigma - 2 * w.n == c.abundance, w.n
        assert near_perfect_witness(w.n) == w


@test()
def test_brute_force_equivalence():
    """For n <= 10^5 the witness agrees with removing each proper divisor"""
    limit = 10**5
    lists = arith._divisor_lists(limit)
    sigmas = sigma_segment(1, limit + 1).sigma_values.tolist()
    for n in range(1, limit + 1):
        proper = lists[n][:-1]
        total = sum(proper)
        removable = [d for d in proper if total - d == n]
        assert len(removable) <= 1, n
        witness = _witness_from_sigma(n, sigmas[n - 1])
        expected = removable[0] if removable else None
        assert (witness.redundant if witness else None) == expected, n
    for n in (12, 18, 650, 992, 1000, 8128):
        w = near_perfect_witness(n)
        assert near_perfect_brute(n) == (w.redundant if w else None), n


@test()
def test_odd_square_free_never_near_perfect():
    """No odd square-free n <= 10^6 is near-perfect"""
    limit = 10**6
    segment = sigma_segment_odd(1, limit + 1)
    numbers = segment.numbers
    square_free = np.ones(len(numbers), dtype=bool)
    for p in arith.SMALL_PRIMES[1:]:
        if p * p > limit:
            break
        square_free &= numbers % (p * p) != 0
    n, _, _ = near_perfect_entries(segment)
    assert not np.isin(n, numbers[square_free]).any()
    # and pointwise on a sample through the factorizing path
    for value in numbers[square_free][::997].tolist():
        assert arith.factorize(value).is_square_free()
        assert near_perfect_witness(value) is None, value


@test()
def test_pseudoperfect():
    """Subset-sum pseudoperfect test and its cap"""
    assert is_pseudoperfect(36)
    assert is_pseudoperfect(12)
    assert is_pseudoperfect(6)
    assert not is_pseudoperfect(1)
    for p in (2, 3, 97, 7919):
        assert not is_pseudoperfect(p), p
    # 70 is the smallest weird number: abundant but not pseudoperfect
    assert classify(70).tag == "abundant"
    assert not is_pseudoperfect(70)
    assert [n for n in range(1, 50) if is_pseudoperfect(n)] == [
        6, 12, 18, 20, 24, 28, 30, 36, 40, 42, 48
    ]
    cap = get_settings().pseudoperfect_cap
    assert_raises(CapExceededError, is_pseudoperfect, cap + 1)
    assert_raises(RangeError, is_pseudoperfect, 0)


@test()
def test_near_perfect_implies_pseudoperfect():
    """Every near-perfect n is pseudoperfect"""
    for w in enumerate_near_perfect(1, 10**5):
        assert is_pseudoperfect(w.n), w.n
    for n in (128 * 8128, 127 * 8128):
        assert near_perfect_witness(n) is not None
        assert is_pseudoperfect(n), n


@test()
def test_n_minus_l_perfect():
    """(N minus l)-perfect: perfect when l does not divide n"""
    assert is_n_minus_l_perfect(6, 5)
    assert is_n_minus_l_perfect(12, 4)
    assert not is_n_minus_l_perfect(12, 6)
    assert not is_n_minus_l_perfect(12, 5)
    assert not is_n_minus_l_perfect(6, 3)
    assert is_n_minus_l_perfect(650, 2)
    assert_raises(RangeError, is_n_minus_l_perfect, 6, 0)


@test()
def test_p_near_perfect_form():
    """(t, k) recovery for numbers built from 2^t - 2^k - 1 primes"""
    assert p_near_perfect_form(12) == (3, 2)
    assert p_near_perfect_form(20) == (3, 1)
    assert p_near_perfect_form(104) == (4, 1)
    assert p_near_perfect_form(650) is None
    assert p_near_perfect_form(18) is None
    assert p_near_perfect_form(1) is None
    for p in (2, 3, 5, 7, 13):
        m = 2 ** (p - 1) * (2**p - 1)
        assert p_near_perfect_form(2 * m) == (p + 1, p), p
        assert p_near_perfect_form(2**p * m) is None, p


@test()
def test_perfect_numbers_have_euclid_form():
    """Perfect numbers below 10^7 are 2^(p-1)(2^p - 1) with 2^p - 1 prime"""
    tallies = classify_range(1, 10**7)
    assert tallies["perfect"] == 4
    assert sum(tallies.values()) == 10**7 - 1
    for n in (6, 28, 496, 8128, 33550336):
        assert classify(n).tag == "perfect", n
        p = arith.trailing_zeros(n) + 1
        assert n == 2 ** (p - 1) * (2**p - 1), n
        assert arith.lucas_lehmer(p), n
    assert classify_range(1, 30) == {"deficient": 23, "perfect": 2, "abundant": 4}
