"""Constructive families of perfect and near-perfect numbers.

Every generator checks its own output with the classifier whenever the
number fits 64 bits. Larger constructions are returned in factored form
with verified=False.
"""

import logging
from dataclasses import dataclass
from typing import Optional

from . import arith
from .classify import enumerate_near_perfect, near_perfect_witness, p_near_perfect_form
from .config import get_settings
from .errors import (
    InvalidExponentError,
    NotPerfectError,
    RangeError,
    SigmaOverflowError,
    VerificationError,
)
from .sieve import iter_spans, map_segments, near_perfect_entries, sigma_segment
from .tests import assert_ascending, assert_raises, test
from .utils import OutputRecord, factor_pairs, format_factorization

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PkPrime:
    """A prime 2^t - 2^k - 1 with t >= k + 1 and k >= 1."""

    t: int
    k: int
    value: int


@dataclass(frozen=True)
class GeneratedNearPerfect:
    n: int
    redundant: int
    provenance: str
    factors: tuple[tuple[int, int], ...]
    sigma: Optional[int] = None
    verified: bool = False

    def as_record(self) -> OutputRecord:
        record: OutputRecord = {
            "n": self.n,
            "sigma": self.sigma,
            "redundant": self.redundant,
            "factorization": factor_pairs(self.factors),
            "provenance": self.provenance,
            "verified": self.verified,
        }
        if not self.verified:
            record["note"] = f"unverified: {format_factorization(self.factors)} exceeds 64 bits"
        return record


def _checked(
    n: int, redundant: int, provenance: str, factors: tuple[tuple[int, int], ...]
) -> GeneratedNearPerfect:
    """Confirm a construction with the classifier when n is in machine range."""
    if n > arith.U64_MAX:
        logger.debug("%s: n has %d bits, left unverified", provenance, n.bit_length())
        return GeneratedNearPerfect(n, redundant, provenance, factors)
    try:
        witness = near_perfect_witness(n)
    except SigmaOverflowError:
        logger.debug("%s: sigma(n) exceeds 64 bits, left unverified", provenance)
        return GeneratedNearPerfect(n, redundant, provenance, factors)
    if witness is None or witness.redundant != redundant:
        raise VerificationError(
            f"{provenance}: classifier rejects n={n} with redundant divisor {redundant}"
        )
    return GeneratedNearPerfect(n, redundant, provenance, factors, witness.sigma, True)


def _require_prime_exponent(p: int) -> None:
    if p < 2 or p > arith.U64_MAX or not arith.is_prime_u64(p):
        raise InvalidExponentError(f"Exponent must be prime, got {p}")


def _perfect_exponent(m: int) -> int:
    """p with m = 2^(p-1) * (2^p - 1), after checking that m is even perfect.

    Every even perfect number has this form with 2^p - 1 prime, so the check
    needs no divisor sum and holds beyond 64 bits.
    """
    if m < 6 or m % 2:
        raise NotPerfectError(f"{m} is not an even perfect number")
    p = arith.trailing_zeros(m) + 1
    if m >> (p - 1) != 2**p - 1 or not arith.is_prime_u64(p) or not arith.lucas_lehmer(p):
        raise NotPerfectError(f"{m} is not an even perfect number")
    return p


# ============================================================================
# Perfect numbers and Mersenne primes
# ============================================================================


def euclid_perfect(p: int) -> Optional[int]:
    """2^(p-1) * (2^p - 1) when 2^p - 1 is prime, else None."""
    _require_prime_exponent(p)
    if not arith.lucas_lehmer(p):
        return None
    value = 2 ** (p - 1) * (2**p - 1)
    if value > arith.U64_MAX:
        raise SigmaOverflowError(f"Perfect number for p={p} exceeds the 64-bit range")
    return value


def mersenne_exponents(p_max: int) -> list[int]:
    return [p for p in range(2, p_max + 1) if arith.is_prime_u64(p) and arith.lucas_lehmer(p)]


def even_perfect_numbers(p_max: int) -> list[int]:
    return [euclid_perfect(p) for p in mersenne_exponents(p_max)]


def mersenne_exponent_of(d: int) -> Optional[int]:
    """p when d = 2^p - 1 is a Mersenne prime, else None."""
    if d < 3 or not arith.is_power_of_two(d + 1):
        return None
    p = arith.trailing_zeros(d + 1)
    if arith.is_prime_u64(p) and arith.lucas_lehmer(p):
        return p
    return None


def is_theorem5_form(n: int, redundant: int) -> bool:
    """n = 2^(p-1) * M^2 with redundant divisor M = 2^p - 1 prime."""
    p = mersenne_exponent_of(redundant)
    return p is not None and n == 2 ** (p - 1) * redundant**2


# ============================================================================
# 2^t - 2^k - 1 primes
# ============================================================================


def enumerate_p_primes(t_max: int) -> list[PkPrime]:
    """All primes 2^t - 2^k - 1 with t <= t_max, ascending by value."""
    if t_max < 2:
        raise RangeError(f"t_max must be at least 2, got {t_max}")
    found = []
    for t in range(2, t_max + 1):
        for k in range(1, t):
            value = 2**t - 2**k - 1
            if arith.is_probable_prime(value):
                found.append(PkPrime(t=t, k=k, value=value))
    return sorted(found, key=lambda pk: pk.value)


def represent_in_p(q: int) -> Optional[tuple[int, int]]:
    """The unique (t, k) with q = 2^t - 2^k - 1, read off q + 1 = 2^k(2^(t-k) - 1)."""
    if q < 2:
        return None
    k = arith.trailing_zeros(q + 1)
    rest = (q + 1) >> k
    if k < 1 or not arith.is_power_of_two(rest + 1):
        return None
    return k + rest.bit_length(), k


# ============================================================================
# Generators
# ============================================================================


def theorem3_generate(t: int, k: int) -> Optional[GeneratedNearPerfect]:
    """n = 2^(t-1) * (2^t - 2^k - 1) with redundant divisor 2^k."""
    if t < 2 or not 1 <= k <= t - 1:
        raise RangeError(f"Need t >= 2 and 1 <= k <= t - 1, got t={t}, k={k}")
    q = 2**t - 2**k - 1
    if not arith.is_probable_prime(q):
        return None
    return _checked(
        n=2 ** (t - 1) * q,
        redundant=2**k,
        provenance=f"theorem3(t={t},k={k})",
        factors=((2, t - 1), (q, 1)),
    )


def theorem4_generate(m: int, x: int) -> Optional[GeneratedNearPerfect]:
    """n = 2^x * m for an even perfect m; near-perfect exactly when x is 1 or p."""
    p = _perfect_exponent(m)
    if x < 1:
        raise RangeError(f"x must be at least 1, got {x}")
    if x not in (1, p):
        return None
    return _checked(
        n=2**x * m,
        redundant=2**p * (2**x - 1),
        provenance=f"theorem4(m={m},x={x})",
        factors=((2, x + p - 1), (2**p - 1, 1)),
    )


def theorem5_generate(p: int) -> Optional[GeneratedNearPerfect]:
    """n = 2^(p-1) * (2^p - 1)^2 with the odd redundant divisor 2^p - 1."""
    _require_prime_exponent(p)
    if not arith.lucas_lehmer(p):
        return None
    mersenne = 2**p - 1
    return _checked(
        n=2 ** (p - 1) * mersenne**2,
        redundant=mersenne,
        provenance=f"theorem5(p={p})",
        factors=((2, p - 1), (mersenne, 2)),
    )


def perfect_difference_pair(m: int) -> tuple[int, int]:
    """(2^p * m, (2^p - 1) * m): two near-perfect numbers whose difference is m."""
    p = _perfect_exponent(m)
    n2 = theorem4_generate(m, p)
    n3 = theorem5_generate(p)
    if n2 is None or n3 is None or n2.n - n3.n != m:
        raise VerificationError(f"Difference pair for m={m} does not close")
    return n2.n, n3.n


def _odd_redundant_span(span: tuple[int, int]) -> list[tuple[int, int]]:
    n, _, d = near_perfect_entries(sigma_segment(*span))
    odd = (n % 2 == 0) & (d % 2 == 1)
    return list(zip(n[odd].tolist(), d[odd].tolist()))


def check_theorem6(lo: int, hi: int) -> list[int]:
    """Even near-perfect n in [lo, hi) whose odd redundant divisor d is not
    a Mersenne prime with n = 2^(p-1) * d^2.

    Expected to be empty. Odd near-perfect numbers are outside the claim.
    """
    if lo < 1 or lo >= hi:
        raise RangeError(f"Invalid range [{lo}, {hi}): need 1 <= lo < hi")
    spans = iter_spans(lo, hi, get_settings().segment_size)
    exceptions = []
    for part in map_segments(_odd_redundant_span, spans):
        for n, d in part:
            if not is_theorem5_form(n, d):
                logger.warning(
                    "Even near-perfect %d has odd redundant divisor %d outside the pattern", n, d
                )
                exceptions.append(n)
    return exceptions


@test()
def test_euclid_perfect():
    """euclid_perfect for prime exponents"""
    assert euclid_perfect(2) == 6
    assert euclid_perfect(3) == 28
    assert euclid_perfect(11) is None
    assert even_perfect_numbers(31) == [
        6, 28, 496, 8128, 33550336, 8589869056, 137438691328, 2305843008139952128
    ]
    assert mersenne_exponents(31) == [2, 3, 5, 7, 13, 17, 19, 31]
    assert_raises(InvalidExponentError, euclid_perfect, 4)
    assert_raises(SigmaOverflowError, euclid_perfect, 61)
    for m in even_perfect_numbers(19):
        assert arith.sigma(m) == 2 * m, m


@test()
def test_enumerate_p_primes():
    """2^t - 2^k - 1 primes, ascending"""
    assert [pk.value for pk in enumerate_p_primes(4)] == [3, 5, 7, 11, 13]
    assert enumerate_p_primes(2) == []
    values = [pk.value for pk in enumerate_p_primes(9)]
    assert values[:15] == [3, 5, 7, 11, 13, 23, 29, 31, 47, 59, 61, 127, 191, 223, 239]
    assert values[15:] == [251, 383, 479, 503, 509]
    assert_ascending(values)
    for pk in enumerate_p_primes(40):
        assert pk.value == 2**pk.t - 2**pk.k - 1
        assert 1 <= pk.k <= pk.t - 1
        assert represent_in_p(pk.value) == (pk.t, pk.k)
    assert_raises(RangeError, enumerate_p_primes, 1)


@test()
def test_represent_in_p():
    """Representation read off the binary expansion of q + 1"""
    assert represent_in_p(31) == (6, 5)
    assert represent_in_p(2) is None
    assert represent_in_p(13) == (4, 1)
    assert represent_in_p(3) == (3, 2)
    assert represent_in_p(17) is None
    for p in mersenne_exponents(31):
        assert represent_in_p(2**p - 1) == (p + 1, p), p
    assert represent_in_p(2**89 - 1) == (90, 89)


@test()
def test_representation_unique():
    """No value 2^t - 2^k - 1 with t <= 20 comes from two (t, k) pairs"""
    seen: dict[int, tuple[int, int]] = {}
    for t in range(2, 21):
        for k in range(1, t):
            value = 2**t - 2**k - 1
            assert value not in seen, (value, seen.get(value), (t, k))
            seen[value] = (t, k)
            if value >= 2:
                assert represent_in_p(value) == (t, k)


@test()
def test_theorem3_examples():
    """2^(t-1)(2^t - 2^k - 1) on small (t, k)"""
    g = theorem3_generate(3, 1)
    assert (g.n, g.redundant, g.verified) == (20, 2, True)
    g = theorem3_generate(3, 2)
    assert (g.n, g.redundant) == (12, 4)
    assert theorem3_generate(2, 1) is None
    assert theorem3_generate(4, 1).n == 104
    assert_raises(RangeError, theorem3_generate, 3, 3)
    assert_raises(RangeError, theorem3_generate, 1, 1)


@test()
def test_theorem3_sound_up_to_t20():
    """Every t <= 20 construction carries redundant divisor 2^k"""
    count = 0
    for t in range(2, 21):
        for k in range(1, t):
            g = theorem3_generate(t, k)
            if g is None:
                continue
            assert g.verified, (t, k)
            assert near_perfect_witness(g.n).redundant == 2**k, (t, k)
            assert p_near_perfect_form(g.n) == (t, k)
            count += 1
    assert count >= 20


@test()
def test_theorem4_examples():
    """2^x * m for perfect m"""
    g = theorem4_generate(6, 1)
    assert (g.n, g.redundant) == (12, 4)
    g = theorem4_generate(28, 3)
    assert (g.n, g.redundant) == (224, 56)
    assert theorem4_generate(6, 3) is None
    assert_raises(NotPerfectError, theorem4_generate, 12, 1)
    assert_raises(NotPerfectError, theorem4_generate, 1, 1)
    assert_raises(RangeError, theorem4_generate, 6, 0)


@test()
def test_theorem4_biconditional():
    """2^x * m is near-perfect exactly when x is 1 or p"""
    for m in (6, 28, 496, 8128):
        p = arith.trailing_zeros(m) + 1
        for x in range(1, 13):
            near = near_perfect_witness(2**x * m) is not None
            assert near == (x in (1, p)), (m, x)
            g = theorem4_generate(m, x)
            assert (g is not None) == near, (m, x)
            if g is not None:
                assert g.verified and g.redundant == 2**p * (2**x - 1)


@test()
def test_theorem5_examples():
    """2^(p-1)(2^p - 1)^2 has redundant divisor 2^p - 1"""
    g = theorem5_generate(2)
    assert (g.n, g.redundant) == (18, 3)
    g = theorem5_generate(3)
    assert (g.n, g.redundant) == (196, 7)
    assert theorem5_generate(11) is None
    for p in (2, 3, 5, 7, 13):
        g = theorem5_generate(p)
        assert g.verified and g.redundant == 2**p - 1, p
        assert is_theorem5_form(g.n, g.redundant)
    big = theorem5_generate(61)
    assert not big.verified
    assert big.factors == ((2, 60), (2**61 - 1, 2))
    assert "note" in big.as_record()
    assert_raises(InvalidExponentError, theorem5_generate, 9)


@test()
def test_perfect_difference_pair():
    """n2 - n3 = m for the pair built from each perfect m"""
    assert perfect_difference_pair(6) == (24, 18)
    assert perfect_difference_pair(28) == (224, 196)
    assert perfect_difference_pair(496) == (15872, 15376)
    for p in (2, 3, 5, 7, 13):
        m = euclid_perfect(p)
        n2, n3 = perfect_difference_pair(m)
        assert n2 - n3 == m
        assert near_perfect_witness(n2) is not None
        assert near_perfect_witness(n3).redundant == 2**p - 1
    assert_raises(NotPerfectError, perfect_difference_pair, 30)


@test()
def test_even_perfect_beyond_64_bits():
    """Large even perfect m are recognised by their Euclid form"""
    m = 2**60 * (2**61 - 1)
    g = theorem4_generate(m, 1)
    assert g is not None and not g.verified
    assert (g.n, g.redundant) == (2 * m, 2**61)
    assert "note" in g.as_record()
    assert theorem4_generate(m, 2) is None
    n2, n3 = perfect_difference_pair(m)
    assert (n2, n3) == (2**61 * m, (2**61 - 1) * m)
    assert_raises(NotPerfectError, theorem4_generate, 2**66 * (2**67 - 1), 1)
    assert_raises(NotPerfectError, theorem4_generate, 2**10 * 3, 1)
    assert_raises(NotPerfectError, theorem4_generate, 2**8 * (2**9 - 1), 1)


@test()
def test_650_not_a_p_construction():
    """650 is near-perfect but not built from a 2^t - 2^k - 1 prime"""
    assert near_perfect_witness(650).redundant == 2
    assert p_near_perfect_form(650) is None
    assert represent_in_p(325) is None
    generated = {
        g.n
        for t in range(2, 21)
        for k in range(1, t)
        if (g := theorem3_generate(t, k)) is not None
    }
    assert 650 not in generated
    assert {12, 20, 104, 464} <= generated


@test()
def test_theorem6_pattern():
    """Even near-perfect n with odd redundant divisor are Mersenne squares"""
    assert check_theorem6(1, 10**7) == []
    odd_redundant = [
        w.n for w in enumerate_near_perfect(1, 10**6) if w.n % 2 == 0 and w.redundant % 2
    ]
    assert odd_redundant == [18, 196, 15376]
    assert mersenne_exponent_of(31) == 5
    assert mersenne_exponent_of(2047) is None
    assert mersenne_exponent_of(1) is None


@test(slow=True)
def test_theorem6_pattern_to_1e9():
    """check_theorem6 over [1, 10^9)"""
    assert check_theorem6(1, 10**9) == []
