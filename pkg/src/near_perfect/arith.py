"""Exact integer arithmetic - factorization, divisor functions, primality

Everything here is a pure function of its arguments. The small-prime table
is built once at import time and never mutated afterwards.
"""

import logging
import math
import random
from dataclasses import dataclass
from functools import reduce
from typing import Iterator, Optional, TypeAlias

import gmpy2
import numpy as np

from .config import get_settings
from .errors import InvalidExponentError, RangeError, SigmaOverflowError
from .tests import (
    assert_ascending,
    assert_raises,
    get_example_budget,
    property_settings,
    test,
)

logger = logging.getLogger(__name__)

U64_MAX = (1 << 64) - 1
U128_MAX = (1 << 128) - 1

# Arbitrary-precision nonnegative integer. Python ints are canonical.
BigNat: TypeAlias = int

SMALL_PRIME_CUTOFF = 1000

# Deterministic for every n < 3.3 * 10^24, so for the whole 64-bit range
U64_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _primes_below(limit: int) -> tuple[int, ...]:
    is_prime = np.ones(limit, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit - 1) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    return tuple(int(p) for p in np.flatnonzero(is_prime))


SMALL_PRIMES = _primes_below(SMALL_PRIME_CUTOFF)


# ============================================================================
# Factorization
# ============================================================================


@dataclass(frozen=True)
class Factorization:
    """Prime-power decomposition; primes strictly increasing."""

    n: int
    factors: tuple[tuple[int, int], ...]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def recompose(self) -> int:
        return recompose(self.factors)

    def is_square_free(self) -> bool:
        return all(e == 1 for _, e in self.factors)


def recompose(factors) -> int:
    return reduce(lambda acc, pe: acc * pe[0] ** pe[1], factors, 1)


def _check_u64(n: int, what: str = "n") -> None:
    if not isinstance(n, int) or isinstance(n, bool):
        raise RangeError(f"{what} must be an integer, got {type(n).__name__}")
    if n < 1:
        raise RangeError(f"{what} must be a positive integer, got {n}")
    if n > U64_MAX:
        raise RangeError(f"{what} exceeds the 64-bit range: {n}")


def _rho_brent(n: int, rng: random.Random) -> int:
    """Return a nontrivial factor of the odd composite n."""
    n_mpz = gmpy2.mpz(n)
    while True:
        y = gmpy2.mpz(rng.randrange(1, n))
        c = gmpy2.mpz(rng.randrange(1, n))
        batch = 128
        g = r = q = gmpy2.mpz(1)
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n_mpz
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(batch, r - k)):
                    y = (y * y + c) % n_mpz
                    q = q * abs(x - y) % n_mpz
                g = gmpy2.gcd(q, n_mpz)
                k += batch
            r *= 2
        if g == n_mpz:
            g = gmpy2.mpz(1)
            while g == 1:
                ys = (ys * ys + c) % n_mpz
                g = gmpy2.gcd(abs(x - ys), n_mpz)
        if g != n_mpz:
            return int(g)
        logger.debug("rho cycle collapsed for %d, retrying", n)


def factorize(n: int) -> Factorization:
    """Factor a positive 64-bit integer.

    Trial division by the small-prime table, then Pollard-Brent rho on the
    remaining cofactors. The rho walk is seeded from the configured seed and
    n, so the output (and the work done) is reproducible.
    """
    _check_u64(n)
    exponents: dict[int, int] = {}
    rem = n
    for p in SMALL_PRIMES:
        if p * p > rem:
            break
        if rem % p == 0:
            e = 0
            while rem % p == 0:
                rem //= p
                e += 1
            exponents[p] = e

    rng: Optional[random.Random] = None
    pending = [rem] if rem > 1 else []
    while pending:
        m = pending.pop()
        # cofactors have no prime factor below the cutoff
        if m < SMALL_PRIME_CUTOFF * SMALL_PRIME_CUTOFF or is_prime_u64(m):
            exponents[m] = exponents.get(m, 0) + 1
            continue
        root, exact = gmpy2.iroot(gmpy2.mpz(m), 2)
        if exact:
            pending.extend((int(root), int(root)))
            continue
        if rng is None:
            rng = random.Random(f"{get_settings().rho_seed}:{n}")
        d = _rho_brent(m, rng)
        pending.extend((d, m // d))

    return Factorization(n=n, factors=tuple(sorted(exponents.items())))


@test()
def test_factorize_examples():
    """factorize reproduces the documented decompositions"""
    assert factorize(173369889).factors == ((3, 4), (7, 2), (11, 2), (19, 2))
    assert factorize(1).factors == ()
    assert factorize(650).factors == ((2, 1), (5, 2), (13, 1))
    assert factorize(2**64 - 1).factors == (
        (3, 1), (5, 1), (17, 1), (257, 1), (641, 1), (65537, 1), (6700417, 1),
    )


@test()
def test_factorize_large_semiprimes():
    """factorize splits 64-bit semiprimes and prime squares past the table"""
    p, q = 4294967291, 2147483647
    assert factorize(p * q).factors == ((q, 1), (p, 1))
    assert factorize(1000003 * 1000003).factors == ((1000003, 2),)
    assert factorize(8191**2 * 4096).factors == ((2, 12), (8191, 2))
    assert factorize(2**61 - 1).factors == ((2**61 - 1, 1),)


@test()
def test_factorize_roundtrip():
    """Recomposing a factorization reproduces n; all primes pass is_prime_u64"""
    from hypothesis import given, strategies as st

    @property_settings()
    @given(st.integers(min_value=1, max_value=2**48))
    def check(n):
        f = factorize(n)
        assert f.recompose() == n
        assert_ascending(p for p, _ in f)
        assert all(is_prime_u64(p) and e >= 1 for p, e in f)
        assert factorize(n) == f

    check()


@test()
def test_factorize_rejects_out_of_range():
    """n = 0 and n beyond 64 bits are precondition errors"""
    assert_raises(RangeError, factorize, 0)
    assert_raises(RangeError, factorize, 2**64)


# ============================================================================
# Divisor Functions
# ============================================================================


def _sigma_of(f: Factorization, limit: int, width: str) -> int:
    s = 1
    for p, e in f:
        s *= (p ** (e + 1) - 1) // (p - 1)
    if s > limit:
        raise SigmaOverflowError(
            f"sigma({f.n}) = {s} exceeds the {width} result range"
        )
    return s


def sigma(n: int) -> int:
    """Sum of all positive divisors of n; errors if it exceeds 64 bits."""
    return _sigma_of(factorize(n), U64_MAX, "64-bit")


def sigma_wide(n: int) -> int:
    """sigma(n) checked against a 128-bit result range."""
    return _sigma_of(factorize(n), U128_MAX, "128-bit")


def divisors(n: int) -> list[int]:
    """All divisors of n, ascending."""
    divs = [1]
    for p, e in factorize(n):
        divs = [d * p**i for d in divs for i in range(e + 1)]
    return sorted(divs)


def tau(n: int) -> int:
    """Number of divisors of n."""
    return math.prod(e + 1 for _, e in factorize(n))


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def trailing_zeros(n: int) -> int:
    """Exponent of the largest power of 2 dividing n (n >= 1)."""
    if n < 1:
        raise RangeError(f"trailing_zeros requires n >= 1, got {n}")
    return (n & -n).bit_length() - 1


def _divisor_lists(limit: int) -> list[list[int]]:
    lists: list[list[int]] = [[] for _ in range(limit + 1)]
    for d in range(1, limit + 1):
        for m in range(d, limit + 1, d):
            lists[m].append(d)
    return lists


@test()
def test_sigma_examples():
    """sigma of the documented small values"""
    assert sigma(6) == 12
    assert sigma(1) == 1
    assert sigma(12) == 28
    assert sigma(2**63) == U64_MAX


@test()
def test_sigma_overflow():
    """sigma errors past 64 bits; sigma_wide still answers"""
    n = 3 * 2**62
    e = assert_raises(SigmaOverflowError, sigma, n)
    assert str(n) in e.message
    assert sigma_wide(n) == (2**63 - 1) * 4


@test()
def test_sigma_prime_power_formula():
    """sigma(p^a) = 1 + p + ... + p^a for primes p <= 100, a <= 10"""
    for p in (q for q in SMALL_PRIMES if q <= 100):
        for a in range(1, 11):
            if p**a > U64_MAX:
                break
            assert sigma_wide(p**a) == sum(p**i for i in range(a + 1)), (p, a)


@test()
def test_sigma_multiplicative():
    """sigma(a*b) = sigma(a)*sigma(b) for coprime a, b <= 10^6"""
    from hypothesis import assume, given, strategies as st

    @property_settings()
    @given(
        st.integers(min_value=1, max_value=10**6),
        st.integers(min_value=1, max_value=10**6),
    )
    def check(a, b):
        assume(math.gcd(a, b) == 1)
        assert sigma(a * b) == sigma(a) * sigma(b)

    check()


@test()
def test_divisor_functions_match_enumeration():
    """For n <= 10^5: divisors(n) and sigma(n) match an enumeration oracle"""
    limit = 10**5
    oracle = _divisor_lists(limit)
    for n in range(1, limit + 1):
        divs = divisors(n)
        assert divs == oracle[n], n
        assert sigma(n) == sum(divs), n
    assert divisors(36) == [1, 2, 3, 4, 6, 9, 12, 18, 36]
    assert divisors(1) == [1]
    assert divisors(20) == [1, 2, 4, 5, 10, 20]
    assert tau(36) == 9


@test()
def test_binary_helpers():
    """is_power_of_two and trailing_zeros"""
    assert [n for n in range(1, 70) if is_power_of_two(n)] == [1, 2, 4, 8, 16, 32, 64]
    assert not is_power_of_two(0)
    assert trailing_zeros(1) == 0
    assert trailing_zeros(496) == 4
    assert trailing_zeros(2**80) == 80
    assert_raises(RangeError, trailing_zeros, 0)


# ============================================================================
# Primality
# ============================================================================


def _strong_probable_prime(n: int, a: int, d: int, s: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def _small_prime_verdict(n: int) -> Optional[bool]:
    """Decide n by the small-prime table when that suffices."""
    if n < 2:
        return False
    for p in SMALL_PRIMES:
        if n % p == 0:
            return n == p
        if p * p > n:
            return True
    return None


def is_prime_u64(n: int) -> bool:
    """Deterministic primality for 64-bit integers."""
    if n > U64_MAX:
        raise RangeError(f"is_prime_u64 argument exceeds 64 bits: {n}")
    verdict = _small_prime_verdict(n)
    if verdict is not None:
        return verdict
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    return all(_strong_probable_prime(n, a, d, s) for a in U64_WITNESSES)


def is_probable_prime(n: BigNat, rounds: Optional[int] = None) -> bool:
    """Strong base-2 test plus strong Lucas (Selfridge) test.

    False is definitive. `rounds` adds strong tests to random bases drawn
    from a generator seeded by n, so the answer is reproducible.
    """
    if n < 0:
        raise RangeError(f"is_probable_prime requires n >= 0, got {n}")
    verdict = _small_prime_verdict(n)
    if verdict is not None:
        return verdict
    n_mpz = gmpy2.mpz(n)
    if gmpy2.is_square(n_mpz):
        return False
    if not gmpy2.is_strong_prp(n_mpz, 2):
        return False
    if not gmpy2.is_strong_selfridge_prp(n_mpz):
        return False

    if rounds is None:
        rounds = get_settings().probable_prime_rounds
    if rounds:
        rng = random.Random(f"bpsw:{n}")
        for _ in range(rounds):
            if not gmpy2.is_strong_prp(n_mpz, rng.randrange(3, n - 1)):
                return False
    return True


def lucas_lehmer(p: int) -> bool:
    """True iff the Mersenne number 2^p - 1 is prime."""
    if p < 2 or not is_prime_u64(p):
        raise InvalidExponentError(f"Mersenne exponent must be prime, got {p}")
    if p == 2:
        return True
    mask = (gmpy2.mpz(1) << p) - 1
    s = gmpy2.mpz(4)
    for _ in range(p - 2):
        s = s * s - 2
        # reduce mod 2^p - 1 without division
        while s > mask:
            s = (s & mask) + (s >> p)
    return s == 0 or s == mask


@test()
def test_is_prime_u64_examples():
    """is_prime_u64 on small values and known strong pseudoprimes"""
    assert is_prime_u64(8191)
    assert not is_prime_u64(1)
    assert not is_prime_u64(0)
    assert not is_prime_u64(-7)
    assert is_prime_u64(223)
    # strong pseudoprimes to the first few bases
    for n in (2047, 1373653, 25326001, 3215031751, 2152302898747, 3474749660383):
        assert not is_prime_u64(n), n
    assert is_prime_u64(2**61 - 1)
    assert is_prime_u64(2**64 - 59)
    assert not is_prime_u64(2**64 - 1)
    assert_raises(RangeError, is_prime_u64, 2**64)


@test()
def test_is_prime_u64_matches_eratosthenes():
    """is_prime_u64 agrees with a sieve of Eratosthenes for n <= 10^6"""
    limit = 10**6
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    for n in range(limit + 1):
        assert is_prime_u64(n) == bool(sieve[n]), n


@test()
def test_is_probable_prime_examples():
    """is_probable_prime against an independent oracle"""
    import sympy

    assert not is_probable_prime(0)
    assert not is_probable_prime(123)
    value = 2**89 - 2**1 - 1
    assert is_probable_prime(value) == sympy.isprime(value)
    assert is_probable_prime(2**89 - 1)
    assert is_probable_prime(2**127 - 1)
    assert not is_probable_prime(2**127 + 1)
    assert not is_probable_prime((2**61 - 1) ** 2)
    assert is_probable_prime(2**127 - 1, rounds=5)
    for t in range(65, 100):
        for k in range(1, t, 7):
            v = 2**t - 2**k - 1
            assert is_probable_prime(v) == sympy.isprime(v), (t, k)


@test()
def test_is_probable_prime_agrees_with_u64():
    """is_probable_prime and is_prime_u64 agree on the 64-bit range"""
    from hypothesis import given, strategies as st

    for n in range(10**4):
        assert is_probable_prime(n) == is_prime_u64(n), n

    @property_settings(max_examples=get_example_budget() * 5)
    @given(st.integers(min_value=0, max_value=U64_MAX))
    def check(n):
        assert is_probable_prime(n) == is_prime_u64(n)

    check()


@test()
def test_lucas_lehmer():
    """lucas_lehmer finds exactly the Mersenne exponents up to 127"""
    assert lucas_lehmer(5)
    assert lucas_lehmer(2)
    assert not lucas_lehmer(11)
    exponents = [p for p in SMALL_PRIMES if p <= 127 and lucas_lehmer(p)]
    assert exponents == [2, 3, 5, 7, 13, 17, 19, 31, 61, 89, 107, 127]
    assert_raises(InvalidExponentError, lucas_lehmer, 4)
    assert_raises(InvalidExponentError, lucas_lehmer, 1)
