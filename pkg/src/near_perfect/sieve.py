"""Segmented sigma sieve

sigma over a contiguous segment [lo, hi) by divisor accumulation: every
divisor pair (d, q) with d <= q and d*q in the segment is added once, so no
factorization is needed and all writes are strided sweeps over one array.
Odd-only segments hold the odd n of the range and sweep odd divisors only.
"""

import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Iterable, Iterator, Literal, Optional, TypeVar

import numpy as np

from . import arith
from .config import get_settings, override_settings, set_settings
from .errors import RangeError, SigmaOverflowError
from .tests import assert_raises, property_settings, test

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# sigma(n) < n * (1 + ln n) < 2^64 for every n below this
SIGMA_ENTRY_LIMIT = 1 << 58

PredicateTag = Literal[
    "perfect",
    "abundant",
    "deficient",
    "near-perfect-candidate",
    "odd-perfect",
    "odd-abundant",
    "odd-deficient",
    "odd-near-perfect-candidate",
]

PREDICATES: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "perfect": lambda n, s: s == 2 * n,
    "abundant": lambda n, s: s > 2 * n,
    "deficient": lambda n, s: s < 2 * n,
    "near-perfect-candidate": lambda n, s: s > 2 * n,
}


@dataclass(frozen=True)
class SigmaSegment:
    """sigma over [lo, hi); entry i belongs to numbers[i]."""

    lo: int
    hi: int
    sigma_values: np.ndarray
    odd_only: bool = False

    @property
    def numbers(self) -> np.ndarray:
        if self.odd_only:
            return np.arange(self.lo | 1, self.hi, 2, dtype=np.uint64)
        return np.arange(self.lo, self.hi, dtype=np.uint64)

    def __len__(self) -> int:
        return len(self.sigma_values)

    def items(self) -> Iterator[tuple[int, int]]:
        return zip(self.numbers.tolist(), self.sigma_values.tolist())


def _check_span(lo: int, hi: int) -> None:
    settings = get_settings()
    if lo < 1 or lo >= hi:
        raise RangeError(f"Invalid segment [{lo}, {hi}): need 1 <= lo < hi")
    if hi > settings.global_bound:
        raise RangeError(
            f"Segment end {hi} exceeds the configured global bound {settings.global_bound}"
        )
    if hi - lo > settings.block_size:
        raise RangeError(
            f"Segment width {hi - lo} exceeds the configured block size {settings.block_size}"
        )
    if hi > SIGMA_ENTRY_LIMIT:
        raise SigmaOverflowError(
            f"Segment [{lo}, {hi}) reaches n >= 2^58; sigma entries may not fit 64 bits"
        )


def sigma_segment(lo: int, hi: int) -> SigmaSegment:
    """sigma(n) for every n in [lo, hi)."""
    _check_span(lo, hi)
    values = np.zeros(hi - lo, dtype=np.uint64)
    for d in range(1, math.isqrt(hi - 1) + 1):
        first_q = max(d, -(-lo // d))
        start = first_q * d
        if start >= hi:
            continue
        count = (hi - 1 - start) // d + 1
        # n = d*q gains d + q; the square n = d*d gains d once
        values[start - lo :: d] += np.arange(
            first_q + d, first_q + d + count, dtype=np.uint64
        )
        if first_q == d:
            values[start - lo] -= d
    return SigmaSegment(lo=lo, hi=hi, sigma_values=values)


def sigma_segment_odd(lo: int, hi: int) -> SigmaSegment:
    """sigma(n) for the odd n in [lo, hi) only."""
    _check_span(lo, hi)
    first = lo | 1
    size = max(0, (hi - first + 1) // 2)
    values = np.zeros(size, dtype=np.uint64)
    for d in range(1, math.isqrt(hi - 1) + 1, 2):
        first_q = max(d, -(-lo // d))
        first_q |= 1
        start = first_q * d
        if start >= hi:
            continue
        count = (hi - 1 - start) // (2 * d) + 1
        # consecutive odd multiples are 2d apart, i.e. d entries apart
        offset = (start - first) // 2
        values[offset::d] += np.arange(
            first_q + d, first_q + d + 2 * count, 2, dtype=np.uint64
        )
        if first_q == d:
            values[offset] -= d
    return SigmaSegment(lo=lo, hi=hi, sigma_values=values, odd_only=True)


def near_perfect_entries(
    segment: SigmaSegment,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(n, sigma, redundant) arrays for the near-perfect n of a segment."""
    n = segment.numbers
    s = segment.sigma_values
    abundant = s > 2 * n
    n, s = n[abundant], s[abundant]
    d = s - 2 * n
    keep = (d < n) & (n % d == 0)
    return n[keep], s[keep], d[keep]


# ============================================================================
# Range Partitioning
# ============================================================================


def iter_spans(lo: int, hi: int, width: int) -> Iterator[tuple[int, int]]:
    if width < 1:
        raise RangeError(f"Segment width must be positive, got {width}")
    a = lo
    while a < hi:
        b = min(a + width, hi)
        yield a, b
        a = b


def map_segments(
    fn: Callable[[T], R], spans: Iterable[T], workers: Optional[int] = None
) -> Iterator[R]:
    """Evaluate fn over spans, yielding results in span order.

    With more than one worker the spans run in a process pool. Workers get
    the caller's settings rather than re-reading config and environment.
    """
    if workers is None:
        workers = get_settings().workers
    if workers <= 1:
        yield from map(fn, spans)
        return
    with ProcessPoolExecutor(
        max_workers=workers, initializer=set_settings, initargs=(get_settings(),)
    ) as executor:
        yield from executor.map(fn, spans)


def _scan_span(span: tuple[int, int], predicate: str) -> list[tuple[int, int]]:
    lo, hi = span
    if predicate.startswith("odd-"):
        segment = sigma_segment_odd(lo, hi)
        mask = PREDICATES[predicate.removeprefix("odd-")]
    else:
        segment = sigma_segment(lo, hi)
        mask = PREDICATES[predicate]
    n = segment.numbers
    selected = mask(n, segment.sigma_values)
    return list(zip(n[selected].tolist(), segment.sigma_values[selected].tolist()))


def scan_range(
    lo: int, hi: int, predicate: PredicateTag, workers: Optional[int] = None
) -> list[tuple[int, int]]:
    """All (n, sigma(n)) with n in [lo, hi) satisfying the tagged predicate."""
    if predicate.removeprefix("odd-") not in PREDICATES:
        raise RangeError(f"Unknown predicate: {predicate!r}")
    if lo < 1 or lo >= hi:
        raise RangeError(f"Invalid range [{lo}, {hi}): need 1 <= lo < hi")
    spans = iter_spans(lo, hi, get_settings().segment_size)
    results: list[tuple[int, int]] = []
    for part in map_segments(partial(_scan_span, predicate=predicate), spans, workers):
        results.extend(part)
    logger.debug("scan_range(%d, %d, %s): %d matches", lo, hi, predicate, len(results))
    return results


@test()
def test_sigma_segment_examples():
    """sigma_segment on the documented small spans"""
    assert sigma_segment(1, 8).sigma_values.tolist() == [1, 3, 4, 7, 6, 12, 8]
    assert sigma_segment(6, 7).sigma_values.tolist() == [12]
    for lo in (1, 2, 9, 36, 97, 650, 10**6, 173369889):
        assert sigma_segment(lo, lo + 1).sigma_values.tolist() == [arith.sigma(lo)], lo


@test()
def test_sigma_segment_odd_matches_full():
    """Odd-only segments equal the odd entries of the full segment"""
    for lo, hi in ((1, 100), (2, 3), (7, 8), (1000, 5001), (10**7, 10**7 + 999)):
        full = sigma_segment(lo, hi)
        odd = sigma_segment_odd(lo, hi)
        assert odd.numbers.tolist() == [n for n in range(lo, hi) if n % 2]
        assert odd.sigma_values.tolist() == full.sigma_values[full.numbers % 2 == 1].tolist()


@test()
def test_segmentation_invariance():
    """sigma_segment(a, b) + sigma_segment(b, c) == sigma_segment(a, c)"""
    from hypothesis import given, strategies as st

    @property_settings()
    @given(
        st.integers(min_value=1, max_value=10**7),
        st.integers(min_value=1, max_value=5000),
        st.integers(min_value=1, max_value=5000),
    )
    def check(a, w1, w2):
        b, c = a + w1, a + w1 + w2
        joined = np.concatenate(
            [sigma_segment(a, b).sigma_values, sigma_segment(b, c).sigma_values]
        )
        assert joined.tolist() == sigma_segment(a, c).sigma_values.tolist()
        joined_odd = np.concatenate(
            [sigma_segment_odd(a, b).sigma_values, sigma_segment_odd(b, c).sigma_values]
        )
        assert joined_odd.tolist() == sigma_segment_odd(a, c).sigma_values.tolist()

    check()


@test()
def test_sigma_segment_pointwise_oracle():
    """10^4 sampled n <= 10^8: segment entries equal arith.sigma"""
    rng = random.Random(20120101)
    checked = 0
    while checked < 10**4:
        lo = rng.randrange(1, 10**8 - 1000)
        segment = sigma_segment(lo, lo + 1000)
        for n, s in segment.items():
            assert s == arith.sigma(n), n
        checked += len(segment)


@test()
def test_sigma_segment_errors():
    """Violated segment preconditions raise RangeError"""
    assert_raises(RangeError, sigma_segment, 0, 5)
    assert_raises(RangeError, sigma_segment, 5, 5)
    with override_settings(block_size=100, segment_size=100, global_bound=10**6):
        assert_raises(RangeError, sigma_segment, 1, 102)
        assert_raises(RangeError, sigma_segment, 10**6 - 10, 10**6 + 1)
        assert len(sigma_segment(1, 101)) == 100
    with override_settings(global_bound=1 << 60):
        assert_raises(SigmaOverflowError, sigma_segment, (1 << 58) - 5, (1 << 58) + 5)


@test()
def test_scan_range_perfect():
    """scan_range(perfect) finds the classical perfect numbers"""
    assert scan_range(1, 30, "perfect") == [(6, 12), (28, 56)]
    assert scan_range(1, 2, "perfect") == []
    assert scan_range(1, 1000, "perfect") == [(6, 12), (28, 56), (496, 992)]
    hits = scan_range(1, 10**7, "perfect")
    assert [n for n, _ in hits] == [6, 28, 496, 8128]
    assert all(arith.sigma(n) == s == 2 * n for n, s in hits)
    assert scan_range(1, 10**5, "odd-perfect") == []


@test()
def test_scan_range_independent_of_segmentation():
    """scan_range output does not depend on segment size or workers"""
    expected = scan_range(1, 20000, "abundant")
    with override_settings(segment_size=777):
        assert scan_range(1, 20000, "abundant") == expected
        assert scan_range(1, 20000, "abundant", workers=2) == expected
    assert [n for n, _ in expected[:5]] == [12, 18, 20, 24, 30]
    odd = scan_range(1, 20000, "odd-abundant")
    assert [n for n, _ in odd[:3]] == [945, 1575, 2205]
    assert [n for n, _ in odd] == [n for n, _ in expected if n % 2]
    deficient = scan_range(1, 20000, "deficient")
    assert len(deficient) + len(expected) + 4 == 19999
    assert_raises(RangeError, scan_range, 1, 10, "weird")


@test()
def test_near_perfect_entries():
    """near_perfect_entries picks the near-perfect numbers of a segment"""
    n, s, d = near_perfect_entries(sigma_segment(1, 1000))
    assert n.tolist() == [12, 18, 20, 24, 40, 56, 88, 104, 196, 224, 234, 368, 464, 650, 992]
    assert d.tolist() == [4, 3, 2, 12, 10, 8, 4, 2, 7, 56, 78, 8, 2, 2, 32]
    assert (s - 2 * n).tolist() == d.tolist()
    n, _, d = near_perfect_entries(sigma_segment_odd(173369888, 173369890))
    assert n.tolist() == [173369889]
    assert d.tolist() == [arith.sigma(173369889) - 2 * 173369889]
