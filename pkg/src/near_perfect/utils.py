import json
import os
import tempfile
from pathlib import Path
from typing import Annotated, Any, Literal, NotRequired, Optional, TypedDict

from .config import parse_count
from .errors import RangeError
from .tests import assert_raises, test

# ============================================================================
# TypedDict Definitions for Records
# ============================================================================

Tag = Literal["deficient", "perfect", "abundant"]
FactorPairs = list[list[int]]


class OutputRecord(TypedDict):
    """Uniform CLI record, one per line in machine mode"""

    n: Annotated[Optional[int], "The number (None for a \"no construction\" record)"]
    sigma: Annotated[Optional[int], "Sum of all divisors (None when not computed)"]
    tag: NotRequired[Tag]
    redundant: NotRequired[Optional[int]]
    factorization: NotRequired[FactorPairs]
    provenance: NotRequired[str]
    verified: NotRequired[bool]
    note: NotRequired[str]


class HitRecord(TypedDict):
    """One line of a survey report (hit or violation)"""

    n: int
    sigma: int
    redundant: Optional[int]
    tag: NotRequired[Tag]
    factorization: FactorPairs
    mode: str
    mersenne: NotRequired[bool]
    theorem5_form: NotRequired[bool]
    p_form: NotRequired[Optional[list[int]]]
    kind: NotRequired[Literal["hit", "violation"]]


class ReportSummary(TypedDict):
    """Sidecar summary written next to a report"""

    mode: str
    config: dict[str, Any]
    config_hash: str
    completed_up_to: int
    complete: bool
    hits: int
    violations: int
    tallies: dict[str, int]
    multiplicity: NotRequired[dict[str, list[int]]]
    elapsed: float


# ============================================================================
# Helper Functions
# ============================================================================


def parse_int(text: str | int) -> int:
    """Parse a positive integer; accepts scientific notation ("2e8")."""
    try:
        value = parse_count(text)
    except ValueError as e:
        raise RangeError(str(e))
    if value < 1:
        raise RangeError(f"Expected a positive integer, got {text!r}")
    return value


def parse_range(text: str) -> tuple[int, int]:
    """Parse "lo..hi" (inclusive-exclusive)."""
    lo_text, sep, hi_text = text.partition("..")
    if not sep:
        raise RangeError(f"Failed to parse range (expected lo..hi): {text!r}")
    lo, hi = parse_int(lo_text), parse_int(hi_text)
    if lo >= hi:
        raise RangeError(f"Empty range: {text!r} (need lo < hi)")
    return lo, hi


def factor_pairs(factors: tuple[tuple[int, int], ...]) -> FactorPairs:
    return [[p, e] for p, e in factors]


def format_factorization(factors) -> str:
    if not factors:
        return "1"
    return "·".join(str(p) if e == 1 else f"{p}^{e}" for p, e in factors)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Atomic write: temp file in the target directory + rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(
        dir=directory, prefix=".tmp_", suffix=path.suffix, text=True
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(temp_path, path)
    except BaseException:
        os.unlink(temp_path)
        raise


def dumps_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


@test()
def test_parse_range():
    """lo..hi parsing with scientific notation"""
    assert parse_range("1..1000") == (1, 1000)
    assert parse_range("1..2e8") == (1, 200_000_000)
    assert_raises(RangeError, parse_range, "5..5")
    assert_raises(RangeError, parse_range, "10")
    assert_raises(RangeError, parse_range, "0..5")
    assert_raises(RangeError, parse_int, "-3")


@test()
def test_format_factorization():
    """Factorizations print as p^e joined by middle dots"""
    assert format_factorization([[3, 4], [7, 2], [11, 2], [19, 2]]) == "3^4·7^2·11^2·19^2"
    assert format_factorization([]) == "1"
    assert format_factorization(((2, 1), (5, 2), (13, 1))) == "2·5^2·13"


@test()
def test_atomic_write_text():
    """atomic_write_text replaces the target and leaves no temp files"""
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "sub" / "report.jsonl"
        atomic_write_text(path, "a\n")
        atomic_write_text(path, "b\n")
        assert path.read_text() == "b\n"
        assert [p.name for p in path.parent.iterdir()] == ["report.jsonl"]
    assert dumps_line({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
