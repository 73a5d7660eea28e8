"""Range surveys - evidence for the near-perfect conjectures

Modes:
    conjecture1(k)    near-perfect n with redundant divisor 2^k
    conjecture2       even near-perfect n with odd redundant divisor;
                      violation when that divisor is not a Mersenne prime
    conjecture3       redundant divisor -> near-perfect numbers; violation
                      when a divisor other than a power of 2 repeats
    odd-near-perfect  odd near-perfect n (odd-only sieve)
    census            tag counts; hits are perfect and odd near-perfect n

A survey splits [lo, hi) into segments, evaluates them in order (optionally
in a process pool), merges each result into the running state and writes a
checkpoint after every segment. Violations are derived from the hits, so a
resumed survey and an uninterrupted one produce the same report.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from functools import partial
from pathlib import Path
from typing import Any, Literal, Optional, get_args

import numpy as np

from . import arith
from .checkpoint import (
    CheckpointState,
    checkpoint_lock,
    config_hash,
    config_identity,
    load_checkpoint,
    save_checkpoint,
)
from .classify import near_perfect_witness, p_near_perfect_form
from .config import get_settings, override_settings
from .construct import is_theorem5_form, mersenne_exponent_of
from .errors import (
    CheckpointBusyError,
    ConfigMismatchError,
    CorruptCheckpointError,
    RangeError,
)
from .sieve import (
    iter_spans,
    map_segments,
    near_perfect_entries,
    sigma_segment,
    sigma_segment_odd,
)
from .tests import assert_all_have_keys, assert_ascending, assert_raises, test
from .utils import HitRecord, ReportSummary, atomic_write_text, dumps_line, factor_pairs

logger = logging.getLogger(__name__)

Mode = Literal["conjecture1", "conjecture2", "conjecture3", "odd-near-perfect", "census"]
MODES: tuple[str, ...] = get_args(Mode)


@dataclass(frozen=True)
class SurveyConfig:
    mode: Mode
    lo: int
    hi: int
    k: Optional[int] = None
    segment_size: int = field(default_factory=lambda: get_settings().segment_size)
    worker_count: int = field(default_factory=lambda: get_settings().workers)
    checkpoint_path: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise RangeError(f"Unknown survey mode {self.mode!r} (expected one of {MODES})")
        if self.lo < 1 or self.lo >= self.hi:
            raise RangeError(f"Invalid survey range [{self.lo}, {self.hi}): need 1 <= lo < hi")
        if self.segment_size < 1:
            raise RangeError(f"segment_size must be positive, got {self.segment_size}")
        if self.worker_count < 1:
            raise RangeError(f"worker_count must be positive, got {self.worker_count}")
        if self.mode == "conjecture1":
            if self.k is None or self.k < 1:
                raise RangeError(f"conjecture1 needs k >= 1, got {self.k}")
        elif self.k is not None:
            raise RangeError(f"k only applies to conjecture1, not {self.mode}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any], **changes) -> "SurveyConfig":
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in data.items() if k in known}
        values.update(changes)
        return cls(**values)


@dataclass
class SurveyReport:
    config: SurveyConfig
    hits: list[HitRecord]
    violations: list[HitRecord]
    completed_up_to: int
    elapsed: float
    tallies: dict[str, int] = field(default_factory=dict)
    multiplicity: dict[int, list[int]] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.completed_up_to == self.config.hi

    def summary(self) -> ReportSummary:
        summary: ReportSummary = {
            "mode": self.config.mode,
            "config": self.config.to_dict(),
            "config_hash": config_hash(self.config.to_dict()),
            "completed_up_to": self.completed_up_to,
            "complete": self.complete,
            "hits": len(self.hits),
            "violations": len(self.violations),
            "tallies": dict(sorted(self.tallies.items())),
            "elapsed": round(self.elapsed, 3),
        }
        if self.config.mode == "conjecture3":
            summary["multiplicity"] = {str(d): ns for d, ns in sorted(self.multiplicity.items())}
        return summary

    def body_lines(self) -> list[str]:
        """The JSON Lines report: hits then violations, each sorted by n."""
        lines = [dumps_line({**h, "kind": "hit"}) for h in self.hits]
        lines += [dumps_line({**v, "kind": "violation"}) for v in self.violations]
        return lines


# ============================================================================
# Segment Evaluation
# ============================================================================


def _hit(n: int, s: int, mode: str, redundant: Optional[int] = None) -> HitRecord:
    record: HitRecord = {
        "n": n,
        "sigma": s,
        "factorization": factor_pairs(arith.factorize(n).factors),
        "mode": mode,
    }
    if redundant is not None:
        record["redundant"] = redundant
    return record


def _survey_span(span: tuple[int, int], mode: str, k: Optional[int]) -> dict[str, Any]:
    """Hits and tallies for one segment; runs in worker processes."""
    hits: list[HitRecord] = []
    tallies: dict[str, int] = {}

    if mode == "odd-near-perfect":
        segment = sigma_segment_odd(*span)
        n, s, d = near_perfect_entries(segment)
        tallies["odd_abundant"] = int(
            np.count_nonzero(segment.sigma_values > 2 * segment.numbers)
        )
        hits = [
            _hit(value, sigma, mode, redundant)
            for value, sigma, redundant in zip(n.tolist(), s.tolist(), d.tolist())
        ]
        tallies["odd_near_perfect"] = len(hits)
        return {"hits": hits, "tallies": tallies}

    segment = sigma_segment(*span)
    n, s, d = near_perfect_entries(segment)
    tallies["near_perfect"] = len(n)
    entries = zip(n.tolist(), s.tolist(), d.tolist())

    if mode == "conjecture1":
        target = 2**k
        for value, sigma, redundant in entries:
            if redundant == target:
                record = _hit(value, sigma, mode, redundant)
                form = p_near_perfect_form(value)
                if form is not None:
                    record["p_form"] = list(form)
                hits.append(record)
    elif mode == "conjecture2":
        for value, sigma, redundant in entries:
            if value % 2 == 0 and redundant % 2 == 1:
                record = _hit(value, sigma, mode, redundant)
                record["mersenne"] = mersenne_exponent_of(redundant) is not None
                record["theorem5_form"] = is_theorem5_form(value, redundant)
                hits.append(record)
        tallies["odd_redundant"] = len(hits)
    elif mode == "conjecture3":
        hits = [_hit(value, sigma, mode, redundant) for value, sigma, redundant in entries]
    elif mode == "census":
        numbers, sigmas = segment.numbers, segment.sigma_values
        perfect = sigmas == 2 * numbers
        abundant = sigmas > 2 * numbers
        odd = numbers % 2 == 1
        tallies["perfect"] = int(np.count_nonzero(perfect))
        tallies["abundant"] = int(np.count_nonzero(abundant))
        tallies["deficient"] = len(segment) - tallies["perfect"] - tallies["abundant"]
        tallies["odd_abundant"] = int(np.count_nonzero(abundant & odd))
        for value, sigma in zip(numbers[perfect].tolist(), sigmas[perfect].tolist()):
            record = _hit(value, sigma, mode)
            record["tag"] = "perfect"
            hits.append(record)
        for value, sigma, redundant in entries:
            if value % 2:
                record = _hit(value, sigma, mode, redundant)
                record["tag"] = "abundant"
                hits.append(record)
        hits.sort(key=lambda h: h["n"])
    return {"hits": hits, "tallies": tallies}


def _merge(state: CheckpointState, result: dict[str, Any]) -> None:
    state.hits.extend(result["hits"])
    for key, count in result["tallies"].items():
        state.tallies[key] = state.tallies.get(key, 0) + count
    if state.mode == "conjecture3":
        for h in result["hits"]:
            state.multiplicity.setdefault(h["redundant"], []).append(h["n"])


def _violations(state: CheckpointState) -> list[HitRecord]:
    if state.mode == "conjecture2":
        return [h for h in state.hits if not h["mersenne"]]
    if state.mode == "conjecture3":
        repeated = {
            d
            for d, ns in state.multiplicity.items()
            if not arith.is_power_of_two(d) and len(ns) >= 2
        }
        return [h for h in state.hits if h["redundant"] in repeated]
    return []


# ============================================================================
# Driver
# ============================================================================


def _initial_state(config: SurveyConfig) -> CheckpointState:
    fresh = CheckpointState(config=config.to_dict(), completed_up_to=config.lo)
    if config.checkpoint_path is None or not Path(config.checkpoint_path).exists():
        return fresh
    state = load_checkpoint(config.checkpoint_path)
    if config_hash(state.config) != config_hash(config.to_dict()):
        raise ConfigMismatchError(
            f"Checkpoint {config.checkpoint_path} belongs to survey "
            f"{config_identity(state.config)}, not {config_identity(config.to_dict())}"
        )
    logger.info(
        "Resuming %s survey from %d (%d hits so far)",
        config.mode,
        state.completed_up_to,
        len(state.hits),
    )
    state.config = config.to_dict()
    return state


def run_survey(config: SurveyConfig, stop_after: Optional[int] = None) -> SurveyReport:
    """Run (or continue) a survey; stop_after limits the number of segments."""
    settings = get_settings()
    if config.segment_size > settings.block_size:
        raise RangeError(
            f"segment_size {config.segment_size} exceeds the configured block size "
            f"{settings.block_size}"
        )
    if config.hi > settings.global_bound:
        raise RangeError(
            f"Survey end {config.hi} exceeds the configured global bound {settings.global_bound}"
        )

    started = time.monotonic()
    with checkpoint_lock(config.checkpoint_path):
        state = _initial_state(config)
        spans = list(iter_spans(state.completed_up_to, config.hi, config.segment_size))
        if stop_after is not None:
            spans = spans[:stop_after]
        work = partial(_survey_span, mode=config.mode, k=config.k)
        for span, result in zip(spans, map_segments(work, spans, config.worker_count)):
            _merge(state, result)
            state.completed_up_to = span[1]
            logger.info(
                "%s: segment [%d, %d) done, %d hits", config.mode, *span, len(state.hits)
            )
            if config.checkpoint_path is not None:
                state.violations = _violations(state)
                state.elapsed += time.monotonic() - started
                started = time.monotonic()
                save_checkpoint(config.checkpoint_path, state)

    state.elapsed += time.monotonic() - started
    report = SurveyReport(
        config=config,
        hits=sorted(state.hits, key=lambda h: h["n"]),
        violations=sorted(_violations(state), key=lambda h: h["n"]),
        completed_up_to=state.completed_up_to,
        elapsed=state.elapsed,
        tallies=state.tallies,
        multiplicity={d: sorted(ns) for d, ns in state.multiplicity.items()},
    )
    for v in report.violations:
        logger.warning(
            "%s violation: n=%d redundant=%d factorization=%s",
            config.mode,
            v["n"],
            v["redundant"],
            v["factorization"],
        )
    if config.mode == "conjecture3" and 1 in report.multiplicity:
        logger.info("redundant divisor 1 occurs for %s", report.multiplicity[1])
    if config.output is not None:
        write_report(report, config.output)
    return report


def resume(checkpoint_path: str | Path, config: Optional[SurveyConfig] = None) -> SurveyReport:
    """Continue the survey saved at checkpoint_path.

    When config is given it must describe the same survey; its segment size,
    worker count and output location are used for the remainder.
    """
    state = load_checkpoint(checkpoint_path)
    saved = SurveyConfig.from_dict(state.config, checkpoint_path=str(checkpoint_path))
    if config is None:
        config = saved
    elif config_hash(config.to_dict()) != config_hash(saved.to_dict()):
        raise ConfigMismatchError(
            f"Checkpoint {checkpoint_path} belongs to survey {config_identity(saved.to_dict())}, "
            f"not {config_identity(config.to_dict())}"
        )
    else:
        config = replace(config, checkpoint_path=str(checkpoint_path))
    return run_survey(config)


def write_report(report: SurveyReport, output: str | Path) -> tuple[Path, Path]:
    """Write <output>.jsonl and <output>.summary.json."""
    body_path = Path(f"{output}.jsonl")
    summary_path = Path(f"{output}.summary.json")
    lines = report.body_lines()
    atomic_write_text(body_path, "".join(line + "\n" for line in lines))
    atomic_write_text(summary_path, json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    logger.info("Wrote %s and %s", body_path, summary_path)
    return body_path, summary_path


# ============================================================================
# Survey Entry Points
# ============================================================================


def survey_conjecture1(k: int, lo: int, hi: int, **options) -> SurveyReport:
    return run_survey(SurveyConfig(mode="conjecture1", lo=lo, hi=hi, k=k, **options))


def survey_conjecture2(lo: int, hi: int, **options) -> SurveyReport:
    return run_survey(SurveyConfig(mode="conjecture2", lo=lo, hi=hi, **options))


def survey_conjecture3(lo: int, hi: int, **options) -> SurveyReport:
    return run_survey(SurveyConfig(mode="conjecture3", lo=lo, hi=hi, **options))


def survey_odd_near_perfect(lo: int, hi: int, **options) -> SurveyReport:
    return run_survey(SurveyConfig(mode="odd-near-perfect", lo=lo, hi=hi, **options))


def survey_census(lo: int, hi: int, **options) -> SurveyReport:
    return run_survey(SurveyConfig(mode="census", lo=lo, hi=hi, **options))


def _ns(records: list[HitRecord]) -> list[int]:
    return [r["n"] for r in records]


@test()
def test_survey_conjecture1():
    """Near-perfect numbers with redundant divisor 2^k"""
    report = survey_conjecture1(1, 1, 1000)
    assert _ns(report.hits) == [20, 104, 464, 650]
    assert report.violations == []
    assert report.complete
    assert_all_have_keys(report.hits, "n", "sigma", "redundant", "factorization", "mode")
    by_n = {h["n"]: h for h in report.hits}
    assert by_n[20]["p_form"] == [3, 1]
    assert "p_form" not in by_n[650]
    assert survey_conjecture1(1, 1, 20).hits == []
    assert _ns(survey_conjecture1(3, 1, 1000).hits) == [56, 368]
    assert_raises(RangeError, SurveyConfig, mode="conjecture1", lo=1, hi=10)


@test()
def test_survey_conjecture2():
    """Odd redundant divisors of even near-perfect numbers are Mersenne primes"""
    report = survey_conjecture2(1, 1000)
    assert _ns(report.hits) == [18, 196]
    assert report.violations == []
    assert survey_conjecture2(1, 18).hits == []
    report = survey_conjecture2(1, 10**6)
    assert _ns(report.hits) == [18, 196, 15376]
    assert [h["redundant"] for h in report.hits] == [3, 7, 31]
    assert all(h["mersenne"] and h["theorem5_form"] for h in report.hits)
    assert report.violations == []
    for h in report.hits:
        p = arith.trailing_zeros(h["redundant"] + 1)
        assert h["mersenne"] == arith.lucas_lehmer(p)


@test()
def test_survey_conjecture3():
    """Redundant divisors other than powers of 2 occur at most once"""
    report = survey_conjecture3(1, 1000)
    assert report.multiplicity[2] == [20, 104, 464, 650]
    assert report.multiplicity[3] == [18]
    assert report.violations == []
    assert report.summary()["multiplicity"]["2"] == [20, 104, 464, 650]
    empty = survey_conjecture3(1, 12)
    assert empty.multiplicity == {} and empty.hits == []
    report = survey_conjecture3(1, 10**6)
    assert report.violations == []
    assert_ascending(_ns(report.hits))


@test()
def test_conjecture3_violation_surfaces():
    """A repeated odd redundant divisor is reported with its numbers"""
    state = CheckpointState(config={"mode": "conjecture3", "lo": 1, "hi": 10}, completed_up_to=1)
    fake = [
        {"n": 100, "sigma": 0, "redundant": 5, "factorization": [], "mode": "conjecture3"},
        {"n": 200, "sigma": 0, "redundant": 5, "factorization": [], "mode": "conjecture3"},
        {"n": 300, "sigma": 0, "redundant": 4, "factorization": [], "mode": "conjecture3"},
        {"n": 400, "sigma": 0, "redundant": 4, "factorization": [], "mode": "conjecture3"},
    ]
    _merge(state, {"hits": fake, "tallies": {}})
    assert _ns(_violations(state)) == [100, 200]


@test()
def test_survey_odd_near_perfect():
    """The odd-only search below 10^6 and around 173369889"""
    report = survey_odd_near_perfect(1, 10**6)
    assert report.hits == []
    assert report.tallies["odd_abundant"] > 0
    report = survey_odd_near_perfect(173369889, 173369890)
    assert len(report.hits) == 1
    hit = report.hits[0]
    assert hit["n"] == 173369889
    assert hit["factorization"] == [[3, 4], [7, 2], [11, 2], [19, 2]]
    assert hit["redundant"] == 2751903


@test(slow=True)
def test_survey_odd_near_perfect_to_2e8():
    """Exactly one odd near-perfect number below 2 * 10^8"""
    report = survey_odd_near_perfect(1, 2 * 10**8)
    assert _ns(report.hits) == [173369889]
    assert report.hits[0]["factorization"] == [[3, 4], [7, 2], [11, 2], [19, 2]]


@test()
def test_survey_census():
    """Census tallies and hits"""
    report = survey_census(1, 10**4)
    assert report.tallies["perfect"] == 4
    tags = ("deficient", "perfect", "abundant")
    assert sum(report.tallies[tag] for tag in tags) == 9999
    assert report.tallies["odd_abundant"] == 23
    assert _ns(report.hits) == [6, 28, 496, 8128]
    assert all(h["tag"] == "perfect" for h in report.hits)
    assert report.violations == []


@test()
def test_survey_hits_revalidate():
    """Every survey hit re-validates through the classifier"""
    for report in (survey_conjecture3(1, 10**5), survey_conjecture2(1, 10**5)):
        for h in report.hits:
            w = near_perfect_witness(h["n"])
            assert w is not None and w.redundant == h["redundant"], h
            assert arith.recompose(h["factorization"]) == h["n"]


@test()
def test_survey_deterministic_across_workers_and_segments():
    """Report bodies do not depend on segment size or worker count"""
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        bodies = []
        summaries = []
        for segment_size, workers in ((1 << 14, 1), (50000, 2), (7919, 3)):
            output = str(Path(tmp) / f"r{segment_size}")
            survey_conjecture3(
                1, 200000, segment_size=segment_size, worker_count=workers, output=output
            )
            bodies.append(Path(output + ".jsonl").read_bytes())
            summary = json.loads(Path(output + ".summary.json").read_text())
            for volatile in ("elapsed", "config"):
                summary.pop(volatile)
            summaries.append(summary)
        assert bodies[0] == bodies[1] == bodies[2]
        assert summaries[0] == summaries[1] == summaries[2]
        assert bodies[0].count(b"\n") == len(survey_conjecture3(1, 200000).hits)


@test()
def test_survey_resume_matches_uninterrupted():
    """Interrupting and resuming yields the uninterrupted report"""
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        for lo, hi, segment_size in ((1, 10**7, 1 << 20), (170 * 10**6, 175 * 10**6, 1 << 19)):
            base = Path(tmp) / f"odd{lo}"
            whole = run_survey(
                SurveyConfig(
                    mode="odd-near-perfect", lo=lo, hi=hi, segment_size=segment_size,
                    output=str(base) + "-whole",
                )
            )
            config = SurveyConfig(
                mode="odd-near-perfect", lo=lo, hi=hi, segment_size=segment_size,
                checkpoint_path=str(base) + ".toml", output=str(base) + "-split",
            )
            partial_report = run_survey(config, stop_after=5)
            assert not partial_report.complete
            assert lo < partial_report.completed_up_to < hi
            resumed = resume(config.checkpoint_path)
            assert resumed.complete
            assert resumed.hits == whole.hits
            assert resumed.tallies == whole.tallies
            assert (
                Path(str(base) + "-split.jsonl").read_bytes()
                == Path(str(base) + "-whole.jsonl").read_bytes()
            )
        assert _ns(resumed.hits) == [173369889]


@test()
def test_survey_resume_errors_and_completed():
    """Config mismatch, busy or stale lock, corrupt file and resume of a finished survey"""
    import subprocess
    import sys
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        path = str(Path(tmp) / "c3.toml")
        config = SurveyConfig(
            mode="conjecture3", lo=1, hi=50000, segment_size=10000, checkpoint_path=path
        )
        run_survey(config, stop_after=2)
        assert_raises(ConfigMismatchError, resume, path, replace(config, hi=60000))
        assert_raises(ConfigMismatchError, run_survey, replace(config, hi=60000))
        with checkpoint_lock(path):
            assert_raises(CheckpointBusyError, resume, path)

        # a killed survey leaves its lock behind
        killed = subprocess.Popen([sys.executable, "-c", "pass"])
        killed.wait()
        Path(path + ".lock").write_text(f"{killed.pid}\n")
        finished = resume(path, replace(config, segment_size=7000))
        assert not Path(path + ".lock").exists()
        assert finished.complete
        before = Path(path).read_bytes()
        again = resume(path)
        assert Path(path).read_bytes() == before
        assert again.hits == finished.hits
        assert again.completed_up_to == 50000

        Path(path).write_text("garbage = [")
        assert_raises(CorruptCheckpointError, resume, path)
        assert_raises(CorruptCheckpointError, resume, str(Path(tmp) / "missing.toml"))


@test()
def test_survey_respects_block_size():
    """Segments wider than the block size are rejected before any work"""
    with override_settings(block_size=1000):
        assert_raises(RangeError, survey_census, 1, 10**4, segment_size=2000)
        assert survey_census(1, 10**4, segment_size=1000).tallies["perfect"] == 4
