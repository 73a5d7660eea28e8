"""near-perfect command line

Exit codes:
    0  success
    1  a survey reported violations, or a sequence check failed
    2  parse error or violated precondition
    3  sigma overflow
    4  checkpoint error (corrupt, config mismatch, busy)
"""

import argparse
import json
import logging
import os
import sys
from typing import Iterable, Optional

from . import arith
from .classify import classify, enumerate_near_perfect, near_perfect_witness
from .config import get_settings, load_settings, reset_settings, set_settings
from .construct import (
    enumerate_p_primes,
    theorem3_generate,
    theorem4_generate,
    theorem5_generate,
)
from .errors import CheckpointError, NearPerfectError, RangeError, SigmaOverflowError
from .sequences import FIXTURES, verify_sequences
from .sieve import iter_spans, near_perfect_entries, scan_range, sigma_segment
from .survey import MODES, SurveyConfig, SurveyReport, resume, run_survey
from .tests import assert_has_keys, assert_non_empty, assert_raises, test
from .utils import (
    OutputRecord,
    atomic_write_text,
    dumps_line,
    factor_pairs,
    format_factorization,
    parse_int,
    parse_range,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2
EXIT_OVERFLOW = 3
EXIT_CHECKPOINT = 4

TABLE_COLUMNS = (
    "n", "sigma", "tag", "redundant", "factorization", "provenance", "verified", "note"
)


# ============================================================================
# Output
# ============================================================================


def _cell(key: str, value) -> str:
    if value is None:
        return "-"
    if key == "factorization":
        return format_factorization(value)
    return str(value)


def emit(records: Iterable[OutputRecord], fmt: str) -> None:
    records = list(records)
    if fmt == "lines":
        for record in records:
            print(dumps_line(record))
        return
    if not records:
        print("(no records)")
        return
    columns = [c for c in TABLE_COLUMNS if any(c in r for r in records)]
    rows = [[_cell(c, r.get(c)) for c in columns] for r in records]
    widths = [max(len(c), *(len(row[i]) for row in rows)) for i, c in enumerate(columns)]
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip())
    print("  ".join("-" * w for w in widths))
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())


# ============================================================================
# Subcommands
# ============================================================================


def _classify_record(n: int) -> OutputRecord:
    c = classify(n)
    record = c.as_record()
    witness = near_perfect_witness(n)
    if witness is not None:
        record["redundant"] = witness.redundant
    record["factorization"] = factor_pairs(arith.factorize(n).factors)
    return record


def _classify_span_records(lo: int, hi: int) -> list[OutputRecord]:
    records: list[OutputRecord] = []
    for span in iter_spans(lo, hi, get_settings().segment_size):
        segment = sigma_segment(*span)
        near, _, redundant = near_perfect_entries(segment)
        witnesses = dict(zip(near.tolist(), redundant.tolist()))
        for n, s in segment.items():
            tag = "deficient" if s < 2 * n else "perfect" if s == 2 * n else "abundant"
            record: OutputRecord = {"n": n, "sigma": s, "tag": tag}
            if n in witnesses:
                record["redundant"] = witnesses[n]
            records.append(record)
    return records


def cmd_classify(args) -> int:
    if ".." in args.target:
        lo, hi = parse_range(args.target)
        emit(_classify_span_records(lo, hi), args.format)
    else:
        emit([_classify_record(parse_int(args.target))], args.format)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.pk_primes:
        if args.range is not None:
            t_lo, t_hi = parse_range(args.range)
        elif args.t_max is not None:
            t_lo, t_hi = 2, args.t_max + 1
        else:
            raise RangeError("--pk-primes needs a t range (lo..hi) or --t-max")
        primes = [pk for pk in enumerate_p_primes(max(2, t_hi - 1)) if t_lo <= pk.t < t_hi]
        emit(
            (
                {"n": pk.value, "sigma": pk.value + 1, "provenance": f"P(t={pk.t},k={pk.k})"}
                for pk in primes
            ),
            args.format,
        )
        return EXIT_OK

    if args.range is None:
        raise RangeError("enumerate needs a range lo..hi")
    lo, hi = parse_range(args.range)
    if args.perfect:
        records = [{"n": n, "sigma": s, "tag": "perfect"} for n, s in scan_range(lo, hi, "perfect")]
    else:
        records = [w.as_record() for w in enumerate_near_perfect(lo, hi)]
    emit(records, args.format)
    return EXIT_OK


def _require(args, *names: str) -> None:
    missing = [f"--{name}" for name in names if getattr(args, name) is None]
    if missing:
        raise RangeError(f"--theorem {args.theorem} needs {', '.join(missing)}")


def cmd_generate(args) -> int:
    if args.theorem == 3:
        _require(args, "t", "k")
        generated = theorem3_generate(args.t, args.k)
        provenance = f"theorem3(t={args.t},k={args.k})"
    elif args.theorem == 4:
        _require(args, "m", "x")
        generated = theorem4_generate(args.m, args.x)
        provenance = f"theorem4(m={args.m},x={args.x})"
    else:
        _require(args, "p")
        generated = theorem5_generate(args.p)
        provenance = f"theorem5(p={args.p})"

    if generated is None:
        record: OutputRecord = {
            "n": None,
            "sigma": None,
            "provenance": provenance,
            "note": "no construction",
        }
        emit([record], args.format)
    else:
        emit([generated.as_record()], args.format)
    return EXIT_OK


def _print_report(report: SurveyReport, fmt: str) -> int:
    summary = report.summary()
    if fmt == "lines":
        print(dumps_line(summary))
        for line in report.body_lines():
            print(line)
    else:
        print(f"mode:            {summary['mode']}")
        print(f"range:           [{report.config.lo}, {report.config.hi})")
        print(f"completed up to: {summary['completed_up_to']}")
        print(f"hits:            {summary['hits']}")
        print(f"violations:      {summary['violations']}")
        for key, count in summary["tallies"].items():
            print(f"  {key}: {count}")
        print(f"elapsed:         {summary['elapsed']:.3f}s")
        if report.hits:
            print()
            emit(report.hits, fmt)
        if report.violations:
            print()
            print("VIOLATIONS")
            emit(report.violations, fmt)
    return EXIT_VIOLATIONS if report.violations else EXIT_OK


def cmd_survey(args) -> int:
    options = {}
    if args.segment_size is not None:
        options["segment_size"] = args.segment_size
    if args.workers is not None:
        options["worker_count"] = args.workers
    config = SurveyConfig(
        mode=args.mode,
        lo=args.lo,
        hi=args.hi,
        k=args.k,
        checkpoint_path=args.checkpoint,
        output=args.output,
        **options,
    )
    return _print_report(run_survey(config), args.format)


def cmd_resume(args) -> int:
    report = resume(args.checkpoint)
    return _print_report(report, args.format)


def cmd_verify(args) -> int:
    checks = verify_sequences(args.sequence)
    records = [
        {
            "name": c.name,
            "oeis": c.oeis,
            "ok": c.ok,
            "expected": c.expected,
            "produced": c.produced[: len(c.expected)],
        }
        for c in checks
    ]
    if args.format == "lines":
        for record in records:
            print(dumps_line(record))
    else:
        for record in records:
            status = "ok" if record["ok"] else "MISMATCH"
            print(f"{record['name']:<20} {record['oeis']:<8} {status}")
    return EXIT_OK if all(c.ok for c in checks) else EXIT_VIOLATIONS


def cmd_config(args) -> int:
    text = get_settings().to_toml()
    if args.write:
        atomic_write_text(args.write, text)
    else:
        print(text, end="")
    return EXIT_OK


# ============================================================================
# Entry Point
# ============================================================================

def _count(text: str) -> int:
    try:
        return parse_int(text)
    except RangeError as e:
        raise argparse.ArgumentTypeError(e.message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--format",
        choices=("lines", "table"),
        default="table",
        help="Output format: one JSON record per line, or a table (default: table)",
    )

    parser = argparse.ArgumentParser(
        prog="near-perfect",
        description="Near-perfect numbers: classification, constructions and surveys",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Show debug messages")
    parser.add_argument("--config", help="Settings file (TOML, table [near_perfect])")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="Classify n or every n in lo..hi")
    p.add_argument("target", help="An integer or a range lo..hi (hi exclusive)")
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("enumerate", parents=[common], help="Enumerate a sequence over a range")
    p.add_argument("range", nargs="?", help="lo..hi (hi exclusive); bounds t for --pk-primes")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--near-perfect", action="store_true", help="Near-perfect numbers (default)")
    kind.add_argument("--perfect", action="store_true", help="Perfect numbers")
    kind.add_argument("--pk-primes", action="store_true", help="Primes 2^t - 2^k - 1")
    p.add_argument("--t-max", type=_count, help="Largest t for --pk-primes")
    p.set_defaults(handler=cmd_enumerate)

    p = sub.add_parser("generate", parents=[common], help="Build a near-perfect number")
    p.add_argument("--theorem", type=int, choices=(3, 4, 5), required=True)
    p.add_argument("--t", type=_count, help="theorem 3: exponent t")
    p.add_argument("--k", type=_count, help="theorem 3: exponent k")
    p.add_argument("--m", type=_count, help="theorem 4: even perfect number m")
    p.add_argument("--x", type=_count, help="theorem 4: exponent x")
    p.add_argument("--p", type=_count, help="theorem 5: prime exponent p")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("survey", parents=[common], help="Run a range survey")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--lo", type=_count, default=1)
    p.add_argument("--hi", type=_count, required=True)
    p.add_argument("--k", type=_count, help="conjecture1: redundant divisor 2^k")
    p.add_argument("--workers", type=_count, help="Worker processes")
    p.add_argument("--segment-size", type=_count, help="Numbers per segment")
    p.add_argument("--checkpoint", help="Checkpoint file (TOML), resumable")
    p.add_argument("--output", help="Report stem: writes <output>.jsonl and <output>.summary.json")
    p.set_defaults(handler=cmd_survey)

    p = sub.add_parser("resume", parents=[common], help="Continue a checkpointed survey")
    p.add_argument("checkpoint")
    p.set_defaults(handler=cmd_resume)

    p = sub.add_parser("verify", parents=[common], help="Check the published sequence prefixes")
    p.add_argument("--sequence", action="append", choices=list(FIXTURES))
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("config", help="Print the effective settings as TOML")
    p.add_argument("--write", metavar="PATH", help="Write them to PATH instead")
    p.set_defaults(handler=cmd_config)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    log_level = logging.DEBUG if args.verbose else logging.WARNING
    logging.basicConfig(level=log_level, format="%(levelname)s %(name)s: %(message)s")
    # basicConfig is a no-op when a handler already exists
    logging.getLogger().setLevel(log_level)

    try:
        overrides = {}
        if getattr(args, "workers", None) is not None:
            overrides["workers"] = args.workers
        if getattr(args, "segment_size", None) is not None:
            overrides["segment_size"] = args.segment_size
        set_settings(load_settings(args.config, **overrides))
    except (ValueError, OverflowError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.handler(args)
    except SigmaOverflowError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_OVERFLOW
    except CheckpointError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except NearPerfectError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_USAGE
    except OverflowError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


def _run(*argv: str) -> tuple[int, str, str]:
    import contextlib
    import io

    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def _records(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line]


@test()
def test_cli_classify():
    """classify prints one record with tag and redundant divisor"""
    code, out, err = _run("classify", "650", "--format", "lines")
    assert (code, err) == (0, "")
    [record] = _records(out)
    assert_has_keys(record, "n", "sigma", "tag", "redundant", "factorization")
    assert record["tag"] == "abundant" and record["redundant"] == 2
    assert record["factorization"] == [[2, 1], [5, 2], [13, 1]]
    assert _records(_run("classify", "1", "--format", "lines")[1])[0]["tag"] == "deficient"
    assert _records(_run("classify", "496", "--format", "lines")[1])[0]["tag"] == "perfect"
    records = _records(_run("classify", "10..13", "--format", "lines")[1])
    assert [(r["n"], r["tag"], r.get("redundant")) for r in records] == [
        (10, "deficient", None), (11, "deficient", None), (12, "abundant", 4)
    ]
    code, out, _ = _run("classify", "12")
    assert code == 0 and "redundant" in out and "2^2·3" in out


@test()
def test_cli_exit_codes():
    """Parse errors exit 2, sigma overflow exits 3, checkpoint errors exit 4"""
    import tempfile
    from pathlib import Path

    assert _run("classify", "abc")[0] == 2
    assert _run("classify", "0")[0] == 2
    assert _run("classify", "5..5")[0] == 2
    assert _run("generate", "--theorem", "4", "--m", "6")[0] == 2
    assert _run("generate", "--theorem", "4", "--m", "12", "--x", "1")[0] == 2
    assert _run("nonsense")[0] == 2
    for text in ("inf", "nan", "1e999999", "1e99999999"):
        code, _, err = _run("classify", text)
        assert code == 2 and err.startswith("error: "), (text, code, err)
    assert _run("survey", "--mode", "census", "--hi", "Infinity")[0] == 2
    saved = os.environ.pop("NEAR_PERFECT_WORKERS", None)
    os.environ["NEAR_PERFECT_WORKERS"] = "inf"
    try:
        code, out, _ = _run("classify", "12", "--format", "lines")
        assert code == 0 and _records(out)[0]["redundant"] == 4
    finally:
        os.environ.pop("NEAR_PERFECT_WORKERS", None)
        if saved is not None:
            os.environ["NEAR_PERFECT_WORKERS"] = saved
        reset_settings()
    code, _, err = _run("classify", str(3 * 2**62))
    assert code == 3 and err.startswith("error: ")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "bad.toml"
        path.write_text("not = [toml")
        assert _run("resume", str(path))[0] == 4


@test()
def test_cli_enumerate_round_trip():
    """Machine-mode records re-parse to the library results"""
    code, out, err = _run("enumerate", "1..1000", "--near-perfect", "--format", "lines")
    assert (code, err) == (0, "")
    records = _records(out)
    assert_non_empty(records)
    for r in records:
        assert_has_keys(r, "n", "sigma", "tag", "redundant")
    assert len(records) == 15
    assert [(r["n"], r["redundant"]) for r in records] == [
        (w.n, w.redundant) for w in enumerate_near_perfect(1, 1000)
    ]
    for r in records:
        assert r["sigma"] == arith.sigma(r["n"])
    assert _run("enumerate", "1..12", "--format", "lines")[:2] == (0, "")
    pk = _records(_run("enumerate", "--pk-primes", "--t-max", "8", "--format", "lines")[1])
    assert [r["n"] for r in pk][:11] == [3, 5, 7, 11, 13, 23, 29, 31, 47, 59, 61]
    perfect = _records(_run("enumerate", "1..10000", "--perfect", "--format", "lines")[1])
    assert [r["n"] for r in perfect] == [6, 28, 496, 8128]
    assert _run("enumerate", "--pk-primes")[0] == 2


@test()
def test_cli_generate():
    """generate for theorems 3, 4 and 5"""
    [r] = _records(_run("generate", "--theorem", "5", "--p", "3", "--format", "lines")[1])
    assert (r["n"], r["redundant"], r["verified"]) == (196, 7, True)
    code, out, _ = _run("generate", "--theorem", "4", "--m", "6", "--x", "3", "--format", "lines")
    assert code == 0
    [r] = _records(out)
    assert r["n"] is None and r["note"] == "no construction"
    [r] = _records(_run("generate", "--theorem", "3", "--t", "4", "--k", "1", "--format", "lines")[1])
    assert (r["n"], r["redundant"], r["provenance"]) == (104, 2, "theorem3(t=4,k=1)")


@test()
def test_cli_survey_and_resume():
    """survey writes reports and exits 0 without violations"""
    import tempfile
    from pathlib import Path

    code, out, err = _run(
        "survey", "--mode", "conjecture1", "--k", "1", "--lo", "1", "--hi", "1000",
        "--format", "lines",
    )
    assert (code, err) == (0, "")
    summary, *hits = _records(out)
    assert_has_keys(summary, "mode", "completed_up_to", "complete", "hits", "tallies")
    assert_non_empty(hits)
    assert summary["hits"] == 4
    assert [h["n"] for h in hits] == [20, 104, 464, 650]

    with tempfile.TemporaryDirectory() as tmp:
        stem = str(Path(tmp) / "c3")
        checkpoint = str(Path(tmp) / "c3.toml")
        code, _, _ = _run(
            "survey", "--mode", "conjecture3", "--hi", "1e5", "--segment-size", "20000",
            "--checkpoint", checkpoint, "--output", stem,
        )
        assert code == 0
        assert Path(stem + ".jsonl").exists()
        summary = json.loads(Path(stem + ".summary.json").read_text())
        assert_has_keys(
            summary, "mode", "config", "config_hash", "completed_up_to", "complete",
            "hits", "violations", "tallies", "multiplicity", "elapsed",
        )
        assert summary["complete"] and summary["violations"] == 0
        code, out, _ = _run("resume", checkpoint, "--format", "lines")
        assert code == 0 and _records(out)[0]["completed_up_to"] == 100000

    report = SurveyReport(
        config=SurveyConfig(mode="conjecture2", lo=1, hi=10),
        hits=[],
        violations=[{"n": 1, "sigma": 1, "redundant": 5, "factorization": [], "mode": "conjecture2"}],
        completed_up_to=10,
        elapsed=0.0,
    )
    assert _run_report(report) == EXIT_VIOLATIONS
    assert_raises(RangeError, SurveyConfig, mode="census", lo=5, hi=1)


def _run_report(report: SurveyReport) -> int:
    import contextlib
    import io

    with contextlib.redirect_stdout(io.StringIO()):
        return _print_report(report, "table")


@test()
def test_cli_verify_and_config():
    """verify checks the sequence fixtures; config prints and writes TOML"""
    import tempfile
    import tomllib
    from pathlib import Path

    code, out, _ = _run("verify", "--format", "lines")
    assert code == 0
    assert all(r["ok"] for r in _records(out))
    assert _run("verify", "--sequence", "p-primes")[0] == 0

    code, out, _ = _run("config")
    assert code == 0
    assert tomllib.loads(out)["near_perfect"]["block_size"] == get_settings().block_size
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "np.toml"
        assert _run("config", "--write", str(path))[0] == 0
        assert "[near_perfect]" in path.read_text()
        path.write_text("[near_perfect]\npseudoperfect_cap = 5000\n")
        assert _run("--config", str(path), "config")[0] == 0
        assert get_settings().pseudoperfect_cap == 5000
    reset_settings()


if __name__ == "__main__":
    sys.exit(main())
