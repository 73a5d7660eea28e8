"""near-perfect test framework

Tests are defined inline in the library modules using the @test decorator
and run by `near-perfect-test` (see test.py).

Usage from a Python shell:
    from near_perfect.tests import run_tests
    run_tests()                       # Run all fast tests
    run_tests(category="sieve")       # Run one module's tests
    run_tests(pattern="*witness*")    # Run tests matching pattern
    run_tests(include_slow=True)      # Include acceptance-scale scans

Usage from command line:
    near-perfect-test
    near-perfect-test --category classify
    near-perfect-test --pattern "*theorem4*" --slow
"""

import fnmatch
import time
import traceback
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Literal, Optional


# ============================================================================
# Test Registry
# ============================================================================


@dataclass
class TestInfo:
    """Information about a registered test."""

    func: Callable
    module: str  # Auto-extracted category: "arith", "sieve", etc.
    skip: bool = False
    slow: bool = False


# Global test registry: name -> TestInfo
TESTS: dict[str, TestInfo] = {}


def test(*, skip: bool = False, slow: bool = False) -> Callable:
    """Decorator to register a test function.

    Args:
        skip: If True, test will be skipped
        slow: If True, test only runs when slow tests are requested

    Example:
        @test()
        def test_sigma_small():
            assert sigma(6) == 12

        @test(slow=True)
        def test_odd_search_acceptance():
            ...
    """

    def decorator(func: Callable) -> Callable:
        # e.g. "near_perfect.classify" -> "classify"
        module_name = func.__module__
        if "." in module_name:
            category = module_name.rsplit(".", 1)[-1]
        else:
            category = module_name

        TESTS[func.__name__] = TestInfo(
            func=func,
            module=category,
            skip=skip,
            slow=slow,
        )
        return func

    return decorator


# ============================================================================
# Test Results
# ============================================================================


@dataclass
class TestResult:
    """Result of a single test execution."""

    name: str
    category: str
    status: Literal["passed", "failed", "skipped"]
    duration: float = 0.0
    error: Optional[str] = None
    traceback: Optional[str] = None


@dataclass
class TestResults:
    """Aggregate results of a test run."""

    passed: int = 0
    failed: int = 0
    skipped: int = 0
    total_time: float = 0.0
    results: list[TestResult] = field(default_factory=list)

    def add(self, result: TestResult) -> None:
        """Add a test result and update counts."""
        self.results.append(result)
        if result.status == "passed":
            self.passed += 1
        elif result.status == "failed":
            self.failed += 1
        elif result.status == "skipped":
            self.skipped += 1

    def summary(self) -> str:
        status_parts = []
        if self.passed:
            status_parts.append(f"{self.passed} passed")
        if self.failed:
            status_parts.append(f"{self.failed} failed")
        if self.skipped:
            status_parts.append(f"{self.skipped} skipped")
        return f"Results: {', '.join(status_parts) or 'nothing run'} ({self.total_time:.2f}s)"


# ============================================================================
# Assertion Helpers
# ============================================================================


def assert_has_keys(record: dict, *keys: str) -> None:
    """Assert a record carries every listed field."""
    assert isinstance(record, dict), f"Expected a record, got {type(record).__name__}"
    missing = [k for k in keys if k not in record]
    assert not missing, f"Record {record!r} lacks {missing}"


def assert_non_empty(value: Any) -> None:
    """Assert a result (list, array, string) holds something."""
    assert value is not None, "Result is None"
    if hasattr(value, "__len__"):
        assert len(value) > 0, f"Result is empty: {value!r}"


def assert_is_list(value: Any, min_length: int = 0) -> None:
    """Assert value is a list with at least min_length items."""
    assert isinstance(value, list), f"Expected list, got {type(value).__name__}"
    assert len(value) >= min_length, (
        f"Expected at least {min_length} items, got {len(value)}"
    )


def assert_all_have_keys(items: list[dict], *keys: str) -> None:
    """Assert all dicts in list have specified keys."""
    assert_is_list(items)
    for i, item in enumerate(items):
        assert isinstance(item, dict), f"Item {i} is not a dict: {type(item).__name__}"
        missing = [k for k in keys if k not in item]
        assert not missing, f"Item {i} missing keys: {missing}"


def assert_ascending(values: Iterable[int]) -> None:
    """Assert values are strictly increasing."""
    values = list(values)
    for i in range(1, len(values)):
        assert values[i - 1] < values[i], (
            f"Not ascending at index {i}: {values[i - 1]} >= {values[i]}"
        )


def assert_raises(exc_type: type[BaseException], func: Callable, *args, **kwargs):
    """Assert func(*args, **kwargs) raises exc_type; returns the exception."""
    try:
        func(*args, **kwargs)
    except exc_type as e:
        return e
    raise AssertionError(
        f"Expected {exc_type.__name__} from {getattr(func, '__name__', func)!r}"
    )


# ============================================================================
# Test Configuration
# ============================================================================

# Examples per hypothesis property test (runner flag --examples)
# Can be overridden by test runner via set_example_budget()
_example_budget: int = 100


def set_example_budget(n: int) -> None:
    """Set how many examples each property test draws."""
    global _example_budget
    _example_budget = max(1, n)


def get_example_budget() -> int:
    """Get the current example budget."""
    return _example_budget


def property_settings(**overrides):
    """hypothesis settings for in-module property tests.

    Deadlines are disabled: the first call in a process pays for numpy
    warm-up and the small-prime table.
    """
    from hypothesis import HealthCheck, settings

    return settings(
        max_examples=overrides.pop("max_examples", _example_budget),
        deadline=None,
        derandomize=True,
        suppress_health_check=[HealthCheck.too_slow],
        **overrides,
    )


# ============================================================================
# Test Runner
# ============================================================================


def run_tests(
    pattern: str = "*",
    category: str = "*",
    verbose: bool = True,
    stop_on_failure: bool = False,
    include_slow: bool = False,
) -> TestResults:
    """Run registered tests and return results.

    Args:
        pattern: Glob pattern to filter test names (e.g., "*witness*")
        category: Filter by module category (e.g., "arith", "survey")
        verbose: Print progress and results
        stop_on_failure: Stop at first failure
        include_slow: Also run tests registered with slow=True

    Returns:
        TestResults with pass/fail counts and individual results
    """
    results = TestResults()
    start_time = time.time()

    tests_by_category: dict[str, list[tuple[str, TestInfo]]] = {}
    for name, info in sorted(TESTS.items()):
        if not fnmatch.fnmatch(name, pattern):
            continue
        if category != "*" and info.module != category:
            continue
        tests_by_category.setdefault(info.module, []).append((name, info))

    if not tests_by_category:
        if verbose:
            print(f"No tests found matching pattern={pattern!r}, category={category!r}")
        return results

    if verbose:
        print("=" * 80)
        print("near-perfect Test Runner")
        print("=" * 80)
        print()

    for cat_name in sorted(tests_by_category.keys()):
        tests = tests_by_category[cat_name]
        if verbose:
            print(f"[{cat_name}] Running {len(tests)} tests...")

        for name, info in tests:
            result = _run_single_test(name, info, verbose, include_slow)
            results.add(result)

            if result.status == "failed" and stop_on_failure:
                if verbose:
                    print()
                    print("Stopping on first failure.")
                break

        if stop_on_failure and results.failed > 0:
            break

        if verbose:
            print()

    results.total_time = time.time() - start_time

    if verbose:
        print("=" * 80)
        print(results.summary())
        print("=" * 80)

    return results


def _run_single_test(
    name: str, info: TestInfo, verbose: bool, include_slow: bool
) -> TestResult:
    """Run a single test and return the result."""
    if info.skip or (info.slow and not include_slow):
        if verbose:
            reason = "slow" if info.slow and not info.skip else "skipped"
            print(f"  - {name} ({reason})")
        return TestResult(
            name=name,
            category=info.module,
            status="skipped",
        )

    start_time = time.time()
    try:
        info.func()
        duration = time.time() - start_time

        if verbose:
            print(f"  + {name} ({duration:.2f}s)")

        return TestResult(
            name=name,
            category=info.module,
            status="passed",
            duration=duration,
        )

    except Exception as e:
        duration = time.time() - start_time
        error_msg = str(e)
        tb = traceback.format_exc()

        if verbose:
            print(f"  x {name} ({duration:.2f}s)")
            print(f"    {type(e).__name__}: {error_msg}")
            print()
            for line in tb.strip().split("\n"):
                print(f"    {line}")
            print()

        return TestResult(
            name=name,
            category=info.module,
            status="failed",
            duration=duration,
            error=f"{type(e).__name__}: {error_msg}",
            traceback=tb,
        )
