"""Standalone test runner for near-perfect.

Usage:
    near-perfect-test
    near-perfect-test --category sieve
    near-perfect-test --pattern "*theorem4*"
    near-perfect-test --slow

With coverage:
    uv run coverage run -m near_perfect.test
    uv run coverage report
    uv run coverage html
"""

import argparse
import logging
import sys


def main() -> int:
    """Entry point for near-perfect-test command."""
    parser = argparse.ArgumentParser(
        description="Run near-perfect tests",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  near-perfect-test
  near-perfect-test --category classify
  near-perfect-test --pattern "*survey*"
  near-perfect-test --stop-on-failure
  near-perfect-test --slow --examples 500

With coverage:
  uv run coverage run -m near_perfect.test
  uv run coverage report --show-missing
  uv run coverage html && open htmlcov/index.html
        """,
    )
    parser.add_argument(
        "--pattern",
        "-p",
        default="*",
        help="Glob pattern to filter test names (default: *)",
    )
    parser.add_argument(
        "--category",
        "-c",
        default="*",
        help="Filter by module category (default: *)",
    )
    parser.add_argument(
        "--stop-on-failure",
        "-x",
        action="store_true",
        help="Stop at first failure",
    )
    parser.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        help="Quiet mode - only show summary",
    )
    parser.add_argument(
        "--list",
        "-l",
        action="store_true",
        help="List available tests without running them",
    )
    parser.add_argument(
        "--slow",
        action="store_true",
        help="Include slow acceptance tests (odd search to 2e8, pattern check to 1e9)",
    )
    parser.add_argument(
        "--examples",
        "-n",
        type=int,
        default=100,
        help="Examples per hypothesis property test (default: 100)",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Show library log messages",
    )

    args = parser.parse_args()

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR)

    # Importing the package registers every @test function
    from near_perfect.tests import TESTS, run_tests, set_example_budget

    set_example_budget(args.examples)

    if args.list:
        print("Available tests:")
        by_category: dict[str, list[str]] = {}
        for name, info in sorted(TESTS.items()):
            by_category.setdefault(info.module, []).append(name)

        for cat in sorted(by_category.keys()):
            print(f"\n[{cat}]")
            for name in by_category[cat]:
                info = TESTS[name]
                marker = " (skip)" if info.skip else " (slow)" if info.slow else ""
                print(f"  {name}{marker}")
        return 0

    results = run_tests(
        pattern=args.pattern,
        category=args.category,
        verbose=not args.quiet,
        stop_on_failure=args.stop_on_failure,
        include_slow=args.slow,
    )

    if args.quiet:
        print(results.summary())
        if results.failed:
            print("\nFailed tests:")
            for r in results.results:
                if r.status == "failed":
                    print(f"  {r.name}: {r.error}")

    return 1 if results.failed > 0 else 0


if __name__ == "__main__":
    sys.exit(main())
