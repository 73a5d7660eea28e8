#!/usr/bin/env python3
"""Sequence Information Extraction Script

This script dumps the reference data the library produces below a bound, for
use when writing new range-specific tests. Run it before adding a fixture or
an expected survey result, then paste the relevant values into the test.

Usage:
    uv run python tests/sequence_info.py <bound>

Example:
    uv run python tests/sequence_info.py 1e5

The output includes:
- Bound and the classification tallies below it
- Near-perfect numbers with their redundant divisor and factorization
- Near-perfect numbers of the P-prime form (t, k)
- P-primes below the bound
- Perfect numbers below the bound
- Odd abundant numbers (first 50)
"""

import json
import sys


def main():
    if len(sys.argv) < 2:
        print(__doc__)
        sys.exit(1)

    from near_perfect.arith import factorize
    from near_perfect.classify import (
        classify_range,
        enumerate_near_perfect,
        p_near_perfect_form,
    )
    from near_perfect.construct import enumerate_p_primes
    from near_perfect.errors import NearPerfectError
    from near_perfect.sieve import scan_range
    from near_perfect.utils import factor_pairs, parse_int

    try:
        bound = parse_int(sys.argv[1])
    except ValueError as e:
        print(f"Error: {e}")
        sys.exit(1)

    try:
        info = {}

        info["bound"] = bound
        info["tallies"] = classify_range(1, bound)

        # Near-perfect numbers
        witnesses = enumerate_near_perfect(1, bound)
        info["near_perfect"] = []
        for w in witnesses:
            info["near_perfect"].append(
                {
                    "n": w.n,
                    "sigma": w.sigma,
                    "redundant": w.redundant,
                    "factorization": factor_pairs(factorize(w.n).factors),
                }
            )

        info["p_form"] = []
        for w in witnesses:
            form = p_near_perfect_form(w.n)
            if form is not None:
                info["p_form"].append({"n": w.n, "t": form[0], "k": form[1]})

        # P-primes 2^t - 2^k - 1 below the bound
        t_max = max(2, bound.bit_length() + 1)
        info["p_primes"] = [
            {"value": pk.value, "t": pk.t, "k": pk.k}
            for pk in enumerate_p_primes(t_max)
            if pk.value < bound
        ]

        info["perfect"] = [n for n, _ in scan_range(1, bound, "perfect")]
        info["odd_abundant"] = [n for n, _ in scan_range(1, bound, "odd-abundant")][:50]
    except NearPerfectError as e:
        print(f"Error: {e.message}")
        sys.exit(1)

    # Output as formatted JSON
    print(json.dumps(info, indent=2))


if __name__ == "__main__":
    main()
