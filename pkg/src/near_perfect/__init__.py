"""near-perfect - near-perfect numbers, their constructions and range surveys

A near-perfect number n is the sum of all its proper divisors but one; the
excluded divisor is d = sigma(n) - 2n.

Architecture:
- errors.py: Exception hierarchy (one class per failure kind)
- config.py: Settings from defaults, TOML file and environment
- utils.py: TypedDict records, parsing and file helpers
- tests.py: Test framework (@test decorator, run_tests)
- arith.py: Factorization, sigma, primality, Lucas-Lehmer
- sieve.py: Segmented sigma sieve and ordered segment evaluation
- classify.py: Deficient/perfect/abundant, witnesses, pseudoperfect
- construct.py: Perfect numbers, 2^t - 2^k - 1 primes, generators
- checkpoint.py: TOML checkpoints and the per-path lock
- survey.py: Conjecture surveys, census, odd search, resume
- sequences.py: Published sequence prefixes checked against the library
- cli.py: near-perfect command line
"""

# Import infrastructure modules
from . import errors
from . import config
from . import utils
from . import tests

# Import library modules to register @test functions
from . import arith
from . import sieve
from . import classify
from . import construct
from . import checkpoint
from . import survey
from . import sequences
from . import cli

# Re-export key components for external use
from .errors import NearPerfectError
from .config import Settings, get_settings, set_settings, load_settings
from .arith import factorize, sigma, divisors, is_prime_u64, is_probable_prime, lucas_lehmer
from .sieve import sigma_segment, scan_range
from .classify import classify as classify_number
from .classify import near_perfect_witness, enumerate_near_perfect, is_pseudoperfect
from .survey import SurveyConfig, SurveyReport, run_survey, resume
from .tests import run_tests, test

__all__ = [
    # Modules
    "errors",
    "config",
    "utils",
    "tests",
    "arith",
    "sieve",
    "classify",
    "construct",
    "checkpoint",
    "survey",
    "sequences",
    "cli",
    # Re-exported components
    "NearPerfectError",
    "Settings",
    "get_settings",
    "set_settings",
    "load_settings",
    "factorize",
    "sigma",
    "divisors",
    "is_prime_u64",
    "is_probable_prime",
    "lucas_lehmer",
    "sigma_segment",
    "scan_range",
    "classify_number",
    "near_perfect_witness",
    "enumerate_near_perfect",
    "is_pseudoperfect",
    "SurveyConfig",
    "SurveyReport",
    "run_survey",
    "resume",
    "run_tests",
    "test",
]
