"""Runtime settings: defaults, optional TOML file, environment overrides."""

import logging
import os
import tomllib
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Iterator, Optional

import tomli_w

from .tests import assert_raises, test

logger = logging.getLogger(__name__)

CONFIG_ENV = "NEAR_PERFECT_CONFIG"
DEFAULT_CONFIG_FILE = "near-perfect.toml"
CONFIG_TABLE = "near_perfect"

ENV_OVERRIDES = {
    "NEAR_PERFECT_WORKERS": "workers",
    "NEAR_PERFECT_SEGMENT_SIZE": "segment_size",
    "NEAR_PERFECT_BLOCK_SIZE": "block_size",
    "NEAR_PERFECT_GLOBAL_BOUND": "global_bound",
    "NEAR_PERFECT_PSEUDOPERFECT_CAP": "pseudoperfect_cap",
}


@dataclass(frozen=True)
class Settings:
    block_size: int = 1 << 22
    global_bound: int = 2 * 10**9
    pseudoperfect_cap: int = 10**7
    workers: int = 1
    segment_size: int = 1 << 22
    probable_prime_rounds: int = 0
    rho_seed: int = 0x5EED

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"Setting {f.name} must be an integer, got {value!r}")
        minimum = {"probable_prime_rounds": 0, "rho_seed": 0}
        for f in fields(self):
            if getattr(self, f.name) < minimum.get(f.name, 1):
                raise ValueError(f"Setting {f.name} out of range: {getattr(self, f.name)}")
        if self.segment_size > self.block_size:
            raise ValueError(
                f"segment_size ({self.segment_size}) exceeds block_size ({self.block_size})"
            )

    def to_toml(self) -> str:
        return tomli_w.dumps({CONFIG_TABLE: asdict(self)})


# no valid count or bound has more than 40 digits
MAX_COUNT_DIGITS = 40


def parse_count(text: str | int) -> int:
    """Parse a positive count that may use scientific notation ("2e8")."""
    if isinstance(text, int):
        return text
    try:
        value = Decimal(text.strip().replace("_", ""))
    except InvalidOperation:
        raise ValueError(f"Not an integer: {text!r}")
    if not value.is_finite():
        raise ValueError(f"Not a finite integer: {text!r}")
    if value and value.adjusted() >= MAX_COUNT_DIGITS:
        raise ValueError(f"Integer too large: {text!r}")
    if value != value.to_integral_value():
        raise ValueError(f"Not an integer: {text!r}")
    return int(value)


def _read_config_file(path: Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        logger.warning("Ignoring config file %s: %s", path, e)
        return {}
    table = data.get(CONFIG_TABLE, {})
    if not isinstance(table, dict):
        logger.warning("Ignoring config file %s: [%s] is not a table", path, CONFIG_TABLE)
        return {}
    known = {f.name for f in fields(Settings)}
    unknown = set(table) - known
    if unknown:
        logger.warning("Unknown settings in %s: %s", path, sorted(unknown))
    values = {}
    for key, value in table.items():
        if key not in known:
            continue
        # TOML reads 1e6 as a float
        if isinstance(value, (str, float)):
            try:
                value = parse_count(str(value))
            except (ValueError, OverflowError):
                logger.warning("Ignoring %s = %r in %s (not an integer)", key, value, path)
                continue
        values[key] = value
    return values


def load_settings(config_path: Optional[str | Path] = None, **overrides) -> Settings:
    """Resolve settings: defaults, then TOML file, then environment, then overrides."""
    values: dict[str, Any] = {}

    if config_path is None:
        config_path = os.environ.get(CONFIG_ENV)
        if config_path is None and os.path.exists(DEFAULT_CONFIG_FILE):
            config_path = DEFAULT_CONFIG_FILE
    if config_path is not None:
        values.update(_read_config_file(Path(config_path)))

    for env_name, key in ENV_OVERRIDES.items():
        raw = os.environ.get(env_name)
        if raw is None:
            continue
        try:
            values[key] = parse_count(raw)
        except (ValueError, OverflowError):
            logger.warning("Ignoring %s=%r (not an integer)", env_name, raw)

    values.update({k: v for k, v in overrides.items() if v is not None})

    # segment_size follows block_size unless set explicitly
    if "block_size" in values and "segment_size" not in values:
        values["segment_size"] = min(values["block_size"], Settings.segment_size)
    return Settings(**values)


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def set_settings(settings: Settings) -> None:
    global _settings
    _settings = settings


def reset_settings() -> None:
    global _settings
    _settings = None


def with_settings(**changes) -> Settings:
    current = get_settings()
    if "block_size" in changes and "segment_size" not in changes:
        changes["segment_size"] = min(current.segment_size, changes["block_size"])
    return replace(current, **changes)


@contextmanager
def override_settings(**changes) -> Iterator[Settings]:
    """Temporarily replace the process-wide settings."""
    global _settings
    previous = _settings
    _settings = with_settings(**changes)
    try:
        yield _settings
    finally:
        _settings = previous


@test()
def test_parse_count():
    """Counts accept plain, underscored and scientific notation"""
    assert parse_count("2e8") == 200_000_000
    assert parse_count("1_000") == 1000
    assert parse_count(" 42 ") == 42
    assert parse_count(7) == 7
    assert_raises(ValueError, parse_count, "1.5")
    assert_raises(ValueError, parse_count, "lots")
    for text in ("inf", "-Infinity", "nan", "sNaN", "1e999999", "1e99999999"):
        e = assert_raises(ValueError, parse_count, text)
        assert text in str(e)
    assert parse_count("1e39") == 10**39


@test()
def test_load_settings_resolution_order():
    """Defaults, then file, then environment, then explicit overrides"""
    import tempfile

    saved = {name: os.environ.pop(name, None) for name in [CONFIG_ENV, *ENV_OVERRIDES]}
    try:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "np.toml"
            path.write_text(
                "[near_perfect]\nworkers = 3\nblock_size = 65536\nunknown_key = 1\n"
                "pseudoperfect_cap = 2e6\n"
            )
            s = load_settings(path)
            assert (s.workers, s.block_size, s.segment_size) == (3, 65536, 65536)
            assert s.pseudoperfect_cap == 2 * 10**6

            os.environ["NEAR_PERFECT_WORKERS"] = "5"
            os.environ["NEAR_PERFECT_GLOBAL_BOUND"] = "1e8"
            os.environ["NEAR_PERFECT_PSEUDOPERFECT_CAP"] = "many"
            s = load_settings(path)
            assert s.workers == 5 and s.global_bound == 10**8
            assert s.pseudoperfect_cap == 2 * 10**6

            assert load_settings(path, workers=2).workers == 2

            os.environ[CONFIG_ENV] = str(path)
            assert load_settings().block_size == 65536

            path.write_text("not toml [")
            assert load_settings(path).block_size == Settings.block_size
    finally:
        for name, value in saved.items():
            os.environ.pop(name, None)
            if value is not None:
                os.environ[name] = value


@test()
def test_settings_validation_and_toml():
    """Invalid values are rejected; to_toml round-trips"""
    assert_raises(ValueError, Settings, workers=0)
    assert_raises(ValueError, Settings, block_size=100, segment_size=200)
    assert_raises(ValueError, Settings, workers=True)
    s = Settings(workers=4)
    assert Settings(**tomllib.loads(s.to_toml())[CONFIG_TABLE]) == s


@test()
def test_override_settings_restores():
    """override_settings swaps the process settings for the block only"""
    before = get_settings()
    with override_settings(block_size=1000) as s:
        assert get_settings() is s
        assert s.block_size == 1000 and s.segment_size <= 1000
    assert get_settings() is before
