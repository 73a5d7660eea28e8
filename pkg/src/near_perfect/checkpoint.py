"""Survey checkpoints - TOML state written atomically at segment boundaries

Layout:
    [header]        format, mode, config_hash, completed_up_to, elapsed
    [config]        the survey configuration
    [[hits]]        hit records accumulated so far
    [[violations]]  violation records accumulated so far
    [tallies]       running counters
    [multiplicity]  redundant divisor -> near-perfect numbers (conjecture3)

config_hash covers only the fields that determine the report (mode, lo, hi,
k); resuming with another segment size or worker count is allowed.
"""

import hashlib
import json
import logging
import os
import threading
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import tomli_w

from .errors import CheckpointBusyError, CorruptCheckpointError
from .tests import assert_raises, test
from .utils import HitRecord, atomic_write_text

logger = logging.getLogger(__name__)

FORMAT = "near-perfect-checkpoint/1"
IDENTITY_FIELDS = ("mode", "lo", "hi", "k")


def config_identity(config: dict[str, Any]) -> dict[str, Any]:
    return {key: config.get(key) for key in IDENTITY_FIELDS}


def config_hash(config: dict[str, Any]) -> str:
    canonical = json.dumps(config_identity(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _toml_safe(record: dict) -> dict:
    # TOML has no null
    return {k: v for k, v in record.items() if v is not None}


@dataclass
class CheckpointState:
    config: dict[str, Any]
    completed_up_to: int
    hits: list[HitRecord] = field(default_factory=list)
    violations: list[HitRecord] = field(default_factory=list)
    tallies: dict[str, int] = field(default_factory=dict)
    multiplicity: dict[int, list[int]] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def mode(self) -> str:
        return self.config["mode"]

    def to_toml(self) -> str:
        document = {
            "header": {
                "format": FORMAT,
                "mode": self.mode,
                "config_hash": config_hash(self.config),
                "completed_up_to": self.completed_up_to,
                "elapsed": self.elapsed,
            },
            "config": _toml_safe(self.config),
            "hits": [_toml_safe(h) for h in self.hits],
            "violations": [_toml_safe(v) for v in self.violations],
            "tallies": dict(self.tallies),
            "multiplicity": {str(d): ns for d, ns in self.multiplicity.items()},
        }
        return tomli_w.dumps(document)


def save_checkpoint(path: str | Path, state: CheckpointState) -> None:
    atomic_write_text(path, state.to_toml())
    logger.info("Checkpoint %s: completed up to %d", path, state.completed_up_to)


def load_checkpoint(path: str | Path) -> CheckpointState:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            document = tomllib.load(f)
    except FileNotFoundError:
        raise CorruptCheckpointError(f"Checkpoint not found: {path}")
    except (OSError, tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise CorruptCheckpointError(f"Failed to parse checkpoint {path}: {e}")

    try:
        header = document["header"]
        config = document["config"]
        if header["format"] != FORMAT:
            raise CorruptCheckpointError(
                f"Checkpoint {path} has format {header['format']!r}, expected {FORMAT!r}"
            )
        config.setdefault("k", None)
        if header["config_hash"] != config_hash(config):
            raise CorruptCheckpointError(
                f"Checkpoint {path}: [config] does not match its header hash"
            )
        completed = header["completed_up_to"]
        if not isinstance(completed, int) or not config["lo"] <= completed <= config["hi"]:
            raise CorruptCheckpointError(
                f"Checkpoint {path}: completed_up_to {completed!r} outside the survey range"
            )
        return CheckpointState(
            config=config,
            completed_up_to=completed,
            hits=list(document.get("hits", [])),
            violations=list(document.get("violations", [])),
            tallies=dict(document.get("tallies", {})),
            multiplicity={int(d): ns for d, ns in document.get("multiplicity", {}).items()},
            elapsed=float(header.get("elapsed", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptCheckpointError(f"Checkpoint {path} is incomplete: {e!r}")


# ============================================================================
# Path Lock
# ============================================================================


class CheckpointLocks:
    """One survey per checkpoint path, within this process and across processes."""

    def __init__(self):
        self._held: set[Path] = set()
        self._lock = threading.RLock()

    @staticmethod
    def lock_path(path: Path) -> Path:
        return path.with_name(path.name + ".lock")

    @staticmethod
    def _create(lock_path: Path) -> None:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        with os.fdopen(fd, "w") as f:
            f.write(f"{os.getpid()}\n")

    @staticmethod
    def owner(lock_path: Path) -> Optional[int]:
        """pid recorded in a lock file, None when unreadable."""
        try:
            return int(lock_path.read_text().split()[0])
        except (OSError, ValueError, IndexError):
            return None

    @staticmethod
    def _is_running(pid: int) -> bool:
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return False
        except PermissionError:
            # exists, owned by another user
            return True
        return True

    def acquire(self, path: str | Path) -> Path:
        path = Path(path).resolve()
        with self._lock:
            if path in self._held:
                raise CheckpointBusyError(f"Checkpoint {path} is in use by another survey")
            lock_path = self.lock_path(path)
            lock_path.parent.mkdir(parents=True, exist_ok=True)
            try:
                self._create(lock_path)
            except FileExistsError:
                pid = self.owner(lock_path)
                if pid is None:
                    raise CheckpointBusyError(
                        f"Checkpoint {path} is locked ({lock_path} has no owner pid; "
                        "remove it if no survey is running)"
                    )
                if self._is_running(pid):
                    raise CheckpointBusyError(f"Checkpoint {path} is locked by pid {pid}")
                logger.warning("Taking over lock %s left by exited pid %d", lock_path, pid)
                lock_path.unlink(missing_ok=True)
                try:
                    self._create(lock_path)
                except FileExistsError:
                    raise CheckpointBusyError(f"Checkpoint {path} was locked concurrently")
            self._held.add(path)
            logger.debug("Acquired checkpoint lock %s", lock_path)
            return path

    def release(self, path: str | Path) -> None:
        path = Path(path).resolve()
        with self._lock:
            if path not in self._held:
                return
            self._held.discard(path)
            try:
                os.unlink(self.lock_path(path))
            except FileNotFoundError:
                logger.warning("Lock file for %s vanished", path)

    def is_held(self, path: str | Path) -> bool:
        with self._lock:
            return Path(path).resolve() in self._held


LOCKS = CheckpointLocks()


class checkpoint_lock:
    """Context manager holding the lock on a checkpoint path (no-op for None)."""

    def __init__(self, path: Optional[str | Path]):
        self.path = path

    def __enter__(self):
        if self.path is not None:
            LOCKS.acquire(self.path)
        return self

    def __exit__(self, *exc):
        if self.path is not None:
            LOCKS.release(self.path)
        return False


@test()
def test_checkpoint_toml_roundtrip():
    """Saved state loads back with the same hits and high-water mark"""
    import tempfile

    state = CheckpointState(
        config={"mode": "conjecture1", "lo": 1, "hi": 1000, "k": 1, "segment_size": 100},
        completed_up_to=700,
        hits=[
            {"n": 20, "sigma": 42, "redundant": 2, "factorization": [[2, 2], [5, 1]],
             "mode": "conjecture1", "p_form": [3, 1]},
            {"n": 650, "sigma": 1302, "redundant": 2, "factorization": [[2, 1], [5, 2], [13, 1]],
             "mode": "conjecture1"},
        ],
        tallies={"near_perfect": 14},
        multiplicity={2: [20, 650]},
        elapsed=1.5,
    )
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "survey.toml"
        save_checkpoint(path, state)
        loaded = load_checkpoint(path)
    assert loaded.completed_up_to == 700
    assert loaded.hits == state.hits
    assert loaded.tallies == {"near_perfect": 14}
    assert loaded.multiplicity == {2: [20, 650]}
    assert loaded.mode == "conjecture1"
    assert loaded.elapsed == 1.5


@test()
def test_checkpoint_corruption_detected():
    """Garbage, missing files and edited configs raise CorruptCheckpointError"""
    import tempfile

    state = CheckpointState(
        config={"mode": "census", "lo": 1, "hi": 100}, completed_up_to=50
    )
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "c.toml"
        assert_raises(CorruptCheckpointError, load_checkpoint, path)
        path.write_text("this is [not toml")
        assert_raises(CorruptCheckpointError, load_checkpoint, path)
        save_checkpoint(path, state)
        text = path.read_text().replace("hi = 100", "hi = 200")
        path.write_text(text)
        e = assert_raises(CorruptCheckpointError, load_checkpoint, path)
        assert "hash" in e.message
        path.write_text("[header]\nformat = 'other'\n[config]\nmode = 'census'\n")
        assert_raises(CorruptCheckpointError, load_checkpoint, path)


@test()
def test_checkpoint_lock_exclusive():
    """A second lock on the same path fails until the first is released"""
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "busy.toml"
        with checkpoint_lock(path):
            assert LOCKS.is_held(path)
            assert CheckpointLocks.lock_path(path.resolve()).exists()
            assert_raises(CheckpointBusyError, LOCKS.acquire, path)
            # a lock file left by another process blocks a fresh registry too
            assert_raises(CheckpointBusyError, CheckpointLocks().acquire, path)
        assert not LOCKS.is_held(path)
        assert not CheckpointLocks.lock_path(path.resolve()).exists()
        with checkpoint_lock(path):
            pass
        with checkpoint_lock(None):
            pass


@test()
def test_checkpoint_lock_stale_takeover():
    """A lock left by an exited process is taken over; a live owner still blocks"""
    import subprocess
    import sys
    import tempfile

    exited = subprocess.Popen([sys.executable, "-c", "pass"])
    exited.wait()

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "odd.toml"
        lock_path = CheckpointLocks.lock_path(path.resolve())

        lock_path.write_text(f"{exited.pid}\n")
        with checkpoint_lock(path):
            assert LOCKS.is_held(path)
            assert CheckpointLocks.owner(lock_path) == os.getpid()
        assert not lock_path.exists()

        lock_path.write_text(f"{os.getppid()}\n")
        e = assert_raises(CheckpointBusyError, LOCKS.acquire, path)
        assert str(os.getppid()) in e.message
        lock_path.write_text("")
        assert_raises(CheckpointBusyError, LOCKS.acquire, path)
        assert not LOCKS.is_held(path)
