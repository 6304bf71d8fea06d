"""Run-directory persistence: JSON snapshots plus an append-only event log.

Layout under the run root:

    config.json                 resolved run configuration (schema_version inside)
    pool.json                   the full example pool, in input order
    events.jsonl                append-only log, one canonical JSON object per line
    ledger.json                 final budget ledger snapshot
    agents/<id>/metadata.json   agent record
    agents/<id>/artifact/       the agent's files
    iterations/<idx>/           examples, outcomes, report, elo snapshot
    sessions/<id>/              mutator workspaces
    lock                        advisory writer lock, removed on close

Everything referenced by an event or snapshot lives inside the run root and
is recorded as a root-relative path, so two runs with equal configuration
produce byte-identical logs wherever their directories happen to live. No
wall-clock data is written for the same reason.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import TYPE_CHECKING, Iterator, Sequence

if TYPE_CHECKING:
    from .evaluation import EvalOutcome, ExampleRef

SCHEMA_VERSION = 1

CONFIG_FILE = "config.json"
POOL_FILE = "pool.json"
EVENTS_FILE = "events.jsonl"
LEDGER_FILE = "ledger.json"
LOCK_FILE = "lock"


class StoreIntegrityError(RuntimeError):
    """The run directory is missing, incomplete, or corrupted."""


def canonical_json(obj) -> str:
    """Compact, key-sorted JSON; the byte-stable form used for event lines."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def dump_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_json(path: Path):
    try:
        return json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise StoreIntegrityError(f"missing store document: {path}") from None
    except json.JSONDecodeError as exc:
        raise StoreIntegrityError(f"corrupt store document {path}: {exc}") from None


class RunStore:
    """One run directory. Create for writing, open for reading."""

    def __init__(self, root: Path, writable: bool = False) -> None:
        self.root = Path(root)
        self._writable = writable
        self._events_fh = None

    # -- lifecycle -----------------------------------------------------------

    @classmethod
    def create(cls, root: Path, config_doc: dict, pool: Sequence["ExampleRef"]) -> "RunStore":
        root = Path(root)
        if root.exists() and any(root.iterdir()):
            raise FileExistsError(f"run directory {root} already exists and is not empty")
        root.mkdir(parents=True, exist_ok=True)
        store = cls(root, writable=True)
        store._acquire_lock()
        (root / "agents").mkdir()
        (root / "iterations").mkdir()
        (root / "sessions").mkdir()
        doc = dict(config_doc)
        doc["schema_version"] = SCHEMA_VERSION
        dump_json(root / CONFIG_FILE, doc)
        dump_json(root / POOL_FILE, [ref.as_dict() for ref in pool])
        store._events_fh = (root / EVENTS_FILE).open("a", encoding="utf-8")
        return store

    @classmethod
    def open(cls, root: Path) -> "RunStore":
        root = Path(root)
        if not (root / CONFIG_FILE).is_file():
            raise StoreIntegrityError(f"{root} is not a run directory (no {CONFIG_FILE})")
        return cls(root, writable=False)

    def close(self) -> None:
        if self._events_fh is not None:
            self._events_fh.close()
            self._events_fh = None
        if self._writable:
            lock = self.root / LOCK_FILE
            if lock.exists():
                lock.unlink()
            self._writable = False

    def _acquire_lock(self) -> None:
        lock = self.root / LOCK_FILE
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StoreIntegrityError(f"run directory {self.root} is locked by another writer") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))

    # -- paths ---------------------------------------------------------------

    def relpath(self, path: Path) -> str:
        return Path(path).relative_to(self.root).as_posix()

    def agent_dir(self, agent_id: str) -> Path:
        return self.root / "agents" / agent_id

    def artifact_dir(self, agent_id: str) -> Path:
        return self.agent_dir(agent_id) / "artifact"

    def iteration_dir(self, index: int) -> Path:
        return self.root / "iterations" / f"{index:04d}"

    def session_dir(self, agent_id: str) -> Path:
        return self.root / "sessions" / agent_id

    # -- documents -----------------------------------------------------------

    @property
    def config(self) -> dict:
        return load_json(self.root / CONFIG_FILE)

    def load_pool(self) -> list["ExampleRef"]:
        from .evaluation import ExampleRef

        return [ExampleRef(**entry) for entry in load_json(self.root / POOL_FILE)]

    def write_agent_metadata(self, record: dict) -> None:
        agent_dir = self.agent_dir(record["agent_id"])
        agent_dir.mkdir(parents=True, exist_ok=True)
        dump_json(agent_dir / "metadata.json", record)

    def write_iteration_record(self, record: dict) -> None:
        path = self.iteration_dir(record["index"])
        path.mkdir(parents=True, exist_ok=True)
        dump_json(path / "iteration.json", record)

    def write_standings(self, index: int, standings: dict) -> None:
        path = self.iteration_dir(index)
        path.mkdir(parents=True, exist_ok=True)
        dump_json(path / "standings.json", standings)

    def write_ledger(self, ledger_doc: dict) -> None:
        dump_json(self.root / LEDGER_FILE, ledger_doc)

    def write_text(self, relative: str, text: str) -> str:
        path = self.root / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return relative

    def persist_outcomes(
        self, iteration: int, phase: str, agent_id: str, outcomes: Sequence["EvalOutcome"]
    ) -> str:
        """Append-write one agent's outcome records for an iteration phase."""
        directory = self.iteration_dir(iteration)
        if phase != "tournament":
            directory = directory / phase
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"outcomes_{agent_id}.jsonl"
        with path.open("w", encoding="utf-8") as fh:
            for outcome in outcomes:
                fh.write(canonical_json(outcome.as_dict()) + "\n")
        return self.relpath(path)

    def load_outcomes(self, iteration: int, phase: str, agent_id: str) -> list["EvalOutcome"]:
        from .evaluation import EvalOutcome

        directory = self.iteration_dir(iteration)
        if phase != "tournament":
            directory = directory / phase
        path = directory / f"outcomes_{agent_id}.jsonl"
        if not path.is_file():
            raise StoreIntegrityError(f"missing outcomes file: {path}")
        return [EvalOutcome(**json.loads(line)) for line in path.read_text("utf-8").splitlines() if line]

    # -- event log -----------------------------------------------------------

    def append_event(self, event: dict) -> None:
        if self._events_fh is None:
            raise StoreIntegrityError("store is not open for writing")
        self._events_fh.write(canonical_json(event) + "\n")
        self._events_fh.flush()

    def events(self) -> Iterator[dict]:
        path = self.root / EVENTS_FILE
        if not path.is_file():
            raise StoreIntegrityError(f"missing event log: {path}")
        with path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StoreIntegrityError(f"corrupt event at line {line_no}: {exc}") from None
