"""Evaluator and mutator plugins.

Two kinds ship here: the subprocess adapters speaking the line-delimited
JSON protocol, and in-process synthetic doubles used for desk-scale runs,
tests, and the acceptance suite.

Evaluator protocol (one subprocess per batch):
  stdin   one JSON object: {"artifact_dir": str, "examples": [{"example_id",
          "payload_ref"}, ...]}
  stdout  one JSON object per line: {"example_id", "score", "fingerprint"?,
          "diagnostics"?, "agent_stdout"?}
  exit 0 on success; any example without a well-formed line is recorded as
  an evaluation failure by the caller. Default timeout 600 s per batch.

Mutator protocol (one subprocess per phase):
  argv    <command...> SESSION_DIR PHASE       with PHASE in {create, refine}
  create  must write artifact files under SESSION_DIR/artifact plus a
          reasoning.md; refine may revise them in place.
  exit 0 on success; nonzero or timeout is a mutation/refine failure.
  Default timeouts: 1800 s create, 900 s refine.

The synthetic doubles are deterministic by construction: every random draw
derives from a stable hash of (run seed, agent id, ...) rather than from any
shared stream, so runs replay exactly and caching and clone detection are
testable bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import shlex
import subprocess
from pathlib import Path
from typing import Sequence

from .evaluation import ExampleRef

logger = logging.getLogger(__name__)

BUILTIN_SYNTHETIC = "builtin:synthetic"

DEFAULT_EVALUATOR_TIMEOUT = 600.0
DEFAULT_CREATE_TIMEOUT = 1800.0
DEFAULT_REFINE_TIMEOUT = 900.0

PHASE_CREATE = "create"
PHASE_REFINE = "refine"

AGENT_SPEC_FILE = "agent.json"


class PluginError(RuntimeError):
    """A plugin crashed, timed out, or broke the protocol."""


def stable_fraction(*parts) -> float:
    """Deterministic hash of the parts, mapped to [0, 1)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def stable_rng(*parts) -> random.Random:
    """A random.Random seeded from a stable hash of the parts."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class SubprocessEvaluator:
    """Evaluator plugin launched once per batch over the JSON protocol."""

    def __init__(self, command: str, timeout: float = DEFAULT_EVALUATOR_TIMEOUT) -> None:
        self.argv = shlex.split(command)
        if not self.argv:
            raise ValueError("empty evaluator command")
        self.timeout = timeout

    def evaluate(
        self, agent_id: str, artifact_dir: Path, examples: Sequence[ExampleRef]
    ) -> dict[str, dict]:
        request = {
            "artifact_dir": str(artifact_dir),
            "examples": [ref.as_dict() for ref in examples],
        }
        try:
            proc = subprocess.run(
                self.argv,
                input=json.dumps(request),
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired:
            raise PluginError(f"evaluator timed out after {self.timeout}s") from None
        except OSError as exc:
            raise PluginError(f"evaluator could not be launched: {exc}") from None
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else ""
            raise PluginError(f"evaluator exited {proc.returncode}: {tail}")
        outcomes: dict[str, dict] = {}
        for line in proc.stdout.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                fields = json.loads(line)
                example_id = fields["example_id"]
            except (json.JSONDecodeError, TypeError, KeyError):
                logger.warning("evaluator emitted a malformed line: %.120s", line)
                continue
            outcomes[str(example_id)] = fields
        return outcomes


class SyntheticEvaluator:
    """Hash-deterministic Bernoulli evaluator for synthetic agents.

    The artifact's agent.json declares a true accuracy p; each (agent,
    example) pair flips a coin derived from (run seed, agent id, example id)
    and scores 1 when the draw lands under p. The fingerprint is the
    Bernoulli outcome itself, so literal behavioral clones are detectable.
    """

    def __init__(self, run_seed: int) -> None:
        self.run_seed = run_seed

    def evaluate(
        self, agent_id: str, artifact_dir: Path, examples: Sequence[ExampleRef]
    ) -> dict[str, dict]:
        accuracy = read_agent_accuracy(artifact_dir)
        outcomes = {}
        for ref in examples:
            draw = stable_fraction(self.run_seed, agent_id, ref.example_id)
            solved = draw < accuracy
            outcomes[ref.example_id] = {
                "example_id": ref.example_id,
                "score": 1.0 if solved else 0.0,
                "fingerprint": "1" if solved else "0",
                "diagnostics": f"synthetic draw {draw:.6f} against accuracy {accuracy:.6f}",
                "agent_stdout": f"[{agent_id}] {'solved' if solved else 'missed'} {ref.example_id}",
            }
        return outcomes


class SubprocessMutator:
    """Mutator plugin invoked as <command> SESSION_DIR PHASE."""

    def __init__(
        self,
        command: str,
        create_timeout: float = DEFAULT_CREATE_TIMEOUT,
        refine_timeout: float = DEFAULT_REFINE_TIMEOUT,
    ) -> None:
        self.argv = shlex.split(command)
        if not self.argv:
            raise ValueError("empty mutator command")
        self.create_timeout = create_timeout
        self.refine_timeout = refine_timeout

    def run(self, session_dir: Path, phase: str) -> None:
        timeout = self.create_timeout if phase == PHASE_CREATE else self.refine_timeout
        try:
            proc = subprocess.run(
                [*self.argv, str(session_dir), phase],
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired:
            raise PluginError(f"mutator {phase} timed out after {timeout}s") from None
        except OSError as exc:
            raise PluginError(f"mutator could not be launched: {exc}") from None
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else ""
            raise PluginError(f"mutator {phase} exited {proc.returncode}: {tail}")


class SyntheticMutator:
    """Synthetic evolution double operating on the session workspace.

    Create derives a child accuracy from the session winner's accuracy plus
    a seeded draw from N(0.01, 0.02), clipped to [0, 1]. Refine adds 0.005
    with probability one half. Both draws are functions of (run seed, agent
    id, phase) only, so two runs with equal seeds produce identical children.
    """

    def __init__(self, run_seed: int) -> None:
        self.run_seed = run_seed

    def run(self, session_dir: Path, phase: str) -> None:
        session_dir = Path(session_dir)
        agent_id = session_dir.name
        if phase == PHASE_CREATE:
            standings = json.loads((session_dir / "elo_standings.json").read_text("utf-8"))
            winner_id = standings["winner_id"]
            parent = read_agent_accuracy(session_dir / "competitors" / winner_id)
            rng = stable_rng(self.run_seed, agent_id, PHASE_CREATE)
            accuracy = min(1.0, max(0.0, parent + rng.gauss(0.01, 0.02)))
            artifact = session_dir / "artifact"
            artifact.mkdir(parents=True, exist_ok=True)
            write_agent_accuracy(artifact, accuracy)
            (session_dir / "reasoning.md").write_text(
                f"Synthetic child of {winner_id}: accuracy {parent:.6f} -> {accuracy:.6f}.\n",
                encoding="utf-8",
            )
        elif phase == PHASE_REFINE:
            artifact = session_dir / "artifact"
            rng = stable_rng(self.run_seed, agent_id, PHASE_REFINE)
            if rng.random() < 0.5:
                accuracy = min(1.0, read_agent_accuracy(artifact) + 0.005)
                write_agent_accuracy(artifact, accuracy)
                note = f"Refined accuracy to {accuracy:.6f} after the focus report.\n"
            else:
                note = "Focus report reviewed; kept the draft unchanged.\n"
            with (session_dir / "reasoning.md").open("a", encoding="utf-8") as fh:
                fh.write(note)
        else:
            raise PluginError(f"unknown mutator phase {phase!r}")


def read_agent_accuracy(artifact_dir: Path) -> float:
    spec_path = Path(artifact_dir) / AGENT_SPEC_FILE
    try:
        spec = json.loads(spec_path.read_text("utf-8"))
        return float(spec["true_accuracy"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise PluginError(f"unreadable synthetic agent spec at {spec_path}: {exc}") from None


def write_agent_accuracy(artifact_dir: Path, accuracy: float) -> None:
    path = Path(artifact_dir) / AGENT_SPEC_FILE
    path.write_text(json.dumps({"true_accuracy": accuracy}, indent=2) + "\n", encoding="utf-8")


def resolve_evaluator(command: str, run_seed: int, timeout: float = DEFAULT_EVALUATOR_TIMEOUT):
    """Build an evaluator from a command string; 'builtin:synthetic' stays in-process."""
    if command == BUILTIN_SYNTHETIC:
        return SyntheticEvaluator(run_seed)
    return SubprocessEvaluator(command, timeout=timeout)


def resolve_mutator(
    command: str,
    run_seed: int,
    create_timeout: float = DEFAULT_CREATE_TIMEOUT,
    refine_timeout: float = DEFAULT_REFINE_TIMEOUT,
):
    """Build a mutator from a command string; 'builtin:synthetic' stays in-process."""
    if command == BUILTIN_SYNTHETIC:
        return SyntheticMutator(run_seed)
    return SubprocessMutator(command, create_timeout=create_timeout, refine_timeout=refine_timeout)
