"""Evaluation orchestration: outcome records, the budget ledger, and the
cached, budget-enforcing batch runner in front of evaluator plugins.

The unit of budget is one attempted evaluation of one (agent, example) pair.
Results are cached by that pair; cache hits cost nothing and are returned
byte-identical to the first observation. A plugin failure never aborts a
batch: the affected pairs are recorded as score-0 outcomes whose diagnostics
carry the failure reason, and they still debit the ledger because the
attempt consumed real cost.
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .engine import AgentRecord
    from .store import RunStore

logger = logging.getLogger(__name__)

PHASE_TOURNAMENT = "tournament"
PHASE_DEEP_FOCUS = "deep_focus"

FAILURE_PREFIX = "evaluation failure: "


class BudgetExhaustedError(RuntimeError):
    """Raised when a batch would need more evaluations than remain."""


@dataclass(frozen=True)
class ExampleRef:
    """One training example: an id unique within the pool plus a payload locator."""

    example_id: str
    payload_ref: str = ""

    def __post_init__(self) -> None:
        if not self.example_id:
            raise ValueError("example_id must be non-empty")

    def as_dict(self) -> dict:
        return {"example_id": self.example_id, "payload_ref": self.payload_ref}


@dataclass(frozen=True)
class EvalOutcome:
    """Result of evaluating one agent on one example."""

    agent_id: str
    example_id: str
    score: float
    fingerprint: str | None = None
    diagnostics: str = ""
    agent_stdout: str = ""

    @property
    def failed(self) -> bool:
        return self.diagnostics.startswith(FAILURE_PREFIX)

    def as_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "example_id": self.example_id,
            "score": self.score,
            "fingerprint": self.fingerprint,
            "diagnostics": self.diagnostics,
            "agent_stdout": self.agent_stdout,
        }


@dataclass(frozen=True)
class PhaseDebit:
    iteration: int
    phase: str
    count: int


@dataclass
class BudgetLedger:
    """Authoritative count of evaluations consumed against the fixed budget.

    ``spent`` is always the sum of the per-phase debits and can never exceed
    ``total``; cache hits are never charged.
    """

    total: int
    debits: list[PhaseDebit] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.total < 0:
            raise ValueError(f"budget must be non-negative, got {self.total}")

    @property
    def spent(self) -> int:
        return sum(d.count for d in self.debits)

    @property
    def remaining(self) -> int:
        return self.total - self.spent

    def charge(self, iteration: int, phase: str, count: int) -> None:
        if count < 0:
            raise ValueError(f"debit count must be non-negative, got {count}")
        if count > self.remaining:
            raise BudgetExhaustedError(
                f"need {count} evaluations but only {self.remaining} of {self.total} remain"
            )
        if count:
            self.debits.append(PhaseDebit(iteration, phase, count))

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "spent": self.spent,
            "per_phase": [[d.iteration, d.phase, d.count] for d in self.debits],
        }


def mean_score(outcomes: Sequence[EvalOutcome]) -> float:
    """Arithmetic mean of the outcome scores, exactly rounded via fsum."""
    if not outcomes:
        raise ValueError("mean_score of an empty outcome list")
    return math.fsum(o.score for o in outcomes) / len(outcomes)


@dataclass
class _BatchPlan:
    agent: "AgentRecord"
    examples: list[ExampleRef]
    iteration: int
    phase: str
    uncached: list[ExampleRef]
    results: dict[str, EvalOutcome] = field(default_factory=dict)


class EvaluationManager:
    """Runs evaluator batches with (agent, example) caching and budget accounting.

    The three stages of a batch are kept separate so several batches can share
    the expensive middle part: accounting (cache split, budget precondition,
    debit) and persistence are serialized under a lock in a deterministic
    order, while the plugin invocations in between may run concurrently up to
    the configured parallelism. The event log therefore comes out identical
    at any parallelism.
    """

    def __init__(
        self,
        evaluator,
        ledger: BudgetLedger,
        store: "RunStore | None" = None,
        parallelism: int = 1,
    ) -> None:
        self.evaluator = evaluator
        self.ledger = ledger
        self.store = store
        self.parallelism = max(1, parallelism)
        self._cache: dict[tuple[str, str], EvalOutcome] = {}
        self._lock = threading.Lock()

    def cached(self, agent_id: str, example_id: str) -> EvalOutcome | None:
        return self._cache.get((agent_id, example_id))

    def evaluate_batch(
        self,
        agent: "AgentRecord",
        examples: Sequence[ExampleRef],
        *,
        iteration: int,
        phase: str = PHASE_TOURNAMENT,
    ) -> list[EvalOutcome]:
        """Evaluate one agent on a list of examples, in input order.

        Cached pairs are returned without re-invoking the plugin and without
        debit; uncached pairs debit the ledger exactly once each, up front.
        If the remaining budget cannot cover the uncached pairs the call
        raises BudgetExhaustedError before anything is charged or invoked.
        All outcomes are persisted to the run store before returning.
        """
        plan = self._plan(agent, examples, iteration, phase)
        self._invoke(plan)
        return self._commit(plan)

    def evaluate_batches(
        self,
        batches: Sequence[tuple["AgentRecord", Sequence[ExampleRef]]],
        *,
        iteration: int,
        phase: str = PHASE_TOURNAMENT,
    ) -> list[list[EvalOutcome]]:
        """Evaluate several (agent, examples) batches for the same phase.

        Accounting happens serially in list order, plugin invocations run
        concurrently up to the parallelism limit, and results are persisted
        serially in list order.
        """
        plans = [self._plan(agent, examples, iteration, phase) for agent, examples in batches]
        if self.parallelism > 1 and len(plans) > 1:
            with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
                list(pool.map(self._invoke, plans))
        else:
            for plan in plans:
                self._invoke(plan)
        return [self._commit(plan) for plan in plans]

    def _plan(
        self,
        agent: "AgentRecord",
        examples: Sequence[ExampleRef],
        iteration: int,
        phase: str,
    ) -> _BatchPlan:
        examples = list(examples)
        with self._lock:
            uncached: list[ExampleRef] = []
            seen: set[str] = set()
            for ref in examples:
                if ref.example_id in seen:
                    continue
                seen.add(ref.example_id)
                if (agent.agent_id, ref.example_id) not in self._cache:
                    uncached.append(ref)
            self.ledger.charge(iteration, phase, len(uncached))
            return _BatchPlan(agent, examples, iteration, phase, uncached)

    def _invoke(self, plan: _BatchPlan) -> None:
        if not plan.uncached:
            return
        agent = plan.agent
        try:
            raw = self.evaluator.evaluate(agent.agent_id, agent.resolved_artifact_dir, plan.uncached)
        except Exception as exc:
            logger.warning("evaluator failed for agent %s: %s", agent.agent_id, exc)
            reason = str(exc) or exc.__class__.__name__
            raw = {}
            for ref in plan.uncached:
                plan.results[ref.example_id] = self._failure(agent.agent_id, ref.example_id, reason)
            return
        for ref in plan.uncached:
            fields = raw.get(ref.example_id)
            if fields is None:
                plan.results[ref.example_id] = self._failure(
                    agent.agent_id, ref.example_id, "no outcome line for this example"
                )
                continue
            plan.results[ref.example_id] = self._normalize(agent.agent_id, ref.example_id, fields)

    def _normalize(self, agent_id: str, example_id: str, fields: dict) -> EvalOutcome:
        try:
            score = float(fields["score"])
        except (KeyError, TypeError, ValueError):
            return self._failure(agent_id, example_id, f"malformed score {fields.get('score')!r}")
        if not math.isfinite(score):
            return self._failure(agent_id, example_id, f"non-finite score {score!r}")
        fingerprint = fields.get("fingerprint")
        return EvalOutcome(
            agent_id=agent_id,
            example_id=example_id,
            score=score,
            fingerprint=None if fingerprint is None else str(fingerprint),
            diagnostics=str(fields.get("diagnostics", "")),
            agent_stdout=str(fields.get("agent_stdout", "")),
        )

    @staticmethod
    def _failure(agent_id: str, example_id: str, reason: str) -> EvalOutcome:
        return EvalOutcome(
            agent_id=agent_id,
            example_id=example_id,
            score=0.0,
            fingerprint=None,
            diagnostics=FAILURE_PREFIX + reason,
        )

    def _commit(self, plan: _BatchPlan) -> list[EvalOutcome]:
        agent_id = plan.agent.agent_id
        with self._lock:
            cached_flags = []
            outcomes = []
            for ref in plan.examples:
                key = (agent_id, ref.example_id)
                if key in self._cache:
                    cached_flags.append(True)
                else:
                    self._cache[key] = plan.results[ref.example_id]
                    cached_flags.append(False)
                outcomes.append(self._cache[key])
            if self.store is not None:
                self.store.persist_outcomes(plan.iteration, plan.phase, agent_id, outcomes)
                self.store.append_event(
                    {
                        "type": "batch_evaluated",
                        "iteration": plan.iteration,
                        "phase": plan.phase,
                        "agent_id": agent_id,
                        "example_ids": [r.example_id for r in plan.examples],
                        "scores": [o.score for o in outcomes],
                        "fingerprints": [o.fingerprint for o in outcomes],
                        "cached": cached_flags,
                        "debit": len(plan.uncached),
                    }
                )
            return outcomes
