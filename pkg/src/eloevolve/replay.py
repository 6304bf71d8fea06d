"""Run verification: re-derive a run from its event log and check every
stored snapshot against the recomputation.

The engine draws all loop randomness from one seeded stream in a documented
order and logs every input a decision was made from (sampled ids, scores,
fingerprints). Replay therefore walks the event log with its own rng seeded
identically, recomputes each sample, Elo round, winner choice, competitor
draw, and ledger debit, and compares them against both the logged values and
the JSON snapshots on disk. The first mismatch is reported with its
iteration and field; a structurally broken store raises
:class:`eloevolve.store.StoreIntegrityError` instead.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .engine import (
    MODE_KOTH,
    AgentRecord,
    EngineConfig,
    best_agent,
    detect_clone,
    koth_winner,
    pick_winner,
    rank_population,
    sample_examples,
)
from .evaluation import PHASE_DEEP_FOCUS, PHASE_TOURNAMENT, EvalOutcome
from .rating import INITIAL_RATING, apply_round
from .store import RunStore, StoreIntegrityError, load_json


@dataclass
class ReplayReport:
    ok: bool
    events: int
    iterations: int
    divergence: str | None = None

    def __str__(self) -> str:
        if self.ok:
            return f"replay OK ({self.events} events, {self.iterations} iterations verified)"
        return f"replay FAILED: {self.divergence}"


class _Divergence(Exception):
    pass


@dataclass
class _IterationState:
    index: int
    example_ids: list[str] = field(default_factory=list)
    competitor_ids: list[str] = field(default_factory=list)
    batches: dict[tuple[str, str], dict] = field(default_factory=dict)  # (phase, agent) -> event
    means: dict[str, float] = field(default_factory=dict)
    elo_before: dict[str, float] = field(default_factory=dict)
    elo_after: dict[str, float] = field(default_factory=dict)
    winner_id: str | None = None
    report_ref: str | None = None
    deep_focus_ref: str | None = None


class _Replayer:
    def __init__(self, store: RunStore) -> None:
        self.store = store
        config_doc = store.config
        try:
            self.config = EngineConfig(**config_doc["engine"])
        except (KeyError, TypeError) as exc:
            raise StoreIntegrityError(f"config.json lacks a valid engine section: {exc}") from None
        self.pool = store.load_pool()
        self.rng = random.Random(self.config.rng_seed)
        self.agents: dict[str, AgentRecord] = {}
        self.spent = 0
        self.per_phase: list[list] = []
        self.seen_pairs: set[tuple[str, str]] = set()
        self.iteration: _IterationState | None = None
        self.completed = 0
        self.finished = False
        self.events = 0

    # -- plumbing -------------------------------------------------------------

    def fail(self, message: str) -> None:
        where = f"iteration {self.iteration.index}: " if self.iteration else ""
        raise _Divergence(where + message)

    def expect(self, condition: bool, message: str) -> None:
        if not condition:
            self.fail(message)

    def expect_equal(self, label: str, recomputed, stored) -> None:
        if recomputed != stored:
            self.fail(f"{label}: recomputed {recomputed!r} != stored {stored!r}")

    def run(self) -> ReplayReport:
        try:
            for event in self.store.events():
                self.events += 1
                handler = getattr(self, "_on_" + event.get("type", ""), None)
                if handler is None:
                    raise StoreIntegrityError(f"unknown event type {event.get('type')!r}")
                handler(event)
            if self.events == 0:
                raise StoreIntegrityError("event log is empty")
            self.expect(self.finished, "event log ends without a run_finished event")
        except _Divergence as exc:
            return ReplayReport(False, self.events, self.completed, str(exc))
        return ReplayReport(True, self.events, self.completed)

    # -- event handlers ---------------------------------------------------------

    def _on_run_started(self, event: dict) -> None:
        self.expect_equal("run config", self.config.as_dict(), event.get("config"))
        self.expect_equal("pool size", len(self.pool), event.get("pool_size"))

    def _on_agent_created(self, event: dict) -> None:
        agent_id = event["agent_id"]
        self.expect_equal("new agent id", f"a{len(self.agents):04d}", agent_id)
        self.expect_equal("starting rating", INITIAL_RATING, event.get("rating"))
        for parent in event.get("parent_ids", []):
            self.expect(parent in self.agents, f"unknown parent {parent} for {agent_id}")
        record = AgentRecord(
            agent_id=agent_id,
            artifact_dir=event["artifact_dir"],
            parent_ids=list(event.get("parent_ids", [])),
            created_iteration=event["created_iteration"],
            rating=INITIAL_RATING,
            clone=False,
        )
        self.agents[agent_id] = record
        self.expect(
            (self.store.root / record.artifact_dir).is_dir(),
            f"artifact directory missing for {agent_id}",
        )
        self.expect(
            (self.store.agent_dir(agent_id) / "metadata.json").is_file(),
            f"metadata missing for {agent_id}",
        )

    def _on_examples_sampled(self, event: dict) -> None:
        index = event["iteration"]
        self.expect(self.iteration is None, f"iteration {index} sampled before {self.completed} closed")
        self.iteration = _IterationState(index=index)
        expected = sample_examples(self.pool, self.config.sample_size, self.rng)
        self.expect_equal(
            "sampled example ids", [r.example_id for r in expected], event.get("example_ids")
        )
        self.expect_equal(
            "distinct flag", self.config.sample_size <= len(self.pool), event.get("distinct")
        )
        self.iteration.example_ids = list(event["example_ids"])

    def _on_batch_evaluated(self, event: dict) -> None:
        state = self.iteration
        self.expect(state is not None and state.index == event["iteration"], "batch outside iteration")
        agent_id = event["agent_id"]
        phase = event["phase"]
        self.expect(agent_id in self.agents, f"batch for unknown agent {agent_id}")
        self.expect(phase in (PHASE_TOURNAMENT, PHASE_DEEP_FOCUS), f"unknown phase {phase!r}")
        self.expect_equal(f"{agent_id} batch examples", state.example_ids, event.get("example_ids"))

        cached_flags = []
        for example_id in event["example_ids"]:
            pair = (agent_id, example_id)
            cached_flags.append(pair in self.seen_pairs)
            self.seen_pairs.add(pair)
        self.expect_equal(f"{agent_id} cached flags", cached_flags, event.get("cached"))
        debit = sum(1 for flag in cached_flags if not flag)
        self.expect_equal(f"{agent_id} batch debit", debit, event.get("debit"))
        for score in event["scores"]:
            self.expect(math.isfinite(score), f"non-finite score in {agent_id} batch")
        self.spent += debit
        self.expect(self.spent <= self.config.budget, "budget exceeded")
        if debit:
            self.per_phase.append([state.index, phase, debit])

        key = (phase, agent_id)
        self.expect(key not in state.batches, f"duplicate batch for {key}")
        state.batches[key] = event
        if phase == PHASE_TOURNAMENT:
            state.competitor_ids.append(agent_id)
            self.expect(
                len(state.competitor_ids) <= self.config.tournament_arity,
                "more tournament batches than the mode allows",
            )
        stored = self.store.load_outcomes(state.index, phase, agent_id)
        self.expect_equal(
            f"{agent_id} persisted scores",
            [o.score for o in stored],
            list(event["scores"]),
        )

    def _outcomes(self, state: _IterationState, phase: str, agent_id: str) -> list[EvalOutcome]:
        event = state.batches[(phase, agent_id)]
        return [
            EvalOutcome(agent_id=agent_id, example_id=e, score=s, fingerprint=f)
            for e, s, f in zip(event["example_ids"], event["scores"], event["fingerprints"])
        ]

    def _on_clone_check(self, event: dict) -> None:
        state = self.iteration
        self.expect(state is not None, "clone check outside iteration")
        debut_id = event["agent_id"]
        self.expect(
            (PHASE_TOURNAMENT, debut_id) in state.batches, "clone check for non-competitor"
        )
        rivals = {
            a: self._outcomes(state, PHASE_TOURNAMENT, a)
            for a in state.competitor_ids
            if a != debut_id
        }
        matched = detect_clone(self._outcomes(state, PHASE_TOURNAMENT, debut_id), rivals)
        self.expect_equal("clone match", matched, event.get("matched"))
        if matched is not None:
            self.expect_equal("clone penalty", self.config.clone_penalty, event.get("penalty"))
            agent = self.agents[debut_id]
            agent.clone = True
            agent.rating -= self.config.clone_penalty

    def _on_elo_round(self, event: dict) -> None:
        state = self.iteration
        self.expect(state is not None, "elo round outside iteration")
        means = {}
        for agent_id in state.competitor_ids:
            scores = state.batches[(PHASE_TOURNAMENT, agent_id)]["scores"]
            means[agent_id] = math.fsum(scores) / len(scores)
        self.expect_equal("means", means, event.get("means"))
        before = {a: self.agents[a].rating for a in state.competitor_ids}
        self.expect_equal("elo_before", before, event.get("elo_before"))
        if len(state.competitor_ids) >= 2:
            after = apply_round(before, means, self.config.k_factor, self.config.tie_rel_tol)
        else:
            after = dict(before)
        self.expect_equal("elo_after", after, event.get("elo_after"))
        for agent_id, rating in after.items():
            self.agents[agent_id].rating = rating
        state.means = means
        state.elo_before = before
        state.elo_after = after

        standings_path = self.store.iteration_dir(state.index) / "standings.json"
        stored = load_json(standings_path)
        expected = {"population": [a.as_dict() for a in rank_population(list(self.agents.values()))]}
        self.expect_equal("standings snapshot", expected, stored)

    def _on_winner_chosen(self, event: dict) -> None:
        state = self.iteration
        self.expect(state is not None and state.means, "winner chosen before the elo round")
        if self.config.mode == MODE_KOTH and len(state.competitor_ids) == 2:
            champion, challenger = state.competitor_ids
            winner = koth_winner(champion, challenger, state.means, self.config.tie_rel_tol)
            tied = [winner]
        else:
            clones = frozenset(a for a in state.competitor_ids if self.agents[a].clone)
            winner, tied = pick_winner(state.means, self.rng, clones, self.config.tie_rel_tol)
        self.expect_equal("winner", winner, event.get("winner_id"))
        self.expect_equal("winner candidates", tied, event.get("candidates"))
        state.winner_id = winner

    def _on_report_built(self, event: dict) -> None:
        state = self.iteration
        self.expect(state is not None, "report outside iteration")
        ref = event["ref"]
        self.expect((self.store.root / ref).is_file(), f"missing report file {ref}")
        state.report_ref = ref

    def _on_third_selected(self, event: dict) -> None:
        state = self.iteration
        self.expect(state is not None and state.winner_id is not None, "selection before winner")
        ranked = rank_population(
            [
                a
                for a in self.agents.values()
                if not a.clone and a.agent_id != state.winner_id
            ]
        )
        candidates = [a.agent_id for a in ranked[:2]]
        self.expect_equal("third candidates", candidates, event.get("candidates"))
        if not candidates:
            selected = None
        elif len(candidates) == 1:
            selected = candidates[0]
        else:
            selected = self.rng.choice(candidates)
        self.expect_equal("third selection", selected, event.get("selected"))

    def _on_mutation(self, event: dict) -> None:
        self.expect(self.iteration is not None, "mutation outside iteration")
        self.expect(event.get("status") in ("created", "failed"), "unknown mutation status")

    def _on_deep_focus(self, event: dict) -> None:
        state = self.iteration
        self.expect(state is not None, "deep focus outside iteration")
        status = event.get("status")
        has_batch = any(phase == PHASE_DEEP_FOCUS for phase, _ in state.batches)
        if status in ("done", "refine_failed"):
            self.expect(has_batch, "deep focus reported without an evaluation batch")
            state.deep_focus_ref = f"iterations/{state.index:04d}/{PHASE_DEEP_FOCUS}/report.txt"
            self.expect(
                (self.store.root / state.deep_focus_ref).is_file(),
                f"missing deep focus report {state.deep_focus_ref}",
            )
        elif status == "skipped_k0":
            self.expect_equal("deep focus rounds", 0, self.config.deep_focus_rounds)
        elif status == "skipped_budget":
            self.expect(
                self.config.budget - self.spent < self.config.sample_size,
                "deep focus skipped for budget while budget remained",
            )
        else:
            self.fail(f"unknown deep focus status {status!r}")

    def _on_iteration_completed(self, event: dict) -> None:
        state = self.iteration
        self.expect(state is not None, "iteration completion without iteration")
        record = {
            "index": state.index,
            "example_ids": state.example_ids,
            "competitor_ids": state.competitor_ids,
            "mean_scores": state.means,
            "elo_before": state.elo_before,
            "elo_after": state.elo_after,
            "winner_id": state.winner_id,
            "report_ref": state.report_ref,
            "deep_focus_ref": state.deep_focus_ref,
        }
        self.expect_equal("iteration record (event)", record, event.get("record"))
        stored = load_json(self.store.iteration_dir(state.index) / "iteration.json")
        self.expect_equal("iteration record (snapshot)", record, stored)
        self.completed += 1
        self.iteration = None

    def _on_run_finished(self, event: dict) -> None:
        self.expect(self.iteration is None, "run finished mid-iteration")
        best = best_agent(self.agents)
        self.expect_equal("best agent", best.agent_id, event.get("best_agent_id"))
        self.expect_equal("iteration count", self.completed, event.get("iterations"))
        self.expect_equal("spent", self.spent, event.get("spent"))
        ledger = load_json(self.store.root / "ledger.json")
        expected = {"total": self.config.budget, "spent": self.spent, "per_phase": self.per_phase}
        self.expect_equal("ledger snapshot", expected, ledger)
        for agent in self.agents.values():
            stored = load_json(self.store.agent_dir(agent.agent_id) / "metadata.json")
            self.expect_equal(f"final metadata for {agent.agent_id}", agent.as_dict(), stored)
        self.finished = True


def replay_run(run_dir) -> ReplayReport:
    """Verify a run directory; see the module docstring for what is checked."""
    store = RunStore.open(run_dir)
    return _Replayer(store).run()
