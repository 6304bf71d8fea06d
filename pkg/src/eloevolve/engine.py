"""The evolution loop: budget-gated Elo tournaments driving a mutator.

Each iteration draws a fresh example sample, scores every competitor on it,
settles the all-pairs Elo round, and asks the mutator for a new agent that
enters the next round alongside the winner and a stochastically chosen
strong third. Selection is deliberately noisy (small samples, random
tie-breaks); ratings accumulate the weak per-round signal across the run.
The returned agent is the non-clone rating leader when the budget can no
longer cover another iteration.

Every random draw of the loop comes from one seeded stream in a fixed
order, every artifact of the run lands in the run store, and plugin
randomness is hash-derived rather than stream-coupled, so a run can be
re-derived and verified from its event log alone (see
:mod:`eloevolve.replay`).
"""

from __future__ import annotations

import logging
import random
import shutil
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .evaluation import (
    PHASE_DEEP_FOCUS,
    BudgetLedger,
    EvalOutcome,
    EvaluationManager,
    ExampleRef,
    mean_score,
)
from .plugins import PHASE_CREATE, PHASE_REFINE, PluginError
from .rating import (
    DEFAULT_CLONE_PENALTY,
    DEFAULT_K_FACTOR,
    INITIAL_RATING,
    MatchOutcome,
    apply_round,
    match_outcome,
)
from .reports import KIND_BINARY, KIND_CONTINUOUS, build_report, render_text
from .store import RunStore, canonical_json

logger = logging.getLogger(__name__)

MODE_DEFAULT = "default_3agent"
MODE_KOTH = "koth"

CONTINUOUS_TIE_REL_TOL = 1e-9

# A failed mutation carries the slate forward, but a permanently broken
# mutator plus a fully cached slate would iterate for free forever; give up
# on evolution after this many failures in a row and return the leader.
MAX_CONSECUTIVE_MUTATION_FAILURES = 5


@dataclass
class EngineConfig:
    """Run parameters; defaults follow the standard configuration."""

    mode: str = MODE_DEFAULT
    sample_size: int = 20
    deep_focus_rounds: int = 1
    k_factor: float = DEFAULT_K_FACTOR
    clone_penalty: float = DEFAULT_CLONE_PENALTY
    budget: int = 1500
    rng_seed: int = 0
    parallelism: int = 1
    score_kind: str = KIND_BINARY
    divergence_cap: int = 10
    diagnostics_byte_cap: int = 4096
    objective: str | None = None
    background: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in (MODE_DEFAULT, MODE_KOTH):
            raise ValueError(f"mode must be {MODE_DEFAULT!r} or {MODE_KOTH!r}, got {self.mode!r}")
        if self.sample_size < 1:
            raise ValueError(f"sample_size must be >= 1, got {self.sample_size}")
        if self.deep_focus_rounds not in (0, 1):
            raise ValueError(f"deep_focus_rounds must be 0 or 1, got {self.deep_focus_rounds}")
        if self.budget < 0:
            raise ValueError(f"budget must be non-negative, got {self.budget}")
        if self.k_factor <= 0:
            raise ValueError(f"k_factor must be positive, got {self.k_factor}")
        if self.clone_penalty < 0:
            raise ValueError(f"clone_penalty must be non-negative, got {self.clone_penalty}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.score_kind not in (KIND_BINARY, KIND_CONTINUOUS):
            raise ValueError(f"score_kind must be binary or continuous, got {self.score_kind!r}")

    @property
    def tournament_arity(self) -> int:
        return 2 if self.mode == MODE_KOTH else 3

    @property
    def tie_rel_tol(self) -> float:
        return 0.0 if self.score_kind == KIND_BINARY else CONTINUOUS_TIE_REL_TOL

    def iteration_worst_case(self, competitor_count: int) -> int:
        """Budget needed to be sure one iteration fits: its tournament plus
        the deep-focus pass that readies the following agent."""
        return self.sample_size * (competitor_count + self.deep_focus_rounds)

    @property
    def full_iteration_worst_case(self) -> int:
        return self.iteration_worst_case(self.tournament_arity)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "sample_size": self.sample_size,
            "deep_focus_rounds": self.deep_focus_rounds,
            "k_factor": self.k_factor,
            "clone_penalty": self.clone_penalty,
            "budget": self.budget,
            "rng_seed": self.rng_seed,
            "parallelism": self.parallelism,
            "score_kind": self.score_kind,
            "divergence_cap": self.divergence_cap,
            "diagnostics_byte_cap": self.diagnostics_byte_cap,
        }


@dataclass
class AgentRecord:
    """One agent in the population: identity, files, lineage, rating."""

    agent_id: str
    artifact_dir: str  # run-root-relative
    parent_ids: list[str]
    created_iteration: int
    rating: float = INITIAL_RATING
    clone: bool = False
    root: Path | None = field(default=None, repr=False, compare=False)

    @property
    def resolved_artifact_dir(self) -> Path:
        return self.root / self.artifact_dir if self.root is not None else Path(self.artifact_dir)

    def as_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "artifact_dir": self.artifact_dir,
            "parent_ids": list(self.parent_ids),
            "created_iteration": self.created_iteration,
            "rating": self.rating,
            "clone": self.clone,
        }


@dataclass
class IterationRecord:
    index: int
    example_ids: list[str]
    competitor_ids: list[str]  # slot order: previous winner, new agent, third
    mean_scores: dict[str, float]
    elo_before: dict[str, float]
    elo_after: dict[str, float]
    winner_id: str
    report_ref: str
    deep_focus_ref: str | None = None

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "example_ids": list(self.example_ids),
            "competitor_ids": list(self.competitor_ids),
            "mean_scores": dict(self.mean_scores),
            "elo_before": dict(self.elo_before),
            "elo_after": dict(self.elo_after),
            "winner_id": self.winner_id,
            "report_ref": self.report_ref,
            "deep_focus_ref": self.deep_focus_ref,
        }


@dataclass
class RunResult:
    best: AgentRecord
    agents: dict[str, AgentRecord]
    iterations: list[IterationRecord]
    ledger: BudgetLedger
    run_dir: Path


def sample_examples(pool: Sequence[ExampleRef], n: int, rng: random.Random) -> list[ExampleRef]:
    """Draw the iteration's sample: n distinct examples, uniformly.

    When the pool is smaller than n the distinctness requirement is relaxed
    to uniform draws with replacement (callers record that in the log).
    """
    if not pool:
        raise ValueError("example pool is empty")
    if n <= len(pool):
        return rng.sample(list(pool), n)
    return rng.choices(list(pool), k=n)


def pick_winner(
    mean_scores: Mapping[str, float],
    rng: random.Random,
    exclude: frozenset[str] = frozenset(),
    tie_rel_tol: float = 0.0,
) -> tuple[str, list[str]]:
    """Choose the iteration winner: an argmax of the means, ties at random.

    ``exclude`` drops quarantined (clone) agents from candidacy; a clone
    always ties the agent it duplicates, so the maximum is still attained.
    Returns (winner_id, tied_candidates). The rng is consulted only when
    more than one candidate ties for the top.
    """
    if not mean_scores:
        raise ValueError("no mean scores to pick a winner from")
    eligible = {a: m for a, m in mean_scores.items() if a not in exclude}
    top = max(eligible.values())
    tied = [a for a, m in eligible.items() if match_outcome(m, top, tie_rel_tol) is MatchOutcome.TIE]
    winner = tied[0] if len(tied) == 1 else rng.choice(tied)
    return winner, tied


def rank_population(agents: Sequence[AgentRecord]) -> list[AgentRecord]:
    """Standings order: rating desc, then earlier creation, then id."""
    return sorted(agents, key=lambda a: (-a.rating, a.created_iteration, a.agent_id))


def select_competitors(
    population: Mapping[str, AgentRecord],
    winner_id: str,
    new_agent_id: str,
    rng: random.Random,
) -> tuple[list[str], list[str]]:
    """Fix the next iteration's slots: winner, the agent about to be created,
    and a third drawn uniformly from the top two remaining non-clone agents.

    Returns (slots, third_candidates). The rng is consulted only when two
    candidates are available for the third slot.
    """
    others = [
        a
        for a in population.values()
        if not a.clone and a.agent_id not in (winner_id, new_agent_id)
    ]
    candidates = [a.agent_id for a in rank_population(others)[:2]]
    if not candidates:
        return [winner_id, new_agent_id], candidates
    third = candidates[0] if len(candidates) == 1 else rng.choice(candidates)
    return [winner_id, new_agent_id, third], candidates


def detect_clone(
    new_outcomes: Sequence[EvalOutcome],
    competitor_outcomes: Mapping[str, Sequence[EvalOutcome]],
) -> str | None:
    """Find a competitor whose per-example predictions the new agent duplicates.

    Compares fingerprint vectors over the iteration's examples and returns
    the first matching competitor id, or None. Outcome lists must cover the
    same example ids in the same order. Missing fingerprints skip the check
    with a warning rather than risk a false positive.
    """
    new_ids = [o.example_id for o in new_outcomes]
    new_prints = [o.fingerprint for o in new_outcomes]
    if any(p is None for p in new_prints):
        logger.warning("clone check skipped: new agent outcomes lack fingerprints")
        return None
    for agent_id, outcomes in competitor_outcomes.items():
        ids = [o.example_id for o in outcomes]
        if ids != new_ids:
            raise ValueError(f"clone check misaligned: {agent_id} covers different examples")
        prints = [o.fingerprint for o in outcomes]
        if any(p is None for p in prints):
            logger.warning("clone check skipped for %s: missing fingerprints", agent_id)
            continue
        if prints == new_prints:
            return agent_id
    return None


def koth_winner(
    champion_id: str,
    challenger_id: str,
    mean_scores: Mapping[str, float],
    tie_rel_tol: float = 0.0,
) -> str:
    """King-of-the-hill step outcome: the challenger takes the title only by
    strictly outscoring the incumbent; ties keep the champion."""
    outcome = match_outcome(mean_scores[challenger_id], mean_scores[champion_id], tie_rel_tol)
    return challenger_id if outcome is MatchOutcome.WIN else champion_id


def best_agent(agents: Mapping[str, AgentRecord]) -> AgentRecord:
    """The non-clone rating leader; rating ties go to the earliest-created."""
    candidates = [a for a in agents.values() if not a.clone]
    if not candidates:
        raise ValueError("no non-clone agents in the population")
    return min(candidates, key=lambda a: (-a.rating, a.created_iteration, a.agent_id))


@dataclass
class _IterationData:
    record: IterationRecord
    examples: list[ExampleRef]
    outcomes: dict[str, list[EvalOutcome]]


class Engine:
    """Drives one run against a store, an evaluator, and a mutator."""

    def __init__(
        self,
        config: EngineConfig,
        pool: Sequence[ExampleRef],
        store: RunStore,
        evaluator,
        mutator,
    ) -> None:
        self.config = config
        self.pool = list(pool)
        if not self.pool:
            raise ValueError("example pool is empty")
        ids = [ref.example_id for ref in self.pool]
        if len(set(ids)) != len(ids):
            raise ValueError("example pool contains duplicate example_ids")
        self.store = store
        self.ledger = BudgetLedger(config.budget)
        self.evals = EvaluationManager(evaluator, self.ledger, store, config.parallelism)
        self.mutator = mutator
        self.rng = random.Random(config.rng_seed)
        self.agents: dict[str, AgentRecord] = {}
        self.iterations: list[IterationRecord] = []
        self._id_counter = 0
        self._mutation_failures = 0

    # -- public --------------------------------------------------------------

    def run(self, seed_artifact: Path) -> RunResult:
        """Execute the full evolution loop and return the rating leader.

        Refuses to start unless the budget covers one full iteration at the
        mode's competitor count plus its deep-focus pass; afterwards the loop
        continues while the next iteration is worst-case affordable.
        """
        config = self.config
        if config.budget < config.full_iteration_worst_case:
            raise ValueError(
                f"budget {config.budget} is below one full iteration's worst case "
                f"({config.full_iteration_worst_case}); refusing to start"
            )
        self.store.append_event(
            {"type": "run_started", "config": config.as_dict(), "pool_size": len(self.pool)}
        )
        seed = self._register_agent(self._next_agent_id(), seed_artifact, [], 0)
        competitors = [seed]
        index = 0
        self._mutation_failures = 0
        while True:
            if self.ledger.remaining < config.sample_size * len(competitors):
                break  # cannot even score the current slate; pre-run gate makes this rare
            if self._mutation_failures >= MAX_CONSECUTIVE_MUTATION_FAILURES:
                logger.warning(
                    "stopping after %d consecutive mutation failures", self._mutation_failures
                )
                break
            data = self._tournament(index, competitors)
            next_competitors = self._maybe_evolve(index, data)
            self._finalize_iteration(data.record)
            if next_competitors is None:
                break
            competitors = next_competitors
            index += 1

        best = best_agent(self.agents)
        self.store.write_ledger(self.ledger.as_dict())
        self.store.append_event(
            {
                "type": "run_finished",
                "best_agent_id": best.agent_id,
                "iterations": len(self.iterations),
                "spent": self.ledger.spent,
            }
        )
        self.store.close()
        logger.info(
            "run finished: %d iterations, %d/%d evaluations, best agent %s at %.2f",
            len(self.iterations),
            self.ledger.spent,
            self.ledger.total,
            best.agent_id,
            best.rating,
        )
        return RunResult(best, self.agents, self.iterations, self.ledger, self.store.root)

    # -- iteration phases ------------------------------------------------------

    def _tournament(self, index: int, competitors: list[AgentRecord]) -> _IterationData:
        config = self.config
        examples = sample_examples(self.pool, config.sample_size, self.rng)
        distinct = config.sample_size <= len(self.pool)
        self.store.append_event(
            {
                "type": "examples_sampled",
                "iteration": index,
                "example_ids": [ref.example_id for ref in examples],
                "distinct": distinct,
            }
        )
        if not distinct:
            logger.warning(
                "iteration %d: pool smaller than sample size, drew with replacement", index
            )

        outcome_lists = self.evals.evaluate_batches(
            [(agent, examples) for agent in competitors], iteration=index
        )
        outcomes = {a.agent_id: outs for a, outs in zip(competitors, outcome_lists)}

        debut = next(
            (a for a in competitors if a.created_iteration == index and a.parent_ids), None
        )
        if debut is not None:
            rivals = {a.agent_id: outcomes[a.agent_id] for a in competitors if a is not debut}
            matched = detect_clone(outcomes[debut.agent_id], rivals)
            if matched is not None:
                debut.clone = True
                debut.rating -= config.clone_penalty
                self.store.write_agent_metadata(debut.as_dict())
                logger.info(
                    "iteration %d: %s duplicates %s, penalized %.0f and quarantined",
                    index,
                    debut.agent_id,
                    matched,
                    config.clone_penalty,
                )
            self.store.append_event(
                {
                    "type": "clone_check",
                    "iteration": index,
                    "agent_id": debut.agent_id,
                    "matched": matched,
                    "penalty": config.clone_penalty if matched is not None else 0.0,
                }
            )

        means = {a.agent_id: mean_score(outcomes[a.agent_id]) for a in competitors}
        elo_before = {a.agent_id: a.rating for a in competitors}
        if len(competitors) >= 2:
            elo_after = apply_round(elo_before, means, config.k_factor, config.tie_rel_tol)
        else:
            elo_after = dict(elo_before)
        for agent in competitors:
            agent.rating = elo_after[agent.agent_id]
            self.store.write_agent_metadata(agent.as_dict())
        self.store.append_event(
            {
                "type": "elo_round",
                "iteration": index,
                "means": means,
                "elo_before": elo_before,
                "elo_after": elo_after,
            }
        )
        self.store.write_standings(index, self._standings_doc())

        if self.config.mode == MODE_KOTH and len(competitors) == 2:
            champion, challenger = competitors[0], competitors[1]
            winner_id = koth_winner(
                champion.agent_id, challenger.agent_id, means, config.tie_rel_tol
            )
            tied = [winner_id]
        else:
            clones = frozenset(a.agent_id for a in competitors if a.clone)
            winner_id, tied = pick_winner(means, self.rng, clones, config.tie_rel_tol)
        self.store.append_event(
            {"type": "winner_chosen", "iteration": index, "winner_id": winner_id, "candidates": tied}
        )

        report = build_report(
            outcomes,
            config.score_kind,
            iteration=index,
            delta_cap=config.divergence_cap,
            diagnostics_index=self._diagnostics_index(index, outcomes),
        )
        report_dir = f"iterations/{index:04d}"
        self.store.write_text(f"{report_dir}/report.json", canonical_json(report.as_dict()) + "\n")
        report_ref = self.store.write_text(
            f"{report_dir}/report.txt",
            render_text(
                report,
                standings=elo_after,
                outcomes=outcomes,
                divergence_cap=config.divergence_cap,
                diagnostic_byte_cap=config.diagnostics_byte_cap,
            ),
        )
        self.store.append_event(
            {"type": "report_built", "iteration": index, "kind": config.score_kind, "ref": report_ref}
        )

        record = IterationRecord(
            index=index,
            example_ids=[ref.example_id for ref in examples],
            competitor_ids=[a.agent_id for a in competitors],
            mean_scores=means,
            elo_before=elo_before,
            elo_after=elo_after,
            winner_id=winner_id,
            report_ref=report_ref,
        )
        self.iterations.append(record)
        return _IterationData(record, examples, outcomes)

    def _maybe_evolve(self, index: int, data: _IterationData) -> list[AgentRecord] | None:
        """Create the next slate if another iteration is worst-case affordable."""
        config = self.config
        winner = self.agents[data.record.winner_id]
        if config.mode == MODE_KOTH:
            third_pool: list[str] = []
            next_arity = 2
        else:
            ranked = rank_population(
                [
                    a
                    for a in self.agents.values()
                    if not a.clone and a.agent_id != winner.agent_id
                ]
            )
            third_pool = [a.agent_id for a in ranked[:2]]
            next_arity = 2 + (1 if third_pool else 0)
        if self.ledger.remaining < config.iteration_worst_case(next_arity):
            return None

        new_id = self._next_agent_id()
        third: AgentRecord | None = None
        if config.mode != MODE_KOTH:
            slots, candidates = select_competitors(self.agents, winner.agent_id, new_id, self.rng)
            third = self.agents[slots[2]] if len(slots) > 2 else None
            self.store.append_event(
                {
                    "type": "third_selected",
                    "iteration": index,
                    "candidates": candidates,
                    "selected": third.agent_id if third else None,
                }
            )
        session_competitors = [winner] + ([third] if third else [])

        session = self._prepare_session(new_id, index, data, session_competitors)
        try:
            self.mutator.run(session, PHASE_CREATE)
            artifact = session / "artifact"
            if not artifact.is_dir() or not any(artifact.iterdir()):
                raise PluginError("mutator wrote no artifact files")
        except PluginError as exc:
            logger.warning("iteration %d: mutation failed, carrying slate forward: %s", index, exc)
            self.store.append_event(
                {
                    "type": "mutation",
                    "iteration": index,
                    "status": "failed",
                    "agent_id": new_id,
                    "error": str(exc)[:500],
                }
            )
            self._id_counter -= 1  # the id was never bound to an agent
            self._mutation_failures += 1
            return [winner] + ([third] if third else [])

        self._mutation_failures = 0
        new_agent = self._register_agent(
            new_id,
            session / "artifact",
            [c.agent_id for c in session_competitors],
            index + 1,
        )
        self.store.append_event(
            {"type": "mutation", "iteration": index, "status": "created", "agent_id": new_id}
        )
        self._deep_focus(index, new_agent, data, session)
        return [winner, new_agent] + ([third] if third else [])

    def _deep_focus(
        self, index: int, draft: AgentRecord, data: _IterationData, session: Path
    ) -> None:
        """Test the draft on the completed iteration's examples and let the
        mutator revise it inside the same session before it competes."""
        config = self.config
        if config.deep_focus_rounds == 0:
            self.store.append_event(
                {"type": "deep_focus", "iteration": index, "agent_id": draft.agent_id, "status": "skipped_k0"}
            )
            return
        if self.ledger.remaining < config.sample_size:
            logger.warning("iteration %d: skipping deep focus, budget below one pass", index)
            self.store.append_event(
                {"type": "deep_focus", "iteration": index, "agent_id": draft.agent_id, "status": "skipped_budget"}
            )
            return

        draft_outcomes = self.evals.evaluate_batch(
            draft, data.examples, iteration=index, phase=PHASE_DEEP_FOCUS
        )
        combined = {draft.agent_id: draft_outcomes, **data.outcomes}
        report = build_report(
            combined, config.score_kind, iteration=index, delta_cap=config.divergence_cap
        )
        standings = {a: self.agents[a].rating for a in combined}
        text = render_text(
            report,
            standings=standings,
            outcomes=combined,
            divergence_cap=config.divergence_cap,
            diagnostic_byte_cap=config.diagnostics_byte_cap,
        )
        focus_dir = f"iterations/{index:04d}/{PHASE_DEEP_FOCUS}"
        self.store.write_text(f"{focus_dir}/report.json", canonical_json(report.as_dict()) + "\n")
        ref = self.store.write_text(f"{focus_dir}/report.txt", text)
        (session / "deep_focus_report.txt").write_text(text, encoding="utf-8")
        data.record.deep_focus_ref = ref

        status = "done"
        try:
            self.mutator.run(session, PHASE_REFINE)
            self._sync_artifact(session / "artifact", draft)
        except PluginError as exc:
            logger.warning("refine failed for %s, draft passes through: %s", draft.agent_id, exc)
            status = "refine_failed"
        self.store.append_event(
            {"type": "deep_focus", "iteration": index, "agent_id": draft.agent_id, "status": status}
        )

    def _finalize_iteration(self, record: IterationRecord) -> None:
        self.store.write_iteration_record(record.as_dict())
        self.store.append_event(
            {"type": "iteration_completed", "iteration": record.index, "record": record.as_dict()}
        )

    # -- helpers ---------------------------------------------------------------

    def _next_agent_id(self) -> str:
        agent_id = f"a{self._id_counter:04d}"
        self._id_counter += 1
        return agent_id

    def _register_agent(
        self, agent_id: str, source_dir: Path, parent_ids: list[str], created_iteration: int
    ) -> AgentRecord:
        dest = self.store.artifact_dir(agent_id)
        if dest.exists():
            shutil.rmtree(dest)
        shutil.copytree(source_dir, dest)
        record = AgentRecord(
            agent_id=agent_id,
            artifact_dir=self.store.relpath(dest),
            parent_ids=list(parent_ids),
            created_iteration=created_iteration,
            rating=INITIAL_RATING,
            root=self.store.root,
        )
        self.agents[agent_id] = record
        self.store.write_agent_metadata(record.as_dict())
        self.store.append_event({"type": "agent_created", **record.as_dict()})
        return record

    def _sync_artifact(self, source: Path, agent: AgentRecord) -> None:
        dest = agent.resolved_artifact_dir
        if source.is_dir() and any(source.iterdir()):
            shutil.rmtree(dest)
            shutil.copytree(source, dest)

    def _standings_doc(self) -> dict:
        return {
            "population": [a.as_dict() for a in rank_population(list(self.agents.values()))]
        }

    def _diagnostics_index(
        self, index: int, outcomes: Mapping[str, Sequence[EvalOutcome]]
    ) -> dict[str, dict[str, str]]:
        base = f"iterations/{index:04d}"
        return {
            agent: {o.example_id: f"{base}/outcomes_{agent}.jsonl#{o.example_id}" for o in outs}
            for agent, outs in outcomes.items()
        }

    def _prepare_session(
        self,
        new_id: str,
        index: int,
        data: _IterationData,
        competitors: list[AgentRecord],
    ) -> Path:
        """Lay out the mutator workspace: standings, the iteration report,
        competitor artifact copies, per-problem diagnostics, and the strategy
        document. The directory persists across create and refine so the
        mutator keeps its working context between the two phases."""
        session = self.store.session_dir(new_id)
        if session.exists():
            shutil.rmtree(session)  # a failed earlier mutation may have left debris
        session.mkdir(parents=True)
        standings = {
            "iteration": index,
            "winner_id": data.record.winner_id,
            "competitor_ids": [c.agent_id for c in competitors],
            **self._standings_doc(),
        }
        (session / "elo_standings.json").write_text(
            canonical_json(standings) + "\n", encoding="utf-8"
        )
        report_src = self.store.root / data.record.report_ref
        (session / "report.txt").write_text(report_src.read_text("utf-8"), encoding="utf-8")
        (session / "strategy.md").write_text(_strategy_document(), encoding="utf-8")
        if self.config.objective:
            (session / "objective.md").write_text(self.config.objective, encoding="utf-8")
        if self.config.background:
            (session / "background.md").write_text(self.config.background, encoding="utf-8")
        comp_root = session / "competitors"
        for comp in competitors:
            shutil.copytree(comp.resolved_artifact_dir, comp_root / comp.agent_id)
        diag_root = session / "diagnostics"
        diag_root.mkdir(exist_ok=True)
        for agent_id, outs in data.outcomes.items():
            blocks = []
            for o in outs:
                blocks.append(f"[{o.example_id}] score {o.score:g}")
                if o.diagnostics:
                    blocks.append(o.diagnostics)
                if o.agent_stdout:
                    blocks.append("stdout: " + o.agent_stdout)
                blocks.append("")
            (diag_root / f"{agent_id}.txt").write_text("\n".join(blocks), encoding="utf-8")
        return session


def _strategy_document() -> str:
    return resources.files("eloevolve").joinpath("data/strategy.md").read_text("utf-8")
