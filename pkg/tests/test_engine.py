from __future__ import annotations

import json
import random
from collections import Counter

import pytest

from eloevolve.engine import (
    MODE_KOTH,
    AgentRecord,
    Engine,
    EngineConfig,
    best_agent,
    detect_clone,
    koth_winner,
    pick_winner,
    sample_examples,
    select_competitors,
)
from eloevolve.evaluation import PHASE_DEEP_FOCUS, EvalOutcome
from eloevolve.plugins import PluginError, SyntheticEvaluator, SyntheticMutator, write_agent_accuracy
from eloevolve.store import RunStore

from conftest import make_pool, run_synthetic


class TestSampleExamples:
    def test_large_pool_gives_distinct_ids(self, pool400):
        sample = sample_examples(pool400, 20, random.Random(1))
        ids = [r.example_id for r in sample]
        assert len(ids) == 20
        assert len(set(ids)) == 20

    def test_small_pool_draws_with_replacement(self):
        pool = make_pool(5)
        sample = sample_examples(pool, 20, random.Random(1))
        assert len(sample) == 20
        assert {r.example_id for r in sample} <= {r.example_id for r in pool}

    def test_same_seed_same_sample(self, pool400):
        a = sample_examples(pool400, 20, random.Random(7))
        b = sample_examples(pool400, 20, random.Random(7))
        assert a == b

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError):
            sample_examples([], 5, random.Random(0))


class TestPickWinner:
    def test_unique_argmax(self):
        winner, tied = pick_winner({"A": 0.8, "B": 0.6, "C": 0.6}, random.Random(0))
        assert winner == "A"
        assert tied == ["A"]

    def test_two_way_tie_is_close_to_even(self):
        rng = random.Random(42)
        counts = Counter(
            pick_winner({"A": 0.7, "B": 0.7, "C": 0.5}, rng)[0] for _ in range(10_000)
        )
        assert counts["C"] == 0
        assert abs(counts["A"] / 10_000 - 0.5) < 0.02

    def test_three_way_tie_is_uniform(self):
        rng = random.Random(3)
        counts = Counter(
            pick_winner({"A": 0.7, "B": 0.7, "C": 0.7}, rng)[0] for _ in range(30_000)
        )
        for agent in "ABC":
            assert abs(counts[agent] / 30_000 - 1 / 3) < 0.01

    def test_clones_are_not_eligible(self):
        winner, tied = pick_winner(
            {"A": 0.7, "B": 0.7}, random.Random(0), exclude=frozenset({"B"})
        )
        assert winner == "A"
        assert tied == ["A"]


def population(ratings: dict[str, float], clones=(), created=None) -> dict[str, AgentRecord]:
    created = created or {}
    return {
        agent_id: AgentRecord(
            agent_id=agent_id,
            artifact_dir=".",
            parent_ids=[],
            created_iteration=created.get(agent_id, 0),
            rating=rating,
            clone=agent_id in clones,
        )
        for agent_id, rating in ratings.items()
    }


class TestSelectCompetitors:
    def test_third_comes_from_the_top_two(self):
        pop = population({"W": 1550.0, "X": 1520.0, "Y": 1510.0, "Z": 1400.0})
        counts = Counter()
        for seed in range(2000):
            slots, candidates = select_competitors(pop, "W", "N", random.Random(seed))
            assert slots[:2] == ["W", "N"]
            assert candidates == ["X", "Y"]
            counts[slots[2]] += 1
        assert set(counts) == {"X", "Y"}
        assert abs(counts["X"] / 2000 - 0.5) < 0.05

    def test_lone_seed_population_gives_two_slots(self):
        pop = population({"W": 1500.0})
        slots, candidates = select_competitors(pop, "W", "N", random.Random(0))
        assert slots == ["W", "N"]
        assert candidates == []

    def test_clones_are_skipped(self):
        pop = population({"W": 1550.0, "X": 1520.0, "Y": 1510.0, "Z": 1400.0}, clones={"X"})
        seen = set()
        for seed in range(200):
            slots, candidates = select_competitors(pop, "W", "N", random.Random(seed))
            assert candidates == ["Y", "Z"]
            seen.add(slots[2])
        assert seen == {"Y", "Z"}


def fingerprint_outcomes(agent_id: str, prints: list[str | None]) -> list[EvalOutcome]:
    return [
        EvalOutcome(agent_id, f"e{i}", 1.0 if p == "1" else 0.0, fingerprint=p)
        for i, p in enumerate(prints)
    ]


class TestDetectClone:
    def test_identical_vector_matches(self):
        new = fingerprint_outcomes("N", ["1", "0"] * 10)
        rivals = {
            "A": fingerprint_outcomes("A", ["1", "0"] * 10),
            "B": fingerprint_outcomes("B", ["0", "0"] * 10),
        }
        assert detect_clone(new, rivals) == "A"

    def test_single_differing_example_is_no_clone(self):
        prints = ["1"] * 20
        altered = ["1"] * 19 + ["0"]
        new = fingerprint_outcomes("N", altered)
        assert detect_clone(new, {"A": fingerprint_outcomes("A", prints)}) is None

    def test_missing_fingerprints_skip_with_no_false_positive(self, caplog):
        new = fingerprint_outcomes("N", [None, "1"])
        rivals = {"A": fingerprint_outcomes("A", [None, "1"])}
        with caplog.at_level("WARNING"):
            assert detect_clone(new, rivals) is None
        assert any("clone check skipped" in m for m in caplog.messages)

    def test_misaligned_examples_rejected(self):
        new = fingerprint_outcomes("N", ["1", "1"])
        rival = [EvalOutcome("A", "other", 1.0, fingerprint="1")] * 2
        with pytest.raises(ValueError, match="misaligned"):
            detect_clone(new, {"A": rival})


class TestKothWinner:
    def test_strictly_better_challenger_takes_the_title(self):
        assert koth_winner("champ", "chall", {"champ": 0.70, "chall": 0.75}) == "chall"

    def test_tie_keeps_the_incumbent(self):
        assert koth_winner("champ", "chall", {"champ": 0.70, "chall": 0.70}) == "champ"

    def test_weaker_challenger_loses(self):
        assert koth_winner("champ", "chall", {"champ": 0.70, "chall": 0.65}) == "champ"


class TestBestAgent:
    def test_rating_leader_wins(self):
        pop = population({"A": 1550.0, "B": 1600.0})
        assert best_agent(pop).agent_id == "B"

    def test_rating_tie_goes_to_the_earliest(self):
        pop = population({"A": 1550.0, "B": 1550.0}, created={"A": 3, "B": 1})
        assert best_agent(pop).agent_id == "B"

    def test_clones_never_returned(self):
        pop = population({"A": 1700.0, "B": 1500.0}, clones={"A"})
        assert best_agent(pop).agent_id == "B"


class TestEngineConfig:
    def test_worst_case_differs_by_n_across_focus_settings(self):
        with_focus = EngineConfig(deep_focus_rounds=1)
        without = EngineConfig(deep_focus_rounds=0)
        for count in (1, 2, 3):
            assert (
                with_focus.iteration_worst_case(count) - without.iteration_worst_case(count)
                == with_focus.sample_size
            )

    def test_full_iteration_worst_case(self):
        assert EngineConfig().full_iteration_worst_case == 80
        assert EngineConfig(mode=MODE_KOTH).full_iteration_worst_case == 60
        assert EngineConfig(deep_focus_rounds=0).full_iteration_worst_case == 60

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mode": "bracket"},
            {"sample_size": 0},
            {"deep_focus_rounds": 2},
            {"k_factor": 0},
            {"parallelism": 0},
            {"score_kind": "ordinal"},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            EngineConfig(**kwargs)


class FailingMutator:
    """Create always fails; refine never reached."""

    def run(self, session_dir, phase):
        raise PluginError("mutator declined")


class CloningMutator(SyntheticMutator):
    """First child is honest, second child duplicates the winner exactly.

    Refine never touches the artifact so the duplicate stays byte-identical
    through deep focus and debuts as a true behavioral clone.
    """

    def run(self, session_dir, phase):
        if phase != "create":
            return None
        standings = json.loads((session_dir / "elo_standings.json").read_text("utf-8"))
        if len(standings["population"]) == 2:
            winner = standings["winner_id"]
            spec = (session_dir / "competitors" / winner / "agent.json").read_text("utf-8")
            artifact = session_dir / "artifact"
            artifact.mkdir()
            (artifact / "agent.json").write_text(spec, encoding="utf-8")
            (session_dir / "reasoning.md").write_text("verbatim copy\n", encoding="utf-8")
        else:
            super().run(session_dir, phase)


class CloneOutcomeEvaluator(SyntheticEvaluator):
    """Scores by artifact content, so byte-identical artifacts behave identically."""

    def evaluate(self, agent_id, artifact_dir, examples):
        accuracy = json.loads((artifact_dir / "agent.json").read_text("utf-8"))["true_accuracy"]
        return SyntheticEvaluator.evaluate(self, f"acc={accuracy}", artifact_dir, examples)


def build_engine(tmp_path, config, evaluator=None, mutator=None, pool_size=400):
    pool = make_pool(pool_size)
    seed_dir = tmp_path / "seed"
    seed_dir.mkdir(exist_ok=True)
    write_agent_accuracy(seed_dir, 0.5)
    store = RunStore.create(tmp_path / "run", {"engine": config.as_dict()}, pool)
    engine = Engine(
        config,
        pool,
        store,
        evaluator or SyntheticEvaluator(config.rng_seed),
        mutator or SyntheticMutator(config.rng_seed),
    )
    return engine, seed_dir


class TestEngineRuns:
    def test_budget_below_one_iteration_refuses_to_start(self, tmp_path):
        engine, seed_dir = build_engine(tmp_path, EngineConfig(budget=59, rng_seed=0))
        with pytest.raises(ValueError, match="refusing to start"):
            engine.run(seed_dir)

    def test_budget_safety_and_winner_continuity(self, tmp_path):
        result = run_synthetic(tmp_path, rng_seed=5, budget=480)
        assert result.ledger.spent <= result.ledger.total
        for previous, current in zip(result.iterations, result.iterations[1:]):
            assert current.competitor_ids[0] == previous.winner_id

    def test_consecutive_samples_differ(self, tmp_path):
        for seed in (11, 12, 13, 14, 15):
            result = run_synthetic(tmp_path / str(seed), rng_seed=seed, budget=800)
            for previous, current in zip(result.iterations, result.iterations[1:]):
                assert set(previous.example_ids) != set(current.example_ids)

    def test_winner_attains_the_max_mean(self, tmp_path):
        result = run_synthetic(tmp_path, rng_seed=2, budget=480)
        for record in result.iterations:
            assert record.winner_id in record.competitor_ids
            assert record.mean_scores[record.winner_id] == max(record.mean_scores.values())

    def test_mutation_failure_carries_the_slate_forward(self, tmp_path):
        config = EngineConfig(budget=480, rng_seed=1)
        engine, seed_dir = build_engine(tmp_path, config, mutator=FailingMutator())
        result = engine.run(seed_dir)
        # only the seed ever exists, every iteration is the seed alone
        assert list(result.agents) == ["a0000"]
        assert all(record.competitor_ids == ["a0000"] for record in result.iterations)
        statuses = [e for e in result.run_dir.joinpath("events.jsonl").read_text().splitlines() if "mutation" in e]
        assert any('"status":"failed"' in line for line in statuses)
        assert result.ledger.spent <= config.budget

    def test_clone_is_penalized_and_quarantined(self, tmp_path):
        config = EngineConfig(budget=480, rng_seed=3)
        engine, seed_dir = build_engine(
            tmp_path,
            config,
            evaluator=CloneOutcomeEvaluator(config.rng_seed),
            mutator=CloningMutator(config.rng_seed),
        )
        result = engine.run(seed_dir)
        clones = [a for a in result.agents.values() if a.clone]
        assert len(clones) == 1
        clone = clones[0]
        debut = next(r for r in result.iterations if clone.agent_id in r.competitor_ids)
        # penalty lands before the debut round: 1500 - 200 plus that round's delta
        assert debut.elo_before[clone.agent_id] == pytest.approx(1300.0)
        for record in result.iterations[debut.index + 1 :]:
            assert clone.agent_id not in record.competitor_ids
        assert result.best.agent_id != clone.agent_id

    def test_deep_focus_disabled_spends_nothing_on_focus(self, tmp_path):
        result = run_synthetic(tmp_path, rng_seed=4, budget=480, deep_focus_rounds=0)
        phases = {d.phase for d in result.ledger.debits}
        assert phases == {"tournament"}
        assert all(record.deep_focus_ref is None for record in result.iterations)

    def test_deep_focus_enabled_spends_one_pass_per_new_agent(self, tmp_path):
        result = run_synthetic(tmp_path, rng_seed=4, budget=480)
        focus_debits = [d for d in result.ledger.debits if d.phase == PHASE_DEEP_FOCUS]
        creations = len(result.agents) - 1
        assert len(focus_debits) == creations
        assert all(d.count <= 20 for d in focus_debits)
        assert any(record.deep_focus_ref for record in result.iterations)

    def test_deep_focus_skips_without_a_full_pass_of_budget(self, tmp_path, caplog):
        config = EngineConfig(budget=480, rng_seed=1)
        engine, seed_dir = build_engine(tmp_path, config)
        seed = engine._register_agent(engine._next_agent_id(), seed_dir, [], 0)
        data = engine._tournament(0, [seed])
        engine.ledger.charge(0, "tournament", engine.ledger.remaining - 5)  # nearly drained
        draft_session = engine._prepare_session("a0001", 0, data, [seed])
        engine.mutator.run(draft_session, "create")
        draft = engine._register_agent("a0001", draft_session / "artifact", [seed.agent_id], 1)
        spent_before = engine.ledger.spent
        with caplog.at_level("WARNING"):
            engine._deep_focus(0, draft, data, draft_session)
        assert engine.ledger.spent == spent_before  # zero debits
        assert data.record.deep_focus_ref is None
        assert any("skipping deep focus" in m for m in caplog.messages)

    def test_koth_runs_two_agents_and_keeps_ties(self, tmp_path):
        result = run_synthetic(tmp_path, rng_seed=6, budget=600, mode=MODE_KOTH)
        for record in result.iterations[1:]:
            assert len(record.competitor_ids) == 2
            champion, challenger = record.competitor_ids
            if record.mean_scores[challenger] <= record.mean_scores[champion]:
                assert record.winner_id == champion
            else:
                assert record.winner_id == challenger

    def test_koth_fits_more_iterations_than_default(self, tmp_path):
        koth = run_synthetic(tmp_path / "koth", rng_seed=9, budget=1500, mode=MODE_KOTH)
        default = run_synthetic(tmp_path / "default", rng_seed=9, budget=1500)
        assert len(koth.iterations) > len(default.iterations)
        assert koth.best is not None and default.best is not None

    def test_returned_agent_is_the_non_clone_rating_leader(self, tmp_path):
        result = run_synthetic(tmp_path, rng_seed=8, budget=480)
        ranked = sorted(
            (a for a in result.agents.values() if not a.clone),
            key=lambda a: (-a.rating, a.created_iteration, a.agent_id),
        )
        assert result.best.agent_id == ranked[0].agent_id

    def test_duplicate_pool_ids_rejected(self, tmp_path):
        pool = make_pool(10) + make_pool(1)
        seed_dir = tmp_path / "seed"
        seed_dir.mkdir()
        write_agent_accuracy(seed_dir, 0.5)
        store = RunStore.create(tmp_path / "run", {}, pool)
        with pytest.raises(ValueError, match="duplicate"):
            Engine(EngineConfig(), pool, store, SyntheticEvaluator(0), SyntheticMutator(0))
