from __future__ import annotations

import pytest

from eloevolve.engine import AgentRecord
from eloevolve.evaluation import (
    BudgetExhaustedError,
    BudgetLedger,
    EvalOutcome,
    EvaluationManager,
    ExampleRef,
    mean_score,
)

from conftest import make_pool


class CountingEvaluator:
    """Happy-path evaluator that remembers how often it was invoked."""

    def __init__(self):
        self.calls = 0
        self.requested: list[list[str]] = []

    def evaluate(self, agent_id, artifact_dir, examples):
        self.calls += 1
        self.requested.append([ref.example_id for ref in examples])
        return {
            ref.example_id: {
                "example_id": ref.example_id,
                "score": 1.0,
                "fingerprint": "1",
                "diagnostics": "ok",
                "agent_stdout": "",
            }
            for ref in examples
        }


class ExplodingEvaluator:
    def evaluate(self, agent_id, artifact_dir, examples):
        raise RuntimeError("boom")


class ForgetfulEvaluator:
    """Answers only the first requested example."""

    def evaluate(self, agent_id, artifact_dir, examples):
        first = examples[0]
        return {first.example_id: {"example_id": first.example_id, "score": 1.0}}


def agent(agent_id="a0000") -> AgentRecord:
    return AgentRecord(agent_id=agent_id, artifact_dir=".", parent_ids=[], created_iteration=0)


class TestBudgetLedger:
    @pytest.mark.parametrize("spent,expect", [(0, 1500), (1500, 0), (80, 1420)])
    def test_remaining(self, spent, expect):
        ledger = BudgetLedger(1500)
        if spent:
            ledger.charge(0, "tournament", spent)
        assert ledger.remaining == expect

    def test_spent_is_the_sum_of_debits(self):
        ledger = BudgetLedger(100)
        ledger.charge(0, "tournament", 20)
        ledger.charge(0, "deep_focus", 20)
        ledger.charge(1, "tournament", 40)
        assert ledger.spent == 80
        assert ledger.as_dict()["per_phase"] == [
            [0, "tournament", 20],
            [0, "deep_focus", 20],
            [1, "tournament", 40],
        ]

    def test_overcharge_rejected(self):
        ledger = BudgetLedger(10)
        with pytest.raises(BudgetExhaustedError):
            ledger.charge(0, "tournament", 11)
        assert ledger.spent == 0

    def test_negative_budget_rejected(self):
        with pytest.raises(ValueError):
            BudgetLedger(-1)


class TestMeanScore:
    def test_binary_mix(self):
        outs = [EvalOutcome("a", str(i), s) for i, s in enumerate([1, 0, 1, 0])]
        assert mean_score(outs) == 0.5

    def test_all_ones(self):
        outs = [EvalOutcome("a", str(i), 1.0) for i in range(20)]
        assert mean_score(outs) == 1.0

    def test_cost_penalized_mix(self):
        outs = [EvalOutcome("a", str(i), s) for i, s in enumerate([0.9, 1.0, 0.0])]
        assert mean_score(outs) == pytest.approx(0.6333333333333333, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_score([])


class TestEvaluateBatch:
    def test_uncached_batch_debits_once_per_pair(self):
        evaluator = CountingEvaluator()
        manager = EvaluationManager(evaluator, BudgetLedger(1500))
        outcomes = manager.evaluate_batch(agent(), make_pool(20), iteration=0)
        assert len(outcomes) == 20
        assert manager.ledger.spent == 20
        assert evaluator.calls == 1

    def test_repeat_is_a_cache_hit(self):
        evaluator = CountingEvaluator()
        manager = EvaluationManager(evaluator, BudgetLedger(1500))
        pool = make_pool(20)
        first = manager.evaluate_batch(agent(), pool, iteration=0)
        second = manager.evaluate_batch(agent(), pool, iteration=1)
        assert manager.ledger.spent == 20
        assert evaluator.calls == 1
        assert first == second

    def test_insufficient_budget_charges_and_invokes_nothing(self):
        evaluator = CountingEvaluator()
        manager = EvaluationManager(evaluator, BudgetLedger(5))
        with pytest.raises(BudgetExhaustedError):
            manager.evaluate_batch(agent(), make_pool(20), iteration=0)
        assert manager.ledger.spent == 0
        assert evaluator.calls == 0

    def test_distinct_agents_do_not_share_cache(self):
        evaluator = CountingEvaluator()
        manager = EvaluationManager(evaluator, BudgetLedger(100))
        pool = make_pool(10)
        manager.evaluate_batch(agent("a0000"), pool, iteration=0)
        manager.evaluate_batch(agent("a0001"), pool, iteration=0)
        assert manager.ledger.spent == 20

    def test_duplicate_examples_in_one_batch_debit_once(self):
        evaluator = CountingEvaluator()
        manager = EvaluationManager(evaluator, BudgetLedger(100))
        ref = ExampleRef("ex0000")
        outcomes = manager.evaluate_batch(agent(), [ref, ref, ref], iteration=0)
        assert manager.ledger.spent == 1
        assert [o.example_id for o in outcomes] == ["ex0000"] * 3

    def test_crash_yields_zero_scores_with_reason_and_still_debits(self):
        manager = EvaluationManager(ExplodingEvaluator(), BudgetLedger(100))
        outcomes = manager.evaluate_batch(agent(), make_pool(5), iteration=0)
        assert manager.ledger.spent == 5
        for outcome in outcomes:
            assert outcome.score == 0.0
            assert outcome.failed
            assert "boom" in outcome.diagnostics

    def test_missing_reply_lines_become_failures(self):
        manager = EvaluationManager(ForgetfulEvaluator(), BudgetLedger(100))
        outcomes = manager.evaluate_batch(agent(), make_pool(3), iteration=0)
        assert [o.score for o in outcomes] == [1.0, 0.0, 0.0]
        assert not outcomes[0].failed
        assert outcomes[1].failed and outcomes[2].failed

    def test_failures_are_cached_as_first_observation(self):
        manager = EvaluationManager(ExplodingEvaluator(), BudgetLedger(100))
        pool = make_pool(4)
        first = manager.evaluate_batch(agent(), pool, iteration=0)
        second = manager.evaluate_batch(agent(), pool, iteration=1)
        assert first == second
        assert manager.ledger.spent == 4

    def test_batches_run_in_slot_order(self):
        evaluator = CountingEvaluator()
        manager = EvaluationManager(evaluator, BudgetLedger(100))
        pool = make_pool(4)
        results = manager.evaluate_batches(
            [(agent("a0000"), pool), (agent("a0001"), pool)], iteration=0
        )
        assert len(results) == 2
        assert all(len(r) == 4 for r in results)
        assert manager.ledger.spent == 8


class TestExampleRef:
    def test_empty_id_rejected(self):
        with pytest.raises(ValueError):
            ExampleRef("")
