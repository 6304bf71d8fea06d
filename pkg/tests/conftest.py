from __future__ import annotations

from pathlib import Path

import pytest

from eloevolve.engine import Engine, EngineConfig, RunResult
from eloevolve.evaluation import ExampleRef
from eloevolve.plugins import SyntheticEvaluator, SyntheticMutator, write_agent_accuracy
from eloevolve.store import RunStore

FIXTURES = Path(__file__).parent / "fixtures"


def make_pool(size: int) -> list[ExampleRef]:
    return [ExampleRef(f"ex{i:04d}") for i in range(size)]


def run_synthetic(
    root: Path,
    rng_seed: int,
    budget: int = 1500,
    pool_size: int = 400,
    seed_accuracy: float = 0.5,
    **config_kwargs,
) -> RunResult:
    """One full engine run against the builtin synthetic plugins."""
    config = EngineConfig(budget=budget, rng_seed=rng_seed, **config_kwargs)
    pool = make_pool(pool_size)
    seed_dir = root / "seed"
    seed_dir.mkdir(parents=True, exist_ok=True)
    write_agent_accuracy(seed_dir, seed_accuracy)
    store = RunStore.create(
        root / "run",
        {
            "engine": config.as_dict(),
            "evaluator": "builtin:synthetic",
            "mutator": "builtin:synthetic",
            "seed_accuracy": seed_accuracy,
        },
        pool,
    )
    engine = Engine(
        config, pool, store, SyntheticEvaluator(rng_seed), SyntheticMutator(rng_seed)
    )
    return engine.run(seed_dir)


@pytest.fixture
def pool400() -> list[ExampleRef]:
    return make_pool(400)
