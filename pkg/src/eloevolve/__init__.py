"""Budget-constrained evolutionary search with Elo tournament selection."""

from .engine import AgentRecord, Engine, EngineConfig, IterationRecord, RunResult
from .evaluation import BudgetExhaustedError, BudgetLedger, EvalOutcome, ExampleRef
from .rating import MatchOutcome, apply_round, expected_score, update_pair
from .replay import ReplayReport, replay_run
from .store import RunStore, StoreIntegrityError

__version__ = "0.1.0"

__all__ = [
    "AgentRecord",
    "BudgetExhaustedError",
    "BudgetLedger",
    "Engine",
    "EngineConfig",
    "EvalOutcome",
    "ExampleRef",
    "IterationRecord",
    "MatchOutcome",
    "ReplayReport",
    "RunResult",
    "RunStore",
    "StoreIntegrityError",
    "apply_round",
    "expected_score",
    "replay_run",
    "update_pair",
]
