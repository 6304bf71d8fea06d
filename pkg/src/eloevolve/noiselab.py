"""Selection-noise statistics for shallow tournament evaluation.

Exact binomial tie and top-rank probabilities, plus seeded Monte Carlo that
compares two ways of ranking agents under a fixed evaluation budget split
into depth (tasks per round) and breadth (number of rounds):

* rating accumulation: every round all agents are scored on the same fresh
  task sample and all pairwise Elo updates are applied (batch rule, matching
  :mod:`eloevolve.rating`); a trial succeeds when the truly best agent ends
  with the strictly highest rating after the last round.
* single-elimination: each round is an independent knockout among the round's
  scores, with no carryover between rounds. The best agent takes the round's
  title only by strictly outscoring every other agent; any tie on its path
  eliminates it. The reported probability is the per-round title rate. For
  three agents this is exactly the probability of a strict top score, however
  the bracket is seeded, because the champion must strictly beat both rivals
  on the same score draw.

Monte Carlo draws are vectorized but each trial consumes its own rng stream
derived from (seed, trial index, estimator tag), so estimates are identical
at any worker count.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rating import DEFAULT_K_FACTOR, INITIAL_RATING

# rng stream tags, part of the published reproducibility contract
_TAG_ELO = 0
_TAG_SINGLE_ELIM = 1

TOP1_TIE_MODES = ("strict", "weak", "random")

SINGLE_ELIM_INTERPRETATION = (
    "single-elimination = independent knockout per round, no memory between rounds; "
    "the best agent takes a round's title only by strictly outscoring every rival "
    "(a tie eliminates it); reported value is the per-round title rate"
)


def _check_probability(p: float, name: str = "probability") -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
    return float(p)


def binomial_pmf(n: int, p: float) -> list[float]:
    """Probability mass of Bin(n, p) at 0..n, using exact binomial coefficients."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _check_probability(p)
    return [math.comb(n, k) * p**k * (1.0 - p) ** (n - k) for k in range(n + 1)]


def _strictly_below_cdfs(pmfs: list[list[float]]) -> list[list[float]]:
    """cdfs[j][k] = P(X_j < k) for each pmf."""
    cdfs = []
    for pmf in pmfs:
        acc, run = [], 0.0
        for mass in pmf:
            acc.append(run)
            run += mass
        cdfs.append(acc)
    return cdfs


def exact_tie_probability(n: int, accuracies, p2: float | None = None) -> float:
    """Probability that the two best scores in the field are equal on n tasks.

    ``accuracies`` is a sequence of per-agent accuracies; for convenience the
    two-agent case may also be spelled ``exact_tie_probability(n, p1, p2)``.
    With two agents this reduces to the inner product of the two binomial mass
    functions, sum over k of P[Bin(n,p1)=k] * P[Bin(n,p2)=k], and is symmetric
    in the accuracies. With more agents it is the probability that the maximum
    score is attained by at least two agents, computed by exact summation.
    """
    if p2 is not None:
        accuracies = [accuracies, p2]
    probs = [(_check_probability(p, "accuracy")) for p in accuracies]
    if len(probs) < 2:
        raise ValueError("need at least 2 accuracies")
    pmfs = [binomial_pmf(n, p) for p in probs]
    if len(probs) == 2:
        return math.fsum(a * b for a, b in zip(pmfs[0], pmfs[1]))
    cdfs = _strictly_below_cdfs(pmfs)
    # P(unique maximum) = sum over the winner j and its score k of
    # P(X_j = k) * prod_{i != j} P(X_i < k); the complement is a shared top.
    unique_max = 0.0
    for j in range(len(probs)):
        for k in range(n + 1):
            term = pmfs[j][k]
            if term == 0.0:
                continue
            for i in range(len(probs)):
                if i != j:
                    term *= cdfs[i][k]
            unique_max += term
    return 1.0 - unique_max


def exact_top1_probability(
    n: int, accuracies: Sequence[float], tie_mode: str = "strict"
) -> float:
    """Probability that the first-listed agent is ranked #1 on n tasks.

    Tie handling at the top score selects among three readings:

    * ``strict``: the agent must strictly outscore every other agent.
    * ``weak``: attaining the maximum counts, shared or not.
    * ``random``: ties for the top are broken uniformly and the result is the
      probability the first agent survives the break.

    All are computed by exact summation over the joint binomial outcomes.
    """
    if len(accuracies) < 2:
        raise ValueError("need at least 2 accuracies")
    if tie_mode not in TOP1_TIE_MODES:
        raise ValueError(f"tie_mode must be one of {TOP1_TIE_MODES}, got {tie_mode!r}")
    pmfs = [binomial_pmf(n, _check_probability(p, "accuracy")) for p in accuracies]
    cdfs = _strictly_below_cdfs(pmfs)

    others = list(range(1, len(accuracies)))
    total = 0.0
    for k in range(n + 1):
        p_first = pmfs[0][k]
        if p_first == 0.0:
            continue
        if tie_mode == "strict":
            below = 1.0
            for j in others:
                below *= cdfs[j][k]
            total += p_first * below
        elif tie_mode == "weak":
            at_most = 1.0
            for j in others:
                at_most *= cdfs[j][k] + pmfs[j][k]
            total += p_first * at_most
        else:
            # partition the others by how many tie the first agent exactly at k
            for mask in range(1 << len(others)):
                term = p_first
                tied = 0
                for bit, j in enumerate(others):
                    if mask >> bit & 1:
                        term *= pmfs[j][k]
                        tied += 1
                    else:
                        term *= cdfs[j][k]
                total += term / (tied + 1)
    return total


@dataclass(frozen=True)
class NoiseLabConfig:
    """Parameters for one Monte Carlo ranking experiment."""

    n: int
    rounds: int
    accuracies: tuple[float, ...] = (0.70, 0.69, 0.68)
    k_factor: float = DEFAULT_K_FACTOR
    trials: int = 50_000
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if len(self.accuracies) < 2:
            raise ValueError("need at least 2 accuracies")
        for p in self.accuracies:
            _check_probability(p, "accuracy")

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.accuracies))


@dataclass(frozen=True)
class MonteCarloEstimate:
    """A success-fraction estimate with its binomial standard error."""

    value: float
    std_error: float
    samples: int

    def __str__(self) -> str:
        return f"{self.value:.4f} ± {self.std_error:.4f}"


def _trial_scores(config: NoiseLabConfig, start: int, stop: int, tag: int) -> np.ndarray:
    """Draw per-round binomial scores for trials [start, stop).

    Returns an int array of shape (stop - start, rounds, agents). Trial t uses
    its own generator seeded from (rng_seed, t, tag); within a trial, agents
    draw their full score column in listed order.
    """
    count = stop - start
    scores = np.empty((count, config.rounds, len(config.accuracies)), dtype=np.int64)
    for offset in range(count):
        rng = np.random.default_rng([config.rng_seed, start + offset, tag])
        for a, p in enumerate(config.accuracies):
            scores[offset, :, a] = rng.binomial(config.n, p, size=config.rounds)
    return scores


def _elo_chunk(config: NoiseLabConfig, start: int, stop: int) -> int:
    """Trials in [start, stop) where the best agent ends strictly top-rated."""
    scores = _trial_scores(config, start, stop, _TAG_ELO)
    trials, rounds, agents = scores.shape
    ratings = np.full((trials, agents), INITIAL_RATING)
    k = config.k_factor
    pairs = [(a, b) for a in range(agents) for b in range(a + 1, agents)]
    for r in range(rounds):
        s = scores[:, r, :]
        deltas = np.zeros_like(ratings)
        for a, b in pairs:
            outcome = np.where(s[:, a] > s[:, b], 1.0, np.where(s[:, a] == s[:, b], 0.5, 0.0))
            expected = 1.0 / (1.0 + 10.0 ** ((ratings[:, b] - ratings[:, a]) / 400.0))
            delta = k * (outcome - expected)
            deltas[:, a] += delta
            deltas[:, b] -= delta
        ratings += deltas
    best = config.best_index
    rivals = np.delete(ratings, best, axis=1)
    return int(np.sum(ratings[:, best] > rivals.max(axis=1)))


def _single_elim_chunk(config: NoiseLabConfig, start: int, stop: int) -> int:
    """Round titles taken by the best agent across trials in [start, stop)."""
    scores = _trial_scores(config, start, stop, _TAG_SINGLE_ELIM)
    best = config.best_index
    rivals = np.delete(scores, best, axis=2)
    wins = scores[:, :, best] > rivals.max(axis=2)
    return int(np.sum(wins))


def _run_chunked(config: NoiseLabConfig, chunk_fn, samples_per_trial: int) -> MonteCarloEstimate:
    trials = config.trials
    workers = max(1, config.workers)
    if workers == 1:
        successes = chunk_fn(config, 0, trials)
    else:
        bounds = np.linspace(0, trials, workers + 1, dtype=int)
        spans = [(int(lo), int(hi)) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(chunk_fn, [config] * len(spans), *zip(*spans))
            successes = sum(parts)
    samples = trials * samples_per_trial
    p_hat = successes / samples
    return MonteCarloEstimate(p_hat, math.sqrt(p_hat * (1.0 - p_hat) / samples), samples)


def elo_ranking_accuracy(config: NoiseLabConfig) -> MonteCarloEstimate:
    """Monte Carlo probability that rating accumulation ranks the best agent #1.

    Each trial plays ``rounds`` rounds; per round every agent scores a fresh
    Bin(n, accuracy) draw and all pairwise Elo updates are applied from the
    pre-round ratings. Success means the best agent's final rating is strictly
    maximal.
    """
    return _run_chunked(config, _elo_chunk, samples_per_trial=1)


def single_elim_accuracy(config: NoiseLabConfig) -> MonteCarloEstimate:
    """Monte Carlo per-round title rate of the best agent under knockout rules.

    Rounds are memoryless, so every (trial, round) cell is an independent
    sample of the title event described in ``SINGLE_ELIM_INTERPRETATION``;
    the standard error accordingly uses trials * rounds samples. At rounds=1
    this estimates the exact strict top-1 probability.
    """
    return _run_chunked(config, _single_elim_chunk, samples_per_trial=config.rounds)


@dataclass(frozen=True)
class SweepRow:
    rounds: int
    n: int
    single_elim: MonteCarloEstimate
    elo: MonteCarloEstimate


@dataclass(frozen=True)
class SweepResult:
    budget: int
    accuracies: tuple[float, ...]
    trials: int
    rng_seed: int
    rows: list[SweepRow] = field(default_factory=list)


def parse_splits(text: str) -> list[tuple[int, int]]:
    """Parse a '10x60,20x30' style split list into (rounds, n) pairs."""
    splits = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        parts = token.split("x")
        if len(parts) != 2:
            raise ValueError(f"bad split {token!r}, expected ROUNDSxN like 10x60")
        try:
            rounds, n = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"bad split {token!r}, expected ROUNDSxN like 10x60") from None
        splits.append((rounds, n))
    if not splits:
        raise ValueError("no splits given")
    return splits


def budget_sweep(
    budget: int,
    splits: list[tuple[int, int]],
    accuracies: Sequence[float] = (0.70, 0.69, 0.68),
    trials: int = 50_000,
    rng_seed: int = 0,
    k_factor: float = DEFAULT_K_FACTOR,
    workers: int = 1,
) -> SweepResult:
    """Estimate both ranking schemes at every (rounds, n) split of a budget.

    Every split must satisfy rounds * n == budget; anything else is rejected.
    """
    for rounds, n in splits:
        if rounds * n != budget:
            raise ValueError(f"invalid split {rounds}x{n}: {rounds} * {n} != budget {budget}")
    rows = []
    for rounds, n in splits:
        config = NoiseLabConfig(
            n=n,
            rounds=rounds,
            accuracies=tuple(accuracies),
            k_factor=k_factor,
            trials=trials,
            rng_seed=rng_seed,
            workers=workers,
        )
        rows.append(
            SweepRow(
                rounds=rounds,
                n=n,
                single_elim=single_elim_accuracy(config),
                elo=elo_ranking_accuracy(config),
            )
        )
    return SweepResult(
        budget=budget,
        accuracies=tuple(accuracies),
        trials=trials,
        rng_seed=rng_seed,
        rows=rows,
    )


def render_sweep_table(result: SweepResult) -> str:
    """Aligned text table for a sweep, with the estimator interpretation header."""
    lines = [
        f"budget {result.budget} | accuracies {', '.join(f'{p:.2f}' for p in result.accuracies)}"
        f" | trials {result.trials} | seed {result.rng_seed}",
        SINGLE_ELIM_INTERPRETATION,
        "",
        f"{'rounds':>6} {'n':>5} {'single_elim':>12} {'se':>7} {'elo':>8} {'se':>7}",
    ]
    for row in result.rows:
        lines.append(
            f"{row.rounds:>6} {row.n:>5} "
            f"{row.single_elim.value:>12.4f} {row.single_elim.std_error:>7.4f} "
            f"{row.elo.value:>8.4f} {row.elo.std_error:>7.4f}"
        )
    return "\n".join(lines) + "\n"


def sweep_to_csv(result: SweepResult) -> str:
    """CSV form of a sweep: rounds, n, single_elim, single_elim_se, elo, elo_se."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rounds", "n", "single_elim", "single_elim_se", "elo", "elo_se"])
    for row in result.rows:
        writer.writerow(
            [
                row.rounds,
                row.n,
                f"{row.single_elim.value:.6f}",
                f"{row.single_elim.std_error:.6f}",
                f"{row.elo.value:.6f}",
                f"{row.elo.std_error:.6f}",
            ]
        )
    return buf.getvalue()
