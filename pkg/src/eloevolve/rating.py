"""Elo rating kernel: expected scores, pairwise updates, and round-level batch updates.

Ratings are plain floats on the familiar chess scale. New competitors enter at
1500. A round of three (or more) agents decomposes into its unordered pairs;
every pair's expected score is computed from the ratings as they stood before
the round and all deltas are applied simultaneously, so the result does not
depend on the order the pairs are visited and total rating mass is conserved.
"""

from __future__ import annotations

import math
from enum import Enum
from itertools import combinations
from typing import Mapping

INITIAL_RATING = 1500.0
DEFAULT_K_FACTOR = 32.0
DEFAULT_CLONE_PENALTY = 200.0


class MatchOutcome(float, Enum):
    """Result of a single pairwise comparison, from the first player's side."""

    WIN = 1.0
    TIE = 0.5
    LOSS = 0.0

    @property
    def complement(self) -> "MatchOutcome":
        """The same match seen from the opponent's side."""
        return MatchOutcome(1.0 - self.value)


def _check_rating(value: float, name: str = "rating") -> float:
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError(f"invalid rating: {name} must be a finite real, got {value!r}")
    return float(value)


def _check_k(k_factor: float) -> float:
    if not isinstance(k_factor, (int, float)) or not math.isfinite(k_factor) or k_factor <= 0:
        raise ValueError(f"k-factor must be a positive finite real, got {k_factor!r}")
    return float(k_factor)


def expected_score(rating_a: float, rating_b: float) -> float:
    """Expected score of the first player against the second, in [0, 1].

    Follows the logistic curve in rating difference with the conventional
    400-point scale: a 400-point underdog expects about 0.09, equal ratings
    expect exactly 0.5, and expected_score(a, b) + expected_score(b, a) = 1
    up to arithmetic round-off.
    """
    r_a = _check_rating(rating_a, "rating_a")
    r_b = _check_rating(rating_b, "rating_b")
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


def update_pair(
    rating_a: float,
    rating_b: float,
    outcome_a: MatchOutcome,
    k_factor: float = DEFAULT_K_FACTOR,
) -> tuple[float, float]:
    """Update both ratings after one pairwise comparison.

    The second player's outcome is the complement of the first's, so the same
    delta is added to one side and subtracted from the other; the pair update
    is zero-sum by construction.

    Args:
        rating_a: Current rating of the first player.
        rating_b: Current rating of the second player.
        outcome_a: The first player's result (win, tie, or loss).
        k_factor: Maximum rating movement for a single comparison.

    Returns:
        Tuple of (new_rating_a, new_rating_b).
    """
    r_a = _check_rating(rating_a, "rating_a")
    r_b = _check_rating(rating_b, "rating_b")
    k = _check_k(k_factor)
    if not isinstance(outcome_a, MatchOutcome):
        outcome_a = MatchOutcome(outcome_a)
    delta = k * (outcome_a.value - expected_score(r_a, r_b))
    return r_a + delta, r_b - delta


def match_outcome(score_a: float, score_b: float, tie_rel_tol: float = 0.0) -> MatchOutcome:
    """Win/tie/loss for the first score under strict comparison.

    With the default zero tolerance only exact equality counts as a tie,
    which is the right rule for integer-sum binary scoring. Continuous
    scores may pass a small relative tolerance so that round-off noise
    does not manufacture wins.
    """
    if tie_rel_tol:
        scale = max(1.0, abs(score_a), abs(score_b))
        if abs(score_a - score_b) <= tie_rel_tol * scale:
            return MatchOutcome.TIE
    if score_a > score_b:
        return MatchOutcome.WIN
    if score_a < score_b:
        return MatchOutcome.LOSS
    return MatchOutcome.TIE


def apply_round(
    ratings: Mapping[str, float],
    mean_scores: Mapping[str, float],
    k_factor: float = DEFAULT_K_FACTOR,
    tie_rel_tol: float = 0.0,
) -> dict[str, float]:
    """Apply one round of all-pairs comparisons as a single batch update.

    Every unordered pair is scored win/tie/loss by comparing mean scores,
    expected scores are taken from the pre-round ratings, and each agent's
    deltas are summed with ``math.fsum`` before being applied. Pair deltas
    are computed once per pair in a canonical orientation (lexicographically
    smaller id first), which together with the exact summation makes the
    output invariant under permutation of the input.

    Args:
        ratings: Pre-round rating per agent id (at least two agents).
        mean_scores: Mean score per agent id; must cover every rated agent.
        k_factor: Update magnitude for each pairwise comparison.
        tie_rel_tol: Relative tolerance under which mean scores tie.

    Returns:
        New rating per agent id, keyed in the input order of ``ratings``.
    """
    agents = list(ratings)
    if len(agents) < 2:
        raise ValueError(f"apply_round needs at least 2 agents, got {len(agents)}")
    missing = [a for a in agents if a not in mean_scores]
    if missing:
        raise ValueError(f"missing mean scores for agents: {missing}")
    k = _check_k(k_factor)

    pre = {a: _check_rating(ratings[a], a) for a in agents}
    deltas: dict[str, list[float]] = {a: [] for a in agents}
    for low, high in combinations(sorted(agents), 2):
        outcome = match_outcome(mean_scores[low], mean_scores[high], tie_rel_tol)
        delta = k * (outcome.value - expected_score(pre[low], pre[high]))
        deltas[low].append(delta)
        deltas[high].append(-delta)
    return {a: pre[a] + math.fsum(deltas[a]) for a in agents}
