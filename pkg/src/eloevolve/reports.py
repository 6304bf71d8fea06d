"""Comparative error analysis across the agents of one iteration.

The point of the report is divergence: the examples where competitors
behaved differently are the ones worth studying when drafting the next
agent. Binary-scored tasks get unique-solved / failed-but-solvable id
lists; continuous-scored tasks get the examples with the largest score
spread. Rendering is deterministic so stored reports diff cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .evaluation import EvalOutcome, mean_score

KIND_BINARY = "binary"
KIND_CONTINUOUS = "continuous"

# correct-but-over-cost evaluators emit 0.9, which still counts as solved
SOLVED_THRESHOLD = 0.9

DEFAULT_DIVERGENCE_CAP = 10
DEFAULT_DIAGNOSTIC_BYTE_CAP = 4096
TRUNCATION_MARKER = "…[truncated]"


@dataclass(frozen=True)
class ScoreDelta:
    example_id: str
    scores: dict[str, float]
    delta: float

    def as_dict(self) -> dict:
        return {"example_id": self.example_id, "scores": self.scores, "delta": self.delta}


@dataclass
class ComparativeReport:
    """Divergence analysis of one iteration's competitors."""

    iteration: int
    kind: str
    per_agent_means: dict[str, float]
    unique_solved: dict[str, list[str]] = field(default_factory=dict)
    unique_failed: dict[str, list[str]] = field(default_factory=dict)
    top_deltas: list[ScoreDelta] = field(default_factory=list)
    diagnostics_index: dict[str, dict[str, str]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "kind": self.kind,
            "per_agent_means": self.per_agent_means,
            "unique_solved": self.unique_solved,
            "unique_failed": self.unique_failed,
            "top_deltas": [d.as_dict() for d in self.top_deltas],
            "diagnostics_index": self.diagnostics_index,
        }


def solved(score: float) -> bool:
    return score >= SOLVED_THRESHOLD


def build_report(
    outcomes: Mapping[str, Sequence[EvalOutcome]],
    kind: str,
    iteration: int = 0,
    delta_cap: int = DEFAULT_DIVERGENCE_CAP,
    diagnostics_index: Mapping[str, Mapping[str, str]] | None = None,
) -> ComparativeReport:
    """Build the comparative report for one iteration.

    ``outcomes`` maps each agent id to its outcome list; every agent must
    cover exactly the same example ids in the same order, or the inputs are
    rejected as misaligned.

    Binary reports classify per example: an agent uniquely solved it when it
    is the only agent at or above the solved threshold, and uniquely failed
    it when it missed an example some other competitor solved. Continuous
    reports rank examples by the widest pairwise score gap, keeping at most
    ``delta_cap`` entries. With a single agent there is nothing to diverge
    from and the divergence sections come out empty.
    """
    if kind not in (KIND_BINARY, KIND_CONTINUOUS):
        raise ValueError(f"kind must be '{KIND_BINARY}' or '{KIND_CONTINUOUS}', got {kind!r}")
    if not outcomes:
        raise ValueError("no outcomes given")
    agents = list(outcomes)
    example_ids = [o.example_id for o in outcomes[agents[0]]]
    for agent in agents[1:]:
        ids = [o.example_id for o in outcomes[agent]]
        if ids != example_ids:
            raise ValueError(
                f"misaligned example sets: agent {agent} covers {len(ids)} ids "
                f"that do not match agent {agents[0]}"
            )

    report = ComparativeReport(
        iteration=iteration,
        kind=kind,
        per_agent_means={a: mean_score(outcomes[a]) for a in agents},
        diagnostics_index={a: dict(v) for a, v in (diagnostics_index or {}).items()},
    )

    scores = {a: {o.example_id: o.score for o in outcomes[a]} for a in agents}
    if kind == KIND_BINARY:
        report.unique_solved = {a: [] for a in agents}
        report.unique_failed = {a: [] for a in agents}
        if len(agents) >= 2:
            for example_id in dict.fromkeys(example_ids):
                solvers = [a for a in agents if solved(scores[a][example_id])]
                if len(solvers) == 1:
                    report.unique_solved[solvers[0]].append(example_id)
                if solvers:
                    for agent in agents:
                        if agent not in solvers:
                            report.unique_failed[agent].append(example_id)
    else:
        deltas = []
        if len(agents) >= 2:
            for example_id in dict.fromkeys(example_ids):
                values = [scores[a][example_id] for a in agents]
                deltas.append(
                    ScoreDelta(
                        example_id=example_id,
                        scores={a: scores[a][example_id] for a in agents},
                        delta=max(values) - min(values),
                    )
                )
        deltas.sort(key=lambda d: -d.delta)
        report.top_deltas = deltas[: max(0, delta_cap)]
    return report


def truncate_excerpt(text: str, byte_cap: int) -> str:
    """Clip text to a UTF-8 byte budget, appending a marker when clipped."""
    raw = text.encode("utf-8")
    if len(raw) <= byte_cap:
        return text
    return raw[:byte_cap].decode("utf-8", errors="ignore") + TRUNCATION_MARKER


def render_text(
    report: ComparativeReport,
    standings: Mapping[str, float] | None = None,
    outcomes: Mapping[str, Sequence[EvalOutcome]] | None = None,
    divergence_cap: int = DEFAULT_DIVERGENCE_CAP,
    diagnostic_byte_cap: int = DEFAULT_DIAGNOSTIC_BYTE_CAP,
) -> str:
    """Render a report as a stable human-readable document.

    Sections: rating standings (when given), mean scores, the divergence
    lists capped at ``divergence_cap`` ids per agent and category, and, when
    the raw outcomes are supplied, diagnostics plus captured agent stdout for
    the divergent examples, each excerpt clipped to ``diagnostic_byte_cap``
    bytes.
    """
    lines: list[str] = [f"=== comparative report, iteration {report.iteration} ({report.kind}) ==="]
    if standings:
        lines.append("")
        lines.append("-- elo standings --")
        for agent, rating in sorted(standings.items(), key=lambda kv: (-kv[1], kv[0])):
            lines.append(f"{agent}: {rating:.2f}")
    lines.append("")
    lines.append("-- mean scores --")
    for agent, mean in report.per_agent_means.items():
        lines.append(f"{agent}: {mean:.6f}")

    divergent: list[tuple[str, str]] = []  # (agent, example) pairs worth excerpting

    def list_section(title: str, table: Mapping[str, list[str]]) -> None:
        lines.append("")
        lines.append(f"-- {title} --")
        if not any(table.values()):
            lines.append("(no divergence)")
            return
        for agent, ids in table.items():
            shown = ids[:divergence_cap]
            suffix = "" if len(ids) <= divergence_cap else f" (+{len(ids) - len(shown)} more)"
            lines.append(f"{agent}: {', '.join(shown) if shown else '(none)'}{suffix}")
            divergent.extend((agent, example_id) for example_id in shown)

    if report.kind == KIND_BINARY:
        list_section("uniquely solved", report.unique_solved)
        list_section("failed where another agent solved", report.unique_failed)
    else:
        lines.append("")
        lines.append("-- largest score deltas --")
        if not report.top_deltas:
            lines.append("(no divergence)")
        for entry in report.top_deltas:
            per_agent = ", ".join(f"{a}={s:g}" for a, s in entry.scores.items())
            lines.append(f"{entry.example_id}: delta {entry.delta:g} ({per_agent})")
            divergent.extend((a, entry.example_id) for a in entry.scores)

    if outcomes is not None and divergent:
        by_pair = {
            (agent, o.example_id): o for agent, outs in outcomes.items() for o in outs
        }
        lines.append("")
        lines.append("-- diagnostics excerpts --")
        for agent, example_id in divergent:
            outcome = by_pair.get((agent, example_id))
            if outcome is None:
                continue
            lines.append(f"[{agent} @ {example_id}]")
            if outcome.diagnostics:
                lines.append(truncate_excerpt(outcome.diagnostics, diagnostic_byte_cap))
            if outcome.agent_stdout:
                lines.append("stdout: " + truncate_excerpt(outcome.agent_stdout, diagnostic_byte_cap))
    return "\n".join(lines) + "\n"
