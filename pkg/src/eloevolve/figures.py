"""Matplotlib renderers for run reports and noise-lab sweeps.

Everything draws through the Agg backend straight to files; nothing here
opens a window. Figures are companions to the delimited outputs written by
the CLI report paths, not a replacement for them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .noiselab import SweepResult  # noqa: E402


def render_sweep_figure(result: SweepResult, path: Path) -> Path:
    """Both ranking estimators across the budget splits, with error bars."""
    rounds = [row.rounds for row in result.rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    ax.errorbar(
        rounds,
        [row.elo.value for row in result.rows],
        yerr=[row.elo.std_error for row in result.rows],
        marker="o",
        label="rating accumulation",
    )
    ax.errorbar(
        rounds,
        [row.single_elim.value for row in result.rows],
        yerr=[row.single_elim.std_error for row in result.rows],
        marker="s",
        label="single elimination",
    )
    baseline = 1.0 / len(result.accuracies)
    ax.axhline(baseline, linestyle="--", color="gray", linewidth=1, label="random baseline")
    ax.set_xlabel("rounds (budget / tasks per round)")
    ax.set_ylabel("P(best agent ranked #1)")
    ax.set_title(f"ranking accuracy, budget {result.budget}, {result.trials} trials")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_run_figures(
    iterations: list[dict], standings_by_iteration: list[dict], ledger: dict, out_dir: Path
) -> list[Path]:
    """Figures for one run: rating trajectories, mean scores, budget spend."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    # rating trajectory per agent, from each iteration's standings snapshot
    series: dict[str, dict[int, float]] = {}
    for snapshot, record in zip(standings_by_iteration, iterations):
        for entry in snapshot["population"]:
            series.setdefault(entry["agent_id"], {})[record["index"]] = entry["rating"]
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    for agent_id in sorted(series):
        points = sorted(series[agent_id].items())
        ax.plot([i for i, _ in points], [r for _, r in points], label=agent_id, linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("rating")
    ax.set_title("rating trajectories")
    if len(series) <= 14:
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    path = out_dir / "elo_trajectories.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    for record in iterations:
        index = record["index"]
        for agent_id, mean in record["mean_scores"].items():
            is_winner = agent_id == record["winner_id"]
            ax.scatter(
                index,
                mean,
                s=26 if is_winner else 12,
                color="tab:orange" if is_winner else "tab:blue",
                zorder=3 if is_winner else 2,
            )
    winner_means = [r["mean_scores"][r["winner_id"]] for r in iterations]
    ax.plot([r["index"] for r in iterations], winner_means, color="tab:orange", linewidth=1, alpha=0.7)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean score on the iteration sample")
    ax.set_title("competitor mean scores (winner highlighted)")
    fig.tight_layout()
    path = out_dir / "mean_scores.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    spend_by_iteration: dict[int, int] = {}
    for iteration, _phase, count in ledger["per_phase"]:
        spend_by_iteration[iteration] = spend_by_iteration.get(iteration, 0) + count
    xs = sorted(spend_by_iteration)
    cumulative = []
    running = 0
    for x in xs:
        running += spend_by_iteration[x]
        cumulative.append(running)
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    ax.step(xs, cumulative, where="post")
    ax.axhline(ledger["total"], linestyle="--", color="gray", linewidth=1, label="budget")
    ax.set_xlabel("iteration")
    ax.set_ylabel("evaluations spent")
    ax.set_title("budget consumption")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "budget.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
