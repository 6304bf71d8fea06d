"""Command-line interface: run | noiselab | replay | report.

All configuration is explicit through flags and the optional JSON config
file; environment variables are never consulted. Flags override config-file
values, which override the built-in defaults.
"""

from __future__ import annotations

import csv
import json
import logging
import shlex
import shutil
import tempfile
from pathlib import Path

import click

from . import __version__
from .engine import MODE_DEFAULT, MODE_KOTH, Engine, EngineConfig, rank_population
from .evaluation import ExampleRef
from .figures import render_run_figures, render_sweep_figure
from .noiselab import (
    TOP1_TIE_MODES,
    budget_sweep,
    elo_ranking_accuracy,
    exact_tie_probability,
    exact_top1_probability,
    NoiseLabConfig,
    parse_splits,
    render_sweep_table,
    single_elim_accuracy,
    sweep_to_csv,
)
from .plugins import (
    BUILTIN_SYNTHETIC,
    DEFAULT_CREATE_TIMEOUT,
    DEFAULT_EVALUATOR_TIMEOUT,
    DEFAULT_REFINE_TIMEOUT,
    resolve_evaluator,
    resolve_mutator,
    write_agent_accuracy,
)
from .replay import replay_run
from .store import RunStore, StoreIntegrityError, load_json

logger = logging.getLogger(__name__)

_MODE_FLAGS = {"default": MODE_DEFAULT, "koth": MODE_KOTH}


@click.group()
@click.version_option(__version__)
@click.option("--verbose", is_flag=True, help="Chatty logging.")
def main(verbose: bool) -> None:
    """Budget-constrained evolutionary search with Elo tournament selection."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_pool(pool_path: Path) -> list[ExampleRef]:
    try:
        doc = json.loads(pool_path.read_text("utf-8"))
        entries = doc["examples"] if isinstance(doc, dict) else doc
        pool = [ExampleRef(**entry) for entry in entries]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise click.UsageError(f"malformed pool file {pool_path}: {exc}")
    ids = [ref.example_id for ref in pool]
    if len(set(ids)) != len(ids):
        raise click.UsageError(f"pool file {pool_path} contains duplicate example_ids")
    if not pool:
        raise click.UsageError(f"pool file {pool_path} is empty")
    return pool


def _command_resolvable(command: str) -> bool:
    if command == BUILTIN_SYNTHETIC:
        return True
    argv = shlex.split(command)
    if not argv:
        return False
    head = argv[0]
    return shutil.which(head) is not None or Path(head).is_file()


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="JSON config file; flags override it.")
@click.option("--pool", "pool_path", type=click.Path(dir_okay=False, path_type=Path), required=True, help="JSON example pool.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), required=True, help="Run directory to create.")
@click.option("--evaluator", default=None, help=f"Evaluator command, or {BUILTIN_SYNTHETIC}.")
@click.option("--mutator", default=None, help=f"Mutator command, or {BUILTIN_SYNTHETIC}.")
@click.option("--budget", type=int, default=None, help="Total evaluation budget.")
@click.option("--sample-size", type=int, default=None, help="Examples per iteration.")
@click.option("--mode", type=click.Choice(sorted(_MODE_FLAGS)), default=None)
@click.option("--deep-focus", type=click.IntRange(0, 1), default=None, help="Focus passes per new agent (0 disables).")
@click.option("--seed", "rng_seed", type=int, default=None, help="Run rng seed.")
@click.option("--k-factor", type=float, default=None)
@click.option("--clone-penalty", type=float, default=None)
@click.option("--parallelism", type=int, default=None)
@click.option("--score-kind", type=click.Choice(["binary", "continuous"]), default=None)
@click.option("--seed-artifact", type=click.Path(file_okay=False, path_type=Path), default=None, help="Seed agent files; defaults to a synthetic agent.")
@click.option("--seed-accuracy", type=float, default=None, help="Synthetic seed accuracy (default 0.5).")
@click.option("--objective", "objective_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Objective document passed to the mutator.")
@click.option("--background", "background_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Background document passed to the mutator.")
def run(config_path, pool_path, out_dir, evaluator, mutator, **flags) -> None:
    """Run one evolution loop and print the final standings."""
    doc = {}
    if config_path is not None:
        if not config_path.is_file():
            raise click.UsageError(f"config file not found: {config_path}")
        try:
            doc = json.loads(config_path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"malformed config file {config_path}: {exc}")

    def setting(flag_name: str, key: str, default):
        if flags.get(flag_name) is not None:
            return flags[flag_name]
        return doc.get(key, default)

    mode_flag = setting("mode", "mode", "default")
    try:
        config = EngineConfig(
            mode=_MODE_FLAGS.get(mode_flag, mode_flag),
            sample_size=setting("sample_size", "sample_size", 20),
            deep_focus_rounds=setting("deep_focus", "deep_focus_rounds", 1),
            k_factor=setting("k_factor", "k_factor", 32.0),
            clone_penalty=setting("clone_penalty", "clone_penalty", 200.0),
            budget=setting("budget", "budget", 1500),
            rng_seed=setting("rng_seed", "rng_seed", 0),
            parallelism=setting("parallelism", "parallelism", 1),
            score_kind=setting("score_kind", "score_kind", "binary"),
            divergence_cap=doc.get("divergence_cap", 10),
            diagnostics_byte_cap=doc.get("diagnostics_byte_cap", 4096),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))

    if not pool_path.is_file():
        raise click.UsageError(f"pool file not found: {pool_path}")
    pool = _load_pool(pool_path)
    if config.budget < config.full_iteration_worst_case:
        raise click.UsageError(
            f"budget {config.budget} is below one full iteration's worst case "
            f"({config.full_iteration_worst_case})"
        )

    evaluator_cmd = evaluator if evaluator is not None else doc.get("evaluator", BUILTIN_SYNTHETIC)
    mutator_cmd = mutator if mutator is not None else doc.get("mutator", BUILTIN_SYNTHETIC)
    for label, command in (("evaluator", evaluator_cmd), ("mutator", mutator_cmd)):
        if not _command_resolvable(command):
            raise click.UsageError(f"{label} command not resolvable: {command}")
    evaluator_plugin = resolve_evaluator(
        evaluator_cmd, config.rng_seed, timeout=doc.get("evaluator_timeout", DEFAULT_EVALUATOR_TIMEOUT)
    )
    mutator_plugin = resolve_mutator(
        mutator_cmd,
        config.rng_seed,
        create_timeout=doc.get("mutator_create_timeout", DEFAULT_CREATE_TIMEOUT),
        refine_timeout=doc.get("mutator_refine_timeout", DEFAULT_REFINE_TIMEOUT),
    )

    for attr, key in (("objective", "objective_path"), ("background", "background_path")):
        path = flags.get(key) or (Path(doc[attr + "_file"]) if attr + "_file" in doc else None)
        if path is not None:
            if not Path(path).is_file():
                raise click.UsageError(f"{attr} document not found: {path}")
            setattr(config, attr, Path(path).read_text("utf-8"))

    seed_artifact = flags.get("seed_artifact") or (
        Path(doc["seed_artifact"]) if "seed_artifact" in doc else None
    )
    seed_accuracy = setting("seed_accuracy", "seed_accuracy", 0.5)
    temp_seed = None
    if seed_artifact is None:
        if evaluator_cmd != BUILTIN_SYNTHETIC:
            raise click.UsageError("--seed-artifact is required with a subprocess evaluator")
        temp_seed = Path(tempfile.mkdtemp(prefix="eloevolve-seed-"))
        write_agent_accuracy(temp_seed, seed_accuracy)
        seed_artifact = temp_seed
    elif not Path(seed_artifact).is_dir():
        raise click.UsageError(f"seed artifact directory not found: {seed_artifact}")

    config_doc = {
        "engine": config.as_dict(),
        "evaluator": evaluator_cmd,
        "mutator": mutator_cmd,
        "seed_accuracy": seed_accuracy,
    }
    try:
        store = RunStore.create(out_dir, config_doc, pool)
    except FileExistsError as exc:
        raise click.UsageError(str(exc))
    try:
        engine = Engine(config, pool, store, evaluator_plugin, mutator_plugin)
        result = engine.run(Path(seed_artifact))
    finally:
        store.close()
        if temp_seed is not None:
            shutil.rmtree(temp_seed, ignore_errors=True)

    click.echo(f"run directory: {result.run_dir}")
    click.echo(
        f"budget: {result.ledger.spent}/{result.ledger.total} evaluations"
        f" over {len(result.iterations)} iterations"
    )
    click.echo("final standings:")
    for position, agent in enumerate(rank_population(list(result.agents.values())), start=1):
        marker = " clone" if agent.clone else ""
        click.echo(
            f"  {position:>3}. {agent.agent_id}  {agent.rating:8.2f}  "
            f"iter {agent.created_iteration}{marker}"
        )
    click.echo(f"best agent: {result.best.agent_id} (rating {result.best.rating:.2f})")
    click.echo(f"best artifact: {result.best.resolved_artifact_dir}")


@main.group()
def noiselab() -> None:
    """Selection-noise statistics: exact probabilities and Monte Carlo tables."""


def _parse_accuracies(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise click.UsageError(f"bad accuracy list {text!r}: {exc}")
    if len(values) < 2:
        raise click.UsageError("need at least 2 accuracies")
    return values


@noiselab.command()
@click.option("--n", type=int, required=True, help="Tasks per round.")
@click.option("--acc", default="0.70,0.69,0.68", help="Comma-separated true accuracies.")
def exact(n: int, acc: str) -> None:
    """Exact tie and top-1 probabilities for one round at depth N."""
    accuracies = _parse_accuracies(acc)
    try:
        tie = exact_tie_probability(n, accuracies)
        click.echo(f"tie (top two of the field share the max): {tie:.6f}")
        if len(accuracies) > 2:
            pair = exact_tie_probability(n, accuracies[0], accuracies[1])
            click.echo(f"pairwise tie of the two best accuracies:  {pair:.6f}")
        for mode in TOP1_TIE_MODES:
            value = exact_top1_probability(n, list(accuracies), mode)
            click.echo(f"top1 [{mode:>6}]: {value:.6f}")
    except ValueError as exc:
        raise click.UsageError(str(exc))


@noiselab.command()
@click.option("--rounds", type=int, required=True)
@click.option("--n", type=int, required=True, help="Tasks per round.")
@click.option("--acc", default="0.70,0.69,0.68")
@click.option("--trials", type=int, default=50_000)
@click.option("--seed", type=int, default=0)
@click.option("--k-factor", type=float, default=32.0)
@click.option("--workers", type=int, default=1)
def mc(rounds, n, acc, trials, seed, k_factor, workers) -> None:
    """Monte Carlo ranking accuracy for one depth/breadth configuration."""
    try:
        config = NoiseLabConfig(
            n=n,
            rounds=rounds,
            accuracies=_parse_accuracies(acc),
            k_factor=k_factor,
            trials=trials,
            rng_seed=seed,
            workers=workers,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    click.echo(f"elo ranking accuracy:    {elo_ranking_accuracy(config)}")
    click.echo(f"single-elim title rate:  {single_elim_accuracy(config)}")


@noiselab.command()
@click.option("--budget", type=int, required=True)
@click.option("--splits", required=True, help="Comma-separated ROUNDSxN splits, e.g. 10x60,20x30.")
@click.option("--acc", default="0.70,0.69,0.68")
@click.option("--trials", type=int, default=50_000)
@click.option("--seed", type=int, default=0)
@click.option("--k-factor", type=float, default=32.0)
@click.option("--workers", type=int, default=1)
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Write sweep.csv, sweep.txt, and sweep.png here.")
def sweep(budget, splits, acc, trials, seed, k_factor, workers, out_dir) -> None:
    """Compare both ranking schemes at every split of the budget."""
    try:
        result = budget_sweep(
            budget,
            parse_splits(splits),
            accuracies=_parse_accuracies(acc),
            trials=trials,
            rng_seed=seed,
            k_factor=k_factor,
            workers=workers,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    table = render_sweep_table(result)
    click.echo(table, nl=False)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.csv").write_text(sweep_to_csv(result), encoding="utf-8")
        (out_dir / "sweep.txt").write_text(table, encoding="utf-8")
        render_sweep_figure(result, out_dir / "sweep.png")
        click.echo(f"wrote {out_dir / 'sweep.csv'}, sweep.txt, sweep.png")


@main.command()
@click.argument("run_dir", type=click.Path(file_okay=False, path_type=Path))
@click.pass_context
def replay(ctx, run_dir: Path) -> None:
    """Re-derive a run from its event log and verify every snapshot."""
    try:
        report = replay_run(run_dir)
    except StoreIntegrityError as exc:
        click.echo(f"integrity error: {exc}", err=True)
        ctx.exit(1)
    click.echo(str(report))
    if not report.ok:
        ctx.exit(1)


@main.command()
@click.argument("run_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory (default RUN_DIR/report).")
@click.pass_context
def report(ctx, run_dir: Path, out_dir: Path | None) -> None:
    """Summarize a run: CSV tables and figures from the stored snapshots."""
    try:
        store = RunStore.open(run_dir)
        iterations_dir = store.root / "iterations"
        indices = sorted(int(p.name) for p in iterations_dir.iterdir() if p.is_dir())
        iterations = [load_json(store.iteration_dir(i) / "iteration.json") for i in indices]
        standings = [load_json(store.iteration_dir(i) / "standings.json") for i in indices]
        ledger = load_json(store.root / "ledger.json")
    except (StoreIntegrityError, OSError, ValueError) as exc:
        click.echo(f"integrity error: {exc}", err=True)
        ctx.exit(1)
    if not iterations:
        click.echo("integrity error: run has no iterations", err=True)
        ctx.exit(1)

    out_dir = out_dir if out_dir is not None else run_dir / "report"
    out_dir.mkdir(parents=True, exist_ok=True)

    with (out_dir / "iterations.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "slot", "agent_id", "mean_score", "elo_before", "elo_after", "winner"]
        )
        for record in iterations:
            for slot, agent_id in enumerate(record["competitor_ids"], start=1):
                writer.writerow(
                    [
                        record["index"],
                        slot,
                        agent_id,
                        f"{record['mean_scores'][agent_id]:.6f}",
                        f"{record['elo_before'][agent_id]:.2f}",
                        f"{record['elo_after'][agent_id]:.2f}",
                        int(agent_id == record["winner_id"]),
                    ]
                )

    final_population = standings[-1]["population"]
    with (out_dir / "standings.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent_id", "rating", "created_iteration", "clone", "parent_ids"])
        for entry in final_population:
            writer.writerow(
                [
                    entry["agent_id"],
                    f"{entry['rating']:.2f}",
                    entry["created_iteration"],
                    int(entry["clone"]),
                    ";".join(entry["parent_ids"]),
                ]
            )

    figures = render_run_figures(iterations, standings, ledger, out_dir)
    click.echo(f"iterations: {len(iterations)}")
    leader = final_population[0]
    click.echo(f"rating leader: {leader['agent_id']} ({leader['rating']:.2f})")
    click.echo(f"budget: {ledger['spent']}/{ledger['total']}")
    click.echo(f"wrote {out_dir / 'iterations.csv'}")
    click.echo(f"wrote {out_dir / 'standings.csv'}")
    for path in figures:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
