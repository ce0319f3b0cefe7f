"""
Command-line interface for the extended RAIM spoofing detector.

Generates synthetic scenarios, runs detection on datasets, evaluates report
streams against labels, sweeps thresholds and tabulates recovery conditions.
Exit codes: 0 on success, 2 on usage errors, 1 on data errors.
"""

import json
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
import typer
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeRemainingColumn
from rich.table import Table

from .config import DetectorConfig, FilterConfig, PositioningConfig, SamplingConfig, ScenarioConfig
from .evaluation import (
    DEFAULT_FP_TARGETS,
    SWEEP_PARAMETERS,
    compare_detectors,
    epoch_labels,
    roc_curve,
    summarize,
    sweep_parameter,
)
from .exceptions import InvalidArgumentError
from .fusion import DEFAULT_LAMBDA_GRID
from .geodesy import wgs84_to_enu
from .ingest import Dataset, DatasetFiles, load_dataset, load_scenario, parse_reports, write_reports
from .pipeline import ExtendedRaimDetector
from .simulator import ScenarioGenerator
from .theory import condition_table

EXIT_DATA = 1
EXIT_USAGE = 2
USAGE_ERRORS = (FileNotFoundError, ValidationError, InvalidArgumentError, typer.BadParameter)

app = typer.Typer(
    name="xraim",
    help="Detect and recover from location spoofing across GNSS and network positioning",
    add_completion=False,
)

console = Console()


def _configure_logging(debug: bool, verbose: bool):
    logger.remove()
    level = "DEBUG" if debug else "INFO" if verbose else "WARNING"
    logger.add(sys.stderr, level=level)


def _fail(error: Exception, debug: bool = False) -> typer.Exit:
    """Print an error and build the matching exit."""
    code = EXIT_USAGE if isinstance(error, USAGE_ERRORS) else EXIT_DATA
    console.print(f"[red]❌ {error}[/red]")
    if debug:
        import traceback

        console.print(f"[red]Debug traceback:\n{traceback.format_exc()}[/red]")
    return typer.Exit(code)


def _parse_list(text: str, cast, label: str) -> List:
    try:
        values = [cast(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"Invalid {label} list '{text}'") from e
    if not values:
        raise typer.BadParameter(f"Empty {label} list")
    return values


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        TimeRemainingColumn(),
        console=console,
    )


def _load_scenario_config(config_path: Optional[Path], seed: Optional[int]) -> ScenarioConfig:
    config = load_scenario(config_path) if config_path is not None else ScenarioConfig()
    return config.model_copy(update={"seed": seed}) if seed is not None else config


def _load_dataset(dataset_dir: Path) -> Dataset:
    """Load a dataset, widening the alignment window to the scenario's network offset."""
    scenario_file = dataset_dir / DatasetFiles.SCENARIO
    scenario = load_scenario(scenario_file) if scenario_file.exists() else None
    window_ms = max(500, abs(scenario.network_offset_ms)) if scenario is not None else 500
    return load_dataset(dataset_dir, alignment_window_ms=window_ms)


def _detector_config(
    seed: int,
    sampling_rate: float,
    strategy: str,
    window: int,
    kernel_decay: float,
    poly_order: int,
    no_filter: bool,
    n_lambda: float,
    lambda_f: float,
    method: str,
    receiver_up: Optional[float] = None,
) -> DetectorConfig:
    return DetectorConfig(
        seed=seed,
        sampling=SamplingConfig(strategy=strategy, rate=sampling_rate),
        positioning=PositioningConfig(terrestrial_method=method, receiver_up=receiver_up),
        filter=FilterConfig(enabled=not no_filter, window=window, order=poly_order, kernel_decay=kernel_decay),
        n_lambda=n_lambda,
        lambda_f=lambda_f,
    )


@app.command()
def simulate(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario config JSON"),
    output_dir: Path = typer.Option(Path("data/scenario"), "--out", "-o", help="Dataset output directory"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Override the scenario seed"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    debug: bool = typer.Option(False, "--debug", help="Show debug logging"),
):
    """🛰️ Generate a synthetic dataset with ground truth and attack labels."""
    _configure_logging(debug, verbose)
    try:
        config = _load_scenario_config(config_path, seed)
        console.print(
            Panel.fit(
                f"[bold cyan]{config.name}[/bold cyan]\n"
                f"[green]Epochs:[/green] {config.epochs}  "
                f"[green]Attacks:[/green] {len(config.attacks)}  "
                f"[yellow]Seed:[/yellow] {config.seed}",
                title="[bold magenta]Scenario Simulation[/bold magenta]",
                border_style="blue",
            )
        )
        generator = ScenarioGenerator(config)
        with _progress() as progress:
            task = progress.add_task("Simulating epochs", total=config.epochs)
            simulated = generator.run(progress_callback=lambda: progress.advance(task))
        with console.status("[bold green]Writing dataset...[/bold green]"):
            files = generator.export(simulated, output_dir)
    except Exception as e:
        raise _fail(e, debug)

    attacked = sum(simulated.is_attacked(i) for i in range(len(simulated.times)))
    console.print(f"[green]✅ {len(simulated.times)} epochs, {attacked} attacked[/green]")
    names = ", ".join(sorted(p.name for p in files.values()))
    console.print(f"[green]📄 Files written to {output_dir}: {names}[/green]")


@app.command()
def detect(
    dataset_dir: Path = typer.Argument(..., help="Dataset directory"),
    output_dir: Optional[Path] = typer.Option(None, "--out", "-o", help="Report directory (default: dataset)"),
    seed: int = typer.Option(42, "--seed", "-s", help="Subset sampling seed"),
    sampling_rate: float = typer.Option(1.0, "--sampling-rate", help="Keep probability per subset"),
    strategy: str = typer.Option("uniform", "--strategy", help="Subset selection: uniform or greedy_dop"),
    window: int = typer.Option(15, "--window", "-w", help="Smoothing window in epochs"),
    kernel_decay: float = typer.Option(0.3, "--kernel-decay", help="Kernel decay of the smoother"),
    poly_order: int = typer.Option(2, "--poly-order", help="Polynomial order of the smoother"),
    no_filter: bool = typer.Option(False, "--no-filter", help="Disable motion-constrained smoothing"),
    n_lambda: float = typer.Option(3.0, "--n-lambda", help="Coverage factor of the exclusion threshold"),
    lambda_f: float = typer.Option(0.5, "--lambda-f", help="Alarm threshold on the attack likelihood"),
    method: str = typer.Option(
        "range_ls", "--method", help="Terrestrial solver: range_ls, weighted_centroid, fingerprint"
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    debug: bool = typer.Option(False, "--debug", help="Show debug logging"),
):
    """🔎 Run extended RAIM detection and recovery over a dataset."""
    _configure_logging(debug, verbose)
    output_dir = output_dir or dataset_dir
    try:
        with console.status("[bold green]Loading dataset...[/bold green]"):
            dataset = _load_dataset(dataset_dir)
        scenario = dataset.scenario
        config = _detector_config(
            seed, sampling_rate, strategy, window, kernel_decay, poly_order, no_filter, n_lambda, lambda_f,
            method, receiver_up=scenario.trajectory.up_m if scenario is not None else None,
        )
        detector = ExtendedRaimDetector(dataset.registry, dataset.origin, config, dataset.fingerprints)
        with _progress() as progress:
            task = progress.add_task("Detecting", total=len(dataset.epochs))
            reports = detector.run(dataset.epochs, progress_callback=lambda n: progress.advance(task, n))
        jsonl_path, csv_path = write_reports(reports, output_dir)
    except Exception as e:
        raise _fail(e, debug)

    table = Table(title="Detection Summary")
    table.add_column("Epochs", justify="right")
    table.add_column("Alarms", justify="right", style="red")
    table.add_column("No data", justify="right")
    table.add_column("Mean excluded", justify="right")
    excluded = [len(r.excluded) for r in reports]
    table.add_row(
        str(len(reports)),
        str(sum(r.alarm for r in reports)),
        str(sum(r.status == "no_data" for r in reports)),
        f"{sum(excluded) / len(excluded):.2f}" if excluded else "-",
    )
    console.print(table)
    console.print(f"[green]📄 Reports written to {jsonl_path} and {csv_path}[/green]")


def _reports_path(dataset_dir: Path, reports: Optional[Path]) -> Path:
    path = reports or dataset_dir / DatasetFiles.REPORTS_JSONL
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run 'xraim detect' first")
    return path


@app.command()
def evaluate(
    dataset_dir: Path = typer.Argument(..., help="Dataset directory with labels and truth"),
    reports_file: Optional[Path] = typer.Option(None, "--reports", "-r", help="Reports JSONL (default: dataset)"),
    lambda_f: Optional[float] = typer.Option(None, "--lambda-f", help="Threshold (default: the one reports used)"),
    output: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the summary as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    debug: bool = typer.Option(False, "--debug", help="Show debug logging"),
):
    """📊 Compute detection and recovery metrics of a report stream."""
    _configure_logging(debug, verbose)
    try:
        reports = parse_reports(_reports_path(dataset_dir, reports_file))
        dataset = _load_dataset(dataset_dir)
        lbs = {
            epoch.time: wgs84_to_enu(epoch.lbs_position, dataset.origin)
            for epoch in dataset.epochs
            if epoch.lbs_position is not None
        }
        summary = summarize(reports, dataset.labels, dataset.truth_enu(), lbs, lambda_f)
        if output is not None:
            output.parent.mkdir(parents=True, exist_ok=True)
            with open(output, "w", encoding="utf-8") as handle:
                json.dump(summary.model_dump(mode="json"), handle, indent=2)
    except Exception as e:
        raise _fail(e, debug)

    table = Table(title=f"Metrics at Λ_f = {summary.lambda_f}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    for name in ("n_attacked", "n_benign", "p_tp", "p_fp", "delta_t_d", "auc", "recovery_mae",
                 "recovery_median", "recovery_p20", "recovery_p80", "lbs_mae", "fused_mae",
                 "score_mean", "score_std"):
        value = getattr(summary, name)
        table.add_row(name, "-" if value is None else f"{value:.4g}")
    console.print(table)
    if output is not None:
        console.print(f"[green]📄 Summary written to {output}[/green]")


@app.command()
def roc(
    dataset_dir: Path = typer.Argument(..., help="Dataset directory with labels"),
    reports_file: Optional[Path] = typer.Option(None, "--reports", "-r", help="Reports JSONL (default: dataset)"),
    grid: Optional[str] = typer.Option(None, "--grid", "-g", help="Comma separated thresholds (default: 101 points)"),
    output: Path = typer.Option(Path("roc.csv"), "--out", "-o", help="ROC CSV output"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    debug: bool = typer.Option(False, "--debug", help="Show debug logging"),
):
    """📈 Sweep the alarm threshold and write (Λ_f, P_fp, P_tp) rows."""
    _configure_logging(debug, verbose)
    try:
        thresholds = _parse_list(grid, float, "threshold") if grid is not None else list(DEFAULT_LAMBDA_GRID)
        reports = parse_reports(_reports_path(dataset_dir, reports_file))
        dataset = _load_dataset(dataset_dir)
        scores = {report.time: report.score for report in reports}
        flags = {time: flag for time, flag in epoch_labels(dataset.labels).items() if time in scores}
        points = roc_curve(scores, flags, thresholds)
        output.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame([point.model_dump() for point in points]).to_csv(output, index=False)
    except Exception as e:
        raise _fail(e, debug)
    console.print(f"[green]✅ {len(points)} ROC points written to {output}[/green]")


@app.command()
def theory(
    n_min: str = typer.Option("3,4", "--nmin", help="Comma separated minimum subset sizes"),
    n_anc_max: int = typer.Option(10, "--nanc-max", help="Largest anchor count"),
    oracle_trials: int = typer.Option(0, "--oracle-trials", help="Idealized oracle trials per row (0 disables)"),
    oracle_max_anchors: int = typer.Option(8, "--oracle-max-anchors", help="Largest anchor count run by the oracle"),
    seed: int = typer.Option(0, "--seed", "-s", help="Oracle seed"),
    output: Path = typer.Option(Path("conditions.csv"), "--out", "-o", help="Condition table CSV"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    debug: bool = typer.Option(False, "--debug", help="Show debug logging"),
):
    """🧮 Tabulate the recovery conditions over anchor counts."""
    _configure_logging(debug, verbose)
    try:
        sizes = _parse_list(n_min, int, "N_min")
        with console.status("[bold green]Evaluating conditions...[/bold green]"):
            table = condition_table(sizes, n_anc_max, oracle_trials, oracle_max_anchors, seed)
        output.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(output, index=False)
    except Exception as e:
        raise _fail(e, debug)
    console.print(f"[green]✅ {len(table)} rows written to {output}[/green]")


@app.command()
def compare(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario config JSON"),
    seeds: int = typer.Option(20, "--seeds", "-n", help="Number of seeded scenarios"),
    seed: int = typer.Option(0, "--seed", "-s", help="First scenario seed"),
    sampling_rate: float = typer.Option(1.0, "--sampling-rate", help="Keep probability per subset"),
    window: int = typer.Option(15, "--window", "-w", help="Smoothing window in epochs"),
    n_lambda: float = typer.Option(3.0, "--n-lambda", help="Coverage factor of the exclusion threshold"),
    output_dir: Path = typer.Option(Path("comparison"), "--out", "-o", help="Output directory"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    debug: bool = typer.Option(False, "--debug", help="Show debug logging"),
):
    """⚖️ Compare extended RAIM with the distance and Kalman baselines on a seeded ensemble."""
    _configure_logging(debug, verbose)
    try:
        config = _load_scenario_config(config_path, None)
        detector_config = DetectorConfig(
            sampling=SamplingConfig(rate=sampling_rate), filter=FilterConfig(window=window), n_lambda=n_lambda
        )
        with _progress() as progress:
            task = progress.add_task("Running scenarios", total=seeds)
            result = compare_detectors(
                config,
                list(range(seed, seed + seeds)),
                detector_config,
                progress_callback=lambda n: progress.advance(task, n),
            )
        output_dir.mkdir(parents=True, exist_ok=True)
        result.per_epoch.to_csv(output_dir / "per_epoch.csv", index=False)
        result.detection.to_csv(output_dir / "detection.csv", index=False)
        with open(output_dir / "recovery.json", "w", encoding="utf-8") as handle:
            json.dump(result.recovery, handle, indent=2)
    except Exception as e:
        raise _fail(e, debug)

    table = Table(title="P_tp at fixed P_fp")
    table.add_column("P_fp", justify="right")
    for name in ("xraim", "distance", "kalman"):
        table.add_column(name, justify="right")
    for row in result.detection.to_dict("records"):
        table.add_row(
            f"{row['p_fp_target']:.2f}",
            *("-" if pd.isna(row[f"{name}_p_tp"]) else f"{row[f'{name}_p_tp']:.3f}"
              for name in ("xraim", "distance", "kalman")),
        )
    console.print(table)
    console.print(f"[green]📄 Results written to {output_dir}[/green]")


@app.command()
def sweep(
    parameter: str = typer.Option("sampling-rate", "--parameter", "-p", help=f"One of {', '.join(SWEEP_PARAMETERS)}"),
    values: str = typer.Option("0.25,0.5,0.75,1.0", "--values", help="Comma separated parameter values"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario config JSON"),
    seeds: int = typer.Option(20, "--seeds", "-n", help="Number of seeded scenarios"),
    seed: int = typer.Option(0, "--seed", "-s", help="First scenario seed"),
    output: Path = typer.Option(Path("sweep.csv"), "--out", "-o", help="Sweep CSV output"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    debug: bool = typer.Option(False, "--debug", help="Show debug logging"),
):
    """🔁 Ablate one detector parameter and report P_tp at fixed P_fp."""
    _configure_logging(debug, verbose)
    try:
        if parameter not in SWEEP_PARAMETERS:
            raise typer.BadParameter(f"Unknown parameter '{parameter}', choose from {', '.join(SWEEP_PARAMETERS)}")
        swept = _parse_list(values, float, "value")
        config = _load_scenario_config(config_path, None)
        with _progress() as progress:
            task = progress.add_task(f"Sweeping {parameter}", total=len(swept))
            table = sweep_parameter(
                config,
                list(range(seed, seed + seeds)),
                parameter,
                swept,
                fp_targets=DEFAULT_FP_TARGETS,
                progress_callback=lambda n: progress.advance(task, n),
            )
        output.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(output, index=False)
    except Exception as e:
        raise _fail(e, debug)
    console.print(f"[green]✅ {len(table)} rows written to {output}[/green]")


def main():
    """Main entry point for the CLI."""
    app()


if __name__ == "__main__":
    main()
