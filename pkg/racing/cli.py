"""Command-line interface: fit, sample, race, ablate and report."""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.progress import Progress

from racing import __version__
from racing.ablation import ablation_suite, scenario_sweep
from racing.config import ExperimentSpec, RacingSettings, load_experiment
from racing.curvature_model import evaluate
from racing.errors import ArtifactError, ConfigError, EstimationError, RacingError
from racing.estimation import CenterlineEstimator
from racing.metrics import aggregate
from racing.models import RunResult
from racing.plots import REPORT_HEADER, ReportView, plot_curvature, plot_run, report_rows
from racing.sampling import sample_realizations, select_scenarios
from racing.simulation import ClosedLoopSimulator
from racing.storage import (
    ArtifactStore,
    load_metrics,
    load_model,
    read_map_csv,
    read_measurement_csv,
)
from racing.tracks import get_track


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130
FAILED_TERMINATIONS = ("diverged", "stalled")

console = Console()
err_console = Console(stderr=True)


class UsageError(ConfigError):
    """argparse rejected the command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def read_config(path: Optional[str]) -> Dict[str, Any]:
    """Raw experiment document, or an empty one when no file is given."""
    if path is None:
        return {}
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"{file}: config file not found")
    try:
        with open(file, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{file}:{e.lineno}: invalid JSON: {e.msg}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{file}: experiment config must be a JSON object")
    return document


def resolve_spec(args: argparse.Namespace) -> ExperimentSpec:
    spec = load_experiment(read_config(args.config), args.overrides)
    if args.seed is not None:
        spec = spec.model_copy(update={"seeds": [args.seed]})
    return spec


def _inputs(args: argparse.Namespace, *paths: Optional[str]) -> List[str]:
    return [p for p in (args.config, *paths) if p]


def cmd_fit(args: argparse.Namespace, settings: RacingSettings) -> int:
    """Fit a curvature model to one measured point sequence."""
    spec = resolve_spec(args)
    measurement = read_measurement_csv(args.points)
    estimator = CenterlineEstimator(spec.estimator)
    try:
        centerline = estimator.fit_initial(measurement)
    except EstimationError as e:
        logger.error(f"Fit failed: {e}")
        err_console.print(f"[bold red]Fit failed:[/bold red] {e}")
        return EXIT_RUN_FAILURE

    store = ArtifactStore(args.out or settings.output_dir)
    store.write_model("model.json", centerline.model)
    store.write_map("map.csv", centerline)
    store.append_jsonl("diagnostics.jsonl", estimator.history)

    console.print(f"[green]Fitted[/green] {centerline.model.n_sigmoids} sigmoid(s) over "
                  f"{centerline.length:.3f} m from {len(measurement.points)} points")
    if args.truth:
        truth = load_model(args.truth)
        mae = float(np.mean(np.abs(evaluate(centerline.model, centerline.cum_arc)
                                   - evaluate(truth, centerline.cum_arc))))
        store.write_json("fit_metrics.json", {"kappa_mae": mae})
        console.print(f"Curvature MAE against {args.truth}: {mae:.4f} 1/m")
    store.write_manifest(_inputs(args, args.points, args.truth), spec, "fit", __version__)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace, settings: RacingSettings) -> int:
    """Sample curvature realizations around a fitted map."""
    spec = resolve_spec(args)
    model = load_model(args.model)
    centerline = read_map_csv(args.map, model)
    sampling = spec.sampling.model_copy(update={"seed": spec.seeds[0]})

    report = sample_realizations(centerline, sampling)
    scenarios = select_scenarios(report, centerline, sampling)

    store = ArtifactStore(args.out or settings.output_dir)
    store.write_scenarios("scenarios.json", scenarios)
    store.write_acceptance("acceptance.csv", report)
    console.print(f"Accepted {report.accepted} of {sampling.n_rep} candidate(s); "
                  f"{scenarios.m} scenario(s) selected")
    if scenarios.shortfall:
        err_console.print(f"[yellow]Warning:[/yellow] only {report.accepted} candidate(s) accepted, "
                          f"{sampling.m} scenarios requested; the estimate was repeated")
    store.write_manifest(_inputs(args, args.model, args.map), spec, "sample", __version__, sampling.seed)
    return EXIT_OK


def _print_resolved(spec: ExperimentSpec) -> None:
    console.print_json(json.dumps({
        **spec.model_dump(mode="json"),
        "vehicle": spec.resolved_vehicle().model_dump(mode="json"),
        "control": spec.resolved_control().model_dump(mode="json"),
    }))


def _write_run(store: ArtifactStore, name: str, result: RunResult, simulator: ClosedLoopSimulator,
               plots: bool) -> None:
    store.write_run_log(f"{name}/log.csv", result.log)
    store.write_estimates(f"{name}/estimates", result.estimates)
    store.write_json(f"{name}/metrics.json", {
        "track": result.track, "mode": result.mode, "method": result.method, "seed": result.seed,
        "termination": result.termination, "metrics": result.metrics,
    })
    store.append_jsonl(f"{name}/solve.jsonl", result.solve_diagnostics)
    store.append_jsonl(f"{name}/estimation.jsonl", result.estimation_diagnostics)
    if plots:
        store.record(plot_run(result, simulator.geometry, store.path(f"{name}/trajectory.svg")))
        store.record(plot_curvature(result.estimates, simulator.geometry, store.path(f"{name}/curvature.svg")))


def cmd_race(args: argparse.Namespace, settings: RacingSettings) -> int:
    """Closed-loop runs, one per seed."""
    spec = resolve_spec(args)
    track = spec.track if not isinstance(spec.track, str) else get_track(spec.track)
    if args.dry_run:
        _print_resolved(spec)
        return EXIT_OK

    store = ArtifactStore(args.out or spec.output_dir)
    failures = 0
    for seed in spec.seeds:
        simulator = ClosedLoopSimulator(
            track, spec.resolved_vehicle(), spec.estimator, spec.sampling, spec.resolved_control(),
            spec.sensor, spec.simulation, spec.mode, seed,
        )
        result = simulator.run()
        _write_run(store, f"seed_{seed}", result, simulator, spec.plots or args.plots)
        m = result.metrics
        failed = result.termination in FAILED_TERMINATIONS or m.diverged
        failures += failed
        style = "red" if failed else "green"
        console.print(f"[{style}]seed {seed}: {result.termination}[/{style}] "
                      f"max |η| {m.max_eta * 100:.2f} cm, mean HD {m.mean_hausdorff * 100:.2f} cm, "
                      f"solver failures {m.solver_failures}")
    store.write_manifest(_inputs(args), spec, "race", __version__, spec.seeds[0])
    return EXIT_RUN_FAILURE if failures else EXIT_OK


def cmd_ablate(args: argparse.Namespace, settings: RacingSettings) -> int:
    """Estimation ablation or scenario-count sweep over the seeded runs."""
    spec = resolve_spec(args)
    if args.dry_run:
        _print_resolved(spec)
        return EXIT_OK
    jobs = args.jobs or settings.jobs
    runner = scenario_sweep if args.suite == "scenarios" else ablation_suite
    with Progress(console=err_console, transient=True) as progress:
        task = progress.add_task(f"{args.suite} suite", total=None)

        def advance(done: int, total: int) -> None:
            progress.update(task, completed=done, total=total)

        tables = runner(spec, jobs, advance)

    store = ArtifactStore(args.out or spec.output_dir)
    store.write_csv("report.csv", REPORT_HEADER, report_rows(tables))
    store.write_json("report.json", tables)
    view = ReportView.sweep_table(tables) if args.suite == "scenarios" else ReportView.ablation_table(tables)
    ReportView.show(view)
    store.write_manifest(_inputs(args), spec, f"ablate-{args.suite}", __version__, spec.seeds[0])
    return EXIT_OK


def cmd_report(args: argparse.Namespace, settings: RacingSettings) -> int:
    """Aggregate the metrics files found under a directory."""
    directory = Path(args.metrics_dir)
    if not directory.is_dir():
        raise ArtifactError(f"{directory}: not a directory")
    files = sorted(directory.rglob("metrics.json"))
    if not files:
        raise ArtifactError(f"{directory}: no metrics.json files found")
    runs = [load_metrics(path) for path in files]
    table = aggregate(args.label or directory.name, args.track, runs)

    store = ArtifactStore(args.out or directory)
    store.write_csv("report.csv", REPORT_HEADER, report_rows([table]))
    ReportView.show(ReportView.sweep_table([table]))
    console.print(f"HD {table.hausdorff.format(100.0)} cm, κ MAE {table.kappa_mae.format(1.0, 3)}, "
                  f"success {table.success_rate:.0f}% over {len(runs)} run(s)")
    store.write_manifest([str(p) for p in files], {"label": table.label, "track": table.track},
                         "report", __version__)
    return EXIT_OK


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment JSON document")
    parser.add_argument("--seed", type=int, help="run seed (replaces the configured seed list)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("-s", "--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted-path config override, e.g. control.N=35")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="racing", description="Uncertainty-aware perception-based racing")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = commands.add_parser("fit", help="fit a curvature model to an x,y point CSV")
    fit.add_argument("points", help="CSV with header x,y")
    fit.add_argument("--truth", help="curvature model JSON to report the fit error against")
    _common(fit)
    fit.set_defaults(handler=cmd_fit)

    sample = commands.add_parser("sample", help="sample scenarios around a fitted map")
    sample.add_argument("--model", required=True, help="curvature model JSON")
    sample.add_argument("--map", required=True, help="map CSV with header lambda,alpha,x,y")
    _common(sample)
    sample.set_defaults(handler=cmd_sample)

    race = commands.add_parser("race", help="closed-loop runs on a track")
    _common(race)
    race.add_argument("--dry-run", action="store_true", help="validate and print the resolved config")
    race.add_argument("--plots", action="store_true", help="write SVG plots of each run")
    race.set_defaults(handler=cmd_race)

    ablate = commands.add_parser("ablate", help="estimation ablation or scenario sweep")
    _common(ablate)
    ablate.add_argument("--suite", choices=["estimation", "scenarios"], default="estimation")
    ablate.add_argument("--jobs", type=int, help="worker processes (default: RACING_JOBS or CPU count)")
    ablate.add_argument("--dry-run", action="store_true", help="validate and print the resolved config")
    ablate.set_defaults(handler=cmd_ablate)

    report = commands.add_parser("report", help="aggregate metrics.json files under a directory")
    report.add_argument("metrics_dir")
    report.add_argument("--label", help="row label (default: directory name)")
    report.add_argument("--track", default="-", help="track column value")
    report.add_argument("--out", help="output directory (default: the metrics directory)")
    report.set_defaults(handler=cmd_report)
    return parser


def run(argv: Optional[Sequence[str]] = None, settings: Optional[RacingSettings] = None) -> int:
    """Parse and dispatch; returns the process exit code."""
    settings = settings or RacingSettings()
    try:
        args = build_parser().parse_args(argv)
        logger.info(f"Command '{args.command}' started")
        code = args.handler(args, settings)
        logger.info(f"Command '{args.command}' finished with exit code {code}")
        return code
    except (ConfigError, ArtifactError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        err_console.print(f"[bold red]Error:[/bold red] {e}")
        return EXIT_USAGE
    except RacingError as e:
        logger.error(f"Run failed: {e}")
        err_console.print(f"[bold red]Run failed:[/bold red] {e}")
        return EXIT_RUN_FAILURE
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        err_console.print("\nInterrupted.")
        return EXIT_INTERRUPTED
